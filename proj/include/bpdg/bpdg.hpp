#pragma once

#include "bpdg/analysis.hpp"
#include "bpdg/error.hpp"
#include "bpdg/format.hpp"
#include "bpdg/guidance.hpp"
#include "bpdg/scenario.hpp"
#include "bpdg/simulator.hpp"
