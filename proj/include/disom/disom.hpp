#pragma once

#include "disom/algorithms.hpp"
#include "disom/analysis.hpp"
#include "disom/core.hpp"
#include "disom/errors.hpp"
#include "disom/experiment.hpp"
#include "disom/fitness.hpp"
#include "disom/regimes.hpp"
#include "disom/stats.hpp"
#include "disom/theory.hpp"
