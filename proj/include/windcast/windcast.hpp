#pragma once

// Umbrella header for the windcast short-term wind forecasting toolkit.

#include "windcast/baselines.hpp"
#include "windcast/csv.hpp"
#include "windcast/data.hpp"
#include "windcast/errors.hpp"
#include "windcast/linalg.hpp"
#include "windcast/lstm.hpp"
#include "windcast/rng.hpp"
#include "windcast/stats.hpp"
#include "windcast/trainer.hpp"
