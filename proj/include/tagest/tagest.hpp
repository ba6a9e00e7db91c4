#pragma once

// Umbrella header: the full estimator, detector, simulator, diagnostics,
// and experiment harness.

#include "tagest/analysis.hpp"
#include "tagest/config.hpp"
#include "tagest/cusum.hpp"
#include "tagest/estimator.hpp"
#include "tagest/rng.hpp"
#include "tagest/runner.hpp"
#include "tagest/selftest.hpp"
#include "tagest/sim.hpp"
