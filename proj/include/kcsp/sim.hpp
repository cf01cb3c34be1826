#pragma once

// Random-system simulation: generation, 2-core peeling, exact solvers, threshold search.
#include "kcsp/rng.hpp"
#include "kcsp/sim/core.hpp"
#include "kcsp/sim/formula.hpp"
#include "kcsp/sim/linear.hpp"
#include "kcsp/sim/threshold.hpp"
#include "kcsp/sim/ue.hpp"
