#pragma once

// Core library: offspring laws, environments, exact analysis, simulation and
// trees. JSON I/O and the experiment runner live in dgw/io.hpp and
// dgw/experiment.hpp, which additionally need nlohmann/json.

#include "dgw/analysis.hpp"
#include "dgw/environment.hpp"
#include "dgw/error.hpp"
#include "dgw/offspring.hpp"
#include "dgw/rng.hpp"
#include "dgw/simulate.hpp"
#include "dgw/state.hpp"
#include "dgw/trees.hpp"
#include "dgw/version.hpp"
