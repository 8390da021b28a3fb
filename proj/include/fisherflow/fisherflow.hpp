#pragma once

#include "fisherflow/action.hpp"
#include "fisherflow/axioms.hpp"
#include "fisherflow/dynamics.hpp"
#include "fisherflow/grid.hpp"
#include "fisherflow/measures.hpp"
#include "fisherflow/observables.hpp"
#include "fisherflow/runner/checkpoint.hpp"
#include "fisherflow/runner/run.hpp"
#include "fisherflow/runner/scenario.hpp"
#include "fisherflow/states.hpp"
#include "fisherflow/version.hpp"
