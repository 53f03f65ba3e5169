#pragma once

#include "pmnn/autodiff/evaluator.hpp"
#include "pmnn/autodiff/expr.hpp"
#include "pmnn/autodiff/graph.hpp"
#include "pmnn/autodiff/jet.hpp"
#include "pmnn/baseline_fdm.hpp"
#include "pmnn/error.hpp"
#include "pmnn/format.hpp"
#include "pmnn/harness.hpp"
#include "pmnn/network.hpp"
#include "pmnn/problems.hpp"
#include "pmnn/sampling.hpp"
#include "pmnn/training.hpp"
