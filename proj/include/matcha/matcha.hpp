#pragma once

#include "matcha/error.hpp"
#include "matcha/rng.hpp"
#include "matcha/matrix.hpp"
#include "matcha/ops.hpp"
#include "matcha/json_io.hpp"
#include "matcha/linalg.hpp"
#include "matcha/backend/device.hpp"
#include "matcha/backend/context.hpp"
#include "matcha/backend/runtime.hpp"
#include "matcha/ml/stats.hpp"
#include "matcha/ml/linear_model.hpp"
#include "matcha/ml/neighbors.hpp"
#include "matcha/ml/cluster.hpp"
#include "matcha/ml/mixture.hpp"
#include "matcha/ml/decomposition.hpp"
#include "matcha/ml/cross_decomposition.hpp"
#include "matcha/plot/colormap.hpp"
#include "matcha/plot/marching_squares.hpp"
#include "matcha/plot/figure.hpp"
#include "matcha/plot/svg.hpp"
#include "matcha/bench/tasks.hpp"
#include "matcha/bench/harness.hpp"
