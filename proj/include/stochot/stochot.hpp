#pragma once

#include "stochot/core.hpp"
#include "stochot/corruption.hpp"
#include "stochot/error_metric.hpp"
#include "stochot/estimators/estimators.hpp"
#include "stochot/estimators/partition.hpp"
#include "stochot/experiments/config.hpp"
#include "stochot/experiments/generators.hpp"
#include "stochot/experiments/output.hpp"
#include "stochot/experiments/runner.hpp"
#include "stochot/io/serialize.hpp"
#include "stochot/io/toml_lite.hpp"
#include "stochot/kernels/discrete_kernel.hpp"
#include "stochot/kernels/pipeline.hpp"
#include "stochot/measures.hpp"
#include "stochot/ot/exact.hpp"
#include "stochot/ot/sinkhorn.hpp"
#include "stochot/rng.hpp"
#include "stochot/version.hpp"
