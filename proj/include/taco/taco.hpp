#pragma once

// Umbrella header for the whole library.

#include "taco/cfn/cfn.hpp"
#include "taco/cfn/rnd.hpp"
#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/core/io.hpp"
#include "taco/core/rng.hpp"
#include "taco/harness/metrics.hpp"
#include "taco/harness/pipeline.hpp"
#include "taco/harness/run_config.hpp"
#include "taco/nn/activations.hpp"
#include "taco/nn/adam.hpp"
#include "taco/nn/checkpoint.hpp"
#include "taco/nn/layer_norm.hpp"
#include "taco/nn/linear.hpp"
#include "taco/nn/matrix.hpp"
#include "taco/nn/mlp.hpp"
#include "taco/nn/mlp_block.hpp"
#include "taco/nn/onecycle.hpp"
#include "taco/oracle/oracle.hpp"
#include "taco/policy/categorical_policy.hpp"
#include "taco/policy/flow_policy.hpp"
#include "taco/search/feature_search.hpp"
#include "taco/tasks/dataset.hpp"
#include "taco/tasks/task_spec.hpp"
#include "taco/verify/scorers.hpp"
#include "taco/verify/tts.hpp"
