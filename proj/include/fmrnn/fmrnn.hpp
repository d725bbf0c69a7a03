#pragma once

// Umbrella header for the feature-mapping RNN library.

#include "fmrnn/numcore.hpp"
#include "fmrnn/layers.hpp"
#include "fmrnn/featmap.hpp"
#include "fmrnn/models.hpp"
#include "fmrnn/data.hpp"
#include "fmrnn/engine.hpp"
#include "fmrnn/pipeline.hpp"
#include "fmrnn/metrics.hpp"
#include "fmrnn/verify.hpp"
