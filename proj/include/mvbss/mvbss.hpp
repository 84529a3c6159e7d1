#pragma once

// Multi-view blind source separation: simulation, estimation with shared and
// view-specific sources, shared-dimension selection, evaluation metrics, and
// sparse co-regulation graphs.

#include "mvbss/common.hpp"
#include "mvbss/rng.hpp"
#include "mvbss/datamodel.hpp"
#include "mvbss/io.hpp"
#include "mvbss/simulate.hpp"
#include "mvbss/whitening.hpp"
#include "mvbss/cca.hpp"
#include "mvbss/objective.hpp"
#include "mvbss/optimizer.hpp"
#include "mvbss/estimator.hpp"
#include "mvbss/model_selection.hpp"
#include "mvbss/metrics.hpp"
#include "mvbss/glasso.hpp"
#include "mvbss/pipeline.hpp"
