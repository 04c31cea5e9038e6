#pragma once

// Umbrella header: the whole toolkit. Individual headers can be included
// on their own; only chat_client.hpp and experiment.hpp pull in the
// bundled HTTP and JSON libraries.

#include "varfuse/analyzer.hpp"
#include "varfuse/chat_client.hpp"
#include "varfuse/config.hpp"
#include "varfuse/error.hpp"
#include "varfuse/experiment.hpp"
#include "varfuse/fsutil.hpp"
#include "varfuse/fusion.hpp"
#include "varfuse/index.hpp"
#include "varfuse/metrics.hpp"
#include "varfuse/porter.hpp"
#include "varfuse/querygen.hpp"
#include "varfuse/retrieval.hpp"
#include "varfuse/rng.hpp"
#include "varfuse/synthfixture.hpp"
#include "varfuse/trecio.hpp"
