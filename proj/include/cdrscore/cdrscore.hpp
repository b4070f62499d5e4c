#pragma once

// Umbrella header.
#include "cdrscore/calendar.hpp"
#include "cdrscore/call_graph.hpp"
#include "cdrscore/cdr_ingest.hpp"
#include "cdrscore/csv.hpp"
#include "cdrscore/error.hpp"
#include "cdrscore/featurize.hpp"
#include "cdrscore/models.hpp"
#include "cdrscore/netstats.hpp"
#include "cdrscore/parallel.hpp"
#include "cdrscore/pipeline.hpp"
#include "cdrscore/profit_eval.hpp"
#include "cdrscore/propagation.hpp"
#include "cdrscore/random.hpp"
#include "cdrscore/synth.hpp"
