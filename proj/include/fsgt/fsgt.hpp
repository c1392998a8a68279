#pragma once

#include "fsgt/bridge.hpp"
#include "fsgt/cascade.hpp"
#include "fsgt/error.hpp"
#include "fsgt/json_codec.hpp"
#include "fsgt/null_suite.hpp"
#include "fsgt/pipeline.hpp"
#include "fsgt/probe_graph.hpp"
#include "fsgt/rng.hpp"
#include "fsgt/run_config.hpp"
#include "fsgt/scaling.hpp"
#include "fsgt/snapshot_store.hpp"
