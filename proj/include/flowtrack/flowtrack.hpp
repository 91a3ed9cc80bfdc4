#pragma once

#include "flowtrack/cost_model.hpp"
#include "flowtrack/detection.hpp"
#include "flowtrack/io.hpp"
#include "flowtrack/metrics.hpp"
#include "flowtrack/online_tracker.hpp"
#include "flowtrack/oracle.hpp"
#include "flowtrack/pipeline.hpp"
#include "flowtrack/residual_graph.hpp"
#include "flowtrack/ssp.hpp"
#include "flowtrack/synthetic.hpp"
#include "flowtrack/tracking_graph.hpp"
