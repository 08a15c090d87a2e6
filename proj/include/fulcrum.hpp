#pragma once

#include "fulcrum/errors.hpp"
#include "fulcrum/random.hpp"
#include "fulcrum/power_mode.hpp"
#include "fulcrum/workload.hpp"
#include "fulcrum/device_model.hpp"
#include "fulcrum/calibrate.hpp"
#include "fulcrum/profiler.hpp"
#include "fulcrum/interleave.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/pareto.hpp"
#include "fulcrum/strategy.hpp"
#include "fulcrum/surrogate.hpp"
#include "fulcrum/gmd.hpp"
#include "fulcrum/baselines.hpp"
#include "fulcrum/als.hpp"
#include "fulcrum/simulator.hpp"
#include "fulcrum/replay.hpp"
#include "fulcrum/harness.hpp"
