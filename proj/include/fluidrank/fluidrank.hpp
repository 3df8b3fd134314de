#pragma once

#include "fluidrank/asyncsim.hpp"
#include "fluidrank/baseline.hpp"
#include "fluidrank/engine.hpp"
#include "fluidrank/gen.hpp"
#include "fluidrank/graph.hpp"
#include "fluidrank/sched.hpp"
#include "fluidrank/trace.hpp"
#include "fluidrank/update.hpp"
