#pragma once

#include "gbandit/rng.hpp"
#include "gbandit/confidence.hpp"
#include "gbandit/problem.hpp"
#include "gbandit/agent.hpp"
#include "gbandit/gossip.hpp"
#include "gbandit/simulator.hpp"
#include "gbandit/experiment.hpp"
