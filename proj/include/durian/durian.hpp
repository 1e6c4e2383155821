#pragma once

#include "durian/advantage.hpp"
#include "durian/analyze.hpp"
#include "durian/config.hpp"
#include "durian/difficulty.hpp"
#include "durian/error.hpp"
#include "durian/feature_io.hpp"
#include "durian/linalg.hpp"
#include "durian/objective.hpp"
#include "durian/response.hpp"
#include "durian/reward.hpp"
#include "durian/sim/experiment.hpp"
#include "durian/sim/extreme_stats.hpp"
#include "durian/sim/policy.hpp"
#include "durian/sim/task.hpp"
#include "durian/sim/trainer.hpp"
