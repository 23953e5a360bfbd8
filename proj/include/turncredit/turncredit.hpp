#pragma once

// Turn-level credit assignment analytics for multi-turn tool-calling agents:
// golden-action matching, reward-tier classification, group-relative
// advantage estimation, discriminative diagnostics, iterative reward
// calibration, and a deterministic toy environment for generating rollouts.

#include "turncredit/advantage.hpp"
#include "turncredit/arg_value.hpp"
#include "turncredit/argmatch.hpp"
#include "turncredit/diagnostics.hpp"
#include "turncredit/errors.hpp"
#include "turncredit/irc.hpp"
#include "turncredit/report.hpp"
#include "turncredit/rollout.hpp"
#include "turncredit/synthenv.hpp"
#include "turncredit/tiers.hpp"
