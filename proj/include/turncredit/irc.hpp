#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "turncredit/advantage.hpp"
#include "turncredit/diagnostics.hpp"
#include "turncredit/errors.hpp"
#include "turncredit/rollout.hpp"
#include "turncredit/tiers.hpp"

namespace turncredit {

// Iterative reward calibration: set each tier's reward proportional to its
// discriminative power, zero the non-discriminative tiers, then verify that
// the resulting advantages point the way the rewards intend.
struct IrcConfig {
    double delta = 0.05;  // |rho| threshold below which a tier's reward is zeroed
    double eta = 0.4;     // required reward-outcome correlation for convergence
    std::size_t max_iterations = 10;
    EstimatorConfig estimator;  // alignment is checked under this estimator
    ToolRegistry registry = default_registry();
    // Tiers with a fixed reward, exempt from rescaling. gold_exact anchors
    // the scale at 1.0 by default.
    PerTier<std::optional<double>> pinned{};

    IrcConfig() { tier_slot(pinned, Tier::gold_exact) = 1.0; }
};

struct IrcIteration {
    std::size_t index = 0;
    std::optional<TierStats> stats;
    std::optional<RewardTable> proposed;
    std::optional<AlignmentReport> alignment;
    Correlation reward_outcome_corr;
    bool converged = false;
    std::optional<std::string> error;  // calibration failed on this buffer
};

using IrcTrace = std::vector<IrcIteration>;

struct IrcResult {
    std::optional<RewardTable> table;  // last successfully proposed table
    IrcTrace trace;
    bool converged = false;
};

// ---------------------------------------------------------------------------

// r_c = alpha * rho_c when |rho_c| > delta, else 0, with alpha = 1/|rho_gold|
// so the anchor tier rescales to magnitude 1 (and is then pinned to exactly
// its configured value). Values clamp to [-1, 1]. soft_match keeps its
// score-passthrough band unless its correlation falls below threshold, in
// which case the band is zeroed.
inline RewardTable propose_rewards(const TierStats& stats, const IrcConfig& config) {
    if (!stats.has_both_outcomes)
        throw CalibrationError("buffer has a single outcome class; cannot calibrate");
    const TierRow& gold = tier_slot(stats.rows, Tier::gold_exact);
    if (gold.rho_zero_variance || gold.rho == 0.0)
        throw CalibrationError("anchor tier gold_exact has zero-variance correlation; "
                               "buffer cannot anchor the reward scale");
    const double alpha = 1.0 / std::abs(gold.rho);

    RewardTable table = sparse_table();
    for (Tier t : all_tiers()) {
        const TierRow& row = tier_slot(stats.rows, t);
        double value = 0.0;
        if (const auto& pin = tier_slot(config.pinned, t)) {
            value = *pin;
        } else if (!row.rho_zero_variance && std::abs(row.rho) > config.delta) {
            value = std::clamp(alpha * row.rho, -1.0, 1.0);
        }
        switch (t) {
            case Tier::gold_exact: table.gold_exact = value; break;
            case Tier::soft_match:
                // on/off gate only: keep the passthrough band or zero it
                if (tier_slot(config.pinned, t)) {
                    table.soft_match = value;
                } else if (!row.rho_zero_variance && std::abs(row.rho) > config.delta) {
                    table.soft_match = std::nullopt;
                } else {
                    table.soft_match = 0.0;
                }
                break;
            case Tier::read_only: table.read_only = value; break;
            case Tier::state_change: table.state_change = value; break;
            case Tier::message_only: table.message_only = value; break;
            case Tier::error: table.error = value; break;
            case Tier::duplicate: table.duplicate = value; break;
        }
    }
    return table;
}

// Alignment under a candidate table: classify the buffer, compute advantages
// with the configured estimator, and compare each tier's mean total
// advantage against the sign of its proposed reward.
inline AlignmentReport check_alignment(const RolloutBuffer& buffer, const RewardTable& table,
                                       const IrcConfig& config) {
    std::vector<RolloutGroup> groups = group_rollouts(buffer);
    std::vector<std::vector<std::vector<TurnRewards>>> rewards;
    rewards.reserve(groups.size());
    for (const RolloutGroup& g : groups) {
        std::vector<std::vector<TurnRewards>> group_rewards;
        group_rewards.reserve(g.size());
        for (const Rollout& r : g.rollouts)
            group_rewards.push_back(assign_rewards(r, table, config.registry));
        rewards.push_back(std::move(group_rewards));
    }
    return alignment_report(groups, rewards, config.estimator, intended_from_table(table));
}

namespace detail {

// Convergence also requires Corr(mean per-turn reward, outcome) > eta,
// reading the loop's exit condition over per-rollout mean rewards.
inline Correlation reward_outcome_correlation(const RolloutBuffer& buffer,
                                              const RewardTable& table,
                                              const ToolRegistry& registry) {
    std::vector<double> mean_rewards;
    std::vector<double> outcomes;
    mean_rewards.reserve(buffer.size());
    for (const Rollout& r : buffer) {
        const std::vector<TurnRewards> rewards = assign_rewards(r, table, registry);
        double sum = 0.0;
        for (const TurnRewards& tr : rewards) sum += tr.reward;
        mean_rewards.push_back(rewards.empty() ? 0.0 : sum / static_cast<double>(rewards.size()));
        outcomes.push_back(static_cast<double>(r.outcome));
    }
    if (mean_rewards.size() < 2) return Correlation{0.0, true};
    return pearson(mean_rewards, outcomes);
}

}  // namespace detail

// The full loop: collect a buffer, classify, propose rewards from the
// discriminative statistics, check alignment, repeat until no mismatches and
// the reward-outcome correlation clears eta, or max_iterations runs out.
// A buffer that cannot be calibrated (single outcome class, dead anchor)
// records the error in the trace and the loop continues with the next one.
inline IrcResult calibrate(const std::function<RolloutBuffer(std::size_t)>& buffer_source,
                           const IrcConfig& config) {
    if (config.max_iterations < 1) throw ArgumentError("calibrate: max_iterations must be >= 1");
    IrcResult result;
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        IrcIteration entry;
        entry.index = iter;
        try {
            RolloutBuffer buffer = buffer_source(iter);
            std::vector<std::vector<Tier>> tiers;
            tiers.reserve(buffer.size());
            for (const Rollout& r : buffer) tiers.push_back(classify_rollout(r, config.registry));
            entry.stats = discriminative_table(buffer, tiers);
            RewardTable proposed = propose_rewards(*entry.stats, config);
            entry.proposed = proposed;
            entry.alignment = check_alignment(buffer, proposed, config);
            entry.reward_outcome_corr =
                detail::reward_outcome_correlation(buffer, proposed, config.registry);
            entry.converged = entry.alignment->mismatch_count == 0 &&
                              !entry.reward_outcome_corr.zero_variance &&
                              entry.reward_outcome_corr.value > config.eta;
            result.table = proposed;
        } catch (const Error& e) {
            entry.error = e.what();
        }
        const bool done = entry.converged;
        result.trace.push_back(std::move(entry));
        if (done) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace turncredit
