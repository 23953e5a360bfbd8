#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "turncredit/advantage.hpp"
#include "turncredit/errors.hpp"
#include "turncredit/rollout.hpp"
#include "turncredit/tiers.hpp"

namespace turncredit {

// ---------------------------------------------------------------------------
// Correlation

struct Correlation {
    double value = 0.0;
    bool zero_variance = false;
};

inline Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ArgumentError("pearson: input lengths differ");
    if (x.size() < 2) throw ArgumentError("pearson: need at least 2 observations");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx == 0.0 || vy == 0.0) return Correlation{0.0, true};
    return Correlation{cov / std::sqrt(vx * vy), false};
}

// Correlation between a binary presence indicator and the binary outcome.
// For binary vectors the point-biserial coefficient is plain Pearson.
inline Correlation point_biserial(const std::vector<int>& presence,
                                  const std::vector<int>& outcomes) {
    std::vector<double> x(presence.begin(), presence.end());
    std::vector<double> y(outcomes.begin(), outcomes.end());
    return pearson(x, y);
}

// ---------------------------------------------------------------------------
// Discriminative tier statistics

struct TierRow {
    std::size_t pass_count = 0;  // passing rollouts containing >= 1 turn of the tier
    std::size_t fail_count = 0;
    double pass_pct = 0.0;
    double fail_pct = 0.0;
    double gap = 0.0;  // pass_pct - fail_pct, percentage points
    double rho = 0.0;  // point-biserial vs outcome
    bool rho_zero_variance = false;
    bool present = false;  // tier occurs anywhere in the buffer
};

struct TierStats {
    PerTier<TierRow> rows{};
    std::size_t passing = 0;
    std::size_t failing = 0;
    // Gaps are only meaningful with both outcome classes present.
    bool has_both_outcomes = false;
};

// Per-rollout presence rates of each tier, split by outcome. Presence is
// binary per rollout (>= 1 turn of the tier), not a turn count.
inline TierStats discriminative_table(const RolloutBuffer& buffer,
                                      const std::vector<std::vector<Tier>>& tiers_per_rollout) {
    if (buffer.empty()) throw ArgumentError("discriminative_table: empty buffer");
    if (tiers_per_rollout.size() != buffer.size())
        throw ArgumentError("discriminative_table: tiers/buffer size mismatch");

    TierStats stats;
    std::vector<int> outcomes;
    outcomes.reserve(buffer.size());
    PerTier<std::vector<int>> presence{};
    for (auto& p : presence) p.reserve(buffer.size());

    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const bool passed = buffer[i].outcome == 1;
        (passed ? stats.passing : stats.failing) += 1;
        outcomes.push_back(passed ? 1 : 0);
        PerTier<bool> seen{};
        for (Tier t : tiers_per_rollout[i]) tier_slot(seen, t) = true;
        for (Tier t : all_tiers()) {
            tier_slot(presence, t).push_back(tier_slot(seen, t) ? 1 : 0);
            if (tier_slot(seen, t)) {
                TierRow& row = tier_slot(stats.rows, t);
                row.present = true;
                (passed ? row.pass_count : row.fail_count) += 1;
            }
        }
    }
    stats.has_both_outcomes = stats.passing > 0 && stats.failing > 0;
    for (Tier t : all_tiers()) {
        TierRow& row = tier_slot(stats.rows, t);
        row.pass_pct = stats.passing ? 100.0 * static_cast<double>(row.pass_count) /
                                           static_cast<double>(stats.passing)
                                     : 0.0;
        row.fail_pct = stats.failing ? 100.0 * static_cast<double>(row.fail_count) /
                                           static_cast<double>(stats.failing)
                                     : 0.0;
        row.gap = row.pass_pct - row.fail_pct;
        if (buffer.size() >= 2) {
            Correlation c = point_biserial(tier_slot(presence, t), outcomes);
            row.rho = c.value;
            row.rho_zero_variance = c.zero_variance;
        } else {
            row.rho_zero_variance = true;
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Advantage direction alignment

enum class IntendedSign { positive, negative, zero };

inline const char* intended_sign_name(IntendedSign s) {
    switch (s) {
        case IntendedSign::positive: return "+";
        case IntendedSign::negative: return "-";
        case IntendedSign::zero: return "0";
    }
    return "?";
}

using IntendedSignMap = PerTier<IntendedSign>;

inline IntendedSign sign_of(double v) {
    if (v > 0.0) return IntendedSign::positive;
    if (v < 0.0) return IntendedSign::negative;
    return IntendedSign::zero;
}

// Intended direction of each tier = sign of its configured reward. A
// passthrough soft band is positive. With the calibrated default table this
// yields: gold +, soft +, error -, duplicate -, state -, read 0, message 0.
inline IntendedSignMap intended_from_table(const RewardTable& table) {
    IntendedSignMap m{};
    tier_slot(m, Tier::gold_exact) = sign_of(table.gold_exact);
    tier_slot(m, Tier::soft_match) =
        table.soft_is_passthrough() ? IntendedSign::positive : sign_of(*table.soft_match);
    tier_slot(m, Tier::read_only) = sign_of(table.read_only);
    tier_slot(m, Tier::state_change) = sign_of(table.state_change);
    tier_slot(m, Tier::message_only) = sign_of(table.message_only);
    tier_slot(m, Tier::error) = sign_of(table.error);
    tier_slot(m, Tier::duplicate) = sign_of(table.duplicate);
    return m;
}

struct TierAlignment {
    bool has_data = false;
    std::size_t turn_count = 0;
    double mean_component = 0.0;  // position-local advantage term
    double mean_total = 0.0;      // component + (dampened) outcome advantage
    IntendedSign intended = IntendedSign::zero;
    bool aligned = true;
    bool mismatch = false;
};

struct AlignmentReport {
    PerTier<TierAlignment> tiers{};
    std::size_t mismatch_count = 0;
    std::size_t groups_used = 0;
    std::size_t groups_skipped = 0;  // N < 2
};

namespace detail {

// The alignment check evaluates each turn's own credit, not the cumulative
// tail sum: component + outcome term, where the outcome dampening follows
// the estimator (1 for mt_grpo, lambda for hybrid, 0 for gtpo; grpo has no
// component, its total is the outcome advantage itself).
inline double outcome_weight(const EstimatorConfig& config) {
    switch (config.kind) {
        case EstimatorKind::grpo: return 1.0;
        case EstimatorKind::mt_grpo: return 1.0;
        case EstimatorKind::gtpo: return 0.0;
        case EstimatorKind::hybrid: return config.lambda;
    }
    return 1.0;
}

}  // namespace detail

// Conditional mean advantage per tier with a direction verdict. Tiers whose
// intended sign is zero are vacuously aligned-or-not but never mismatches;
// tiers absent from the buffer report no data.
inline AlignmentReport alignment_report(const std::vector<RolloutGroup>& groups,
                                        const std::vector<std::vector<std::vector<TurnRewards>>>& rewards,
                                        const EstimatorConfig& config,
                                        const IntendedSignMap& intended) {
    if (groups.size() != rewards.size())
        throw ArgumentError("alignment_report: groups/rewards size mismatch");
    AlignmentReport report;
    PerTier<double> component_sum{};
    PerTier<double> total_sum{};
    PerTier<std::size_t> counts{};
    const double w = detail::outcome_weight(config);

    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!groups[g].usable_for_normalization()) {
            ++report.groups_skipped;
            continue;
        }
        ++report.groups_used;
        AdvantageTensor tensor = compute_advantages(groups[g], rewards[g], config);
        for (std::size_t i = 0; i < groups[g].size(); ++i) {
            for (std::size_t k = 0; k < rewards[g][i].size(); ++k) {
                const Tier tier = rewards[g][i][k].tier;
                const double component =
                    tensor.has_turn_component() ? tensor.turn_component[i][k] : 0.0;
                tier_slot(component_sum, tier) += component;
                tier_slot(total_sum, tier) += component + w * tensor.outcome_advantage[i];
                tier_slot(counts, tier) += 1;
            }
        }
    }

    for (Tier t : all_tiers()) {
        TierAlignment& ta = tier_slot(report.tiers, t);
        ta.intended = tier_slot(intended, t);
        const std::size_t n = tier_slot(counts, t);
        ta.turn_count = n;
        if (n == 0) continue;  // no data: not a mismatch
        ta.has_data = true;
        ta.mean_component = tier_slot(component_sum, t) / static_cast<double>(n);
        ta.mean_total = tier_slot(total_sum, t) / static_cast<double>(n);
        const IntendedSign observed = std::abs(ta.mean_total) <= config.dead_tol
                                          ? IntendedSign::zero
                                          : sign_of(ta.mean_total);
        if (ta.intended == IntendedSign::zero) {
            ta.aligned = observed == IntendedSign::zero;
            ta.mismatch = false;
        } else {
            ta.aligned = observed == ta.intended;
            ta.mismatch = !ta.aligned;
        }
        if (ta.mismatch) ++report.mismatch_count;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Estimator comparison

struct EstimatorRow {
    EstimatorConfig config;
    std::size_t mismatches = 0;
    Correlation advantage_outcome_corr;  // per-turn advantage vs rollout outcome
    double dead_fraction = 0.0;
};

using EstimatorComparison = std::vector<EstimatorRow>;

inline EstimatorComparison compare_estimators(
    const std::vector<RolloutGroup>& groups,
    const std::vector<std::vector<std::vector<TurnRewards>>>& rewards,
    const std::vector<EstimatorConfig>& configs, const IntendedSignMap& intended) {
    EstimatorComparison rows;
    for (const EstimatorConfig& config : configs) {
        EstimatorRow row;
        row.config = config;
        row.mismatches = alignment_report(groups, rewards, config, intended).mismatch_count;

        std::vector<double> adv;
        std::vector<double> out;
        std::size_t dead = 0;
        std::size_t total = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (!groups[g].usable_for_normalization()) continue;
            AdvantageTensor tensor = compute_advantages(groups[g], rewards[g], config);
            DeadTurnMask mask = dead_turn_mask(tensor, config.dead_tol);
            for (std::size_t i = 0; i < groups[g].size(); ++i) {
                for (std::size_t k = 0; k < tensor.advantage[i].size(); ++k) {
                    adv.push_back(tensor.advantage[i][k]);
                    out.push_back(static_cast<double>(groups[g].rollouts[i].outcome));
                    dead += mask.dead[i][k] ? 1 : 0;
                    ++total;
                }
            }
        }
        row.dead_fraction = total ? static_cast<double>(dead) / static_cast<double>(total) : 0.0;
        row.advantage_outcome_corr =
            adv.size() >= 2 ? pearson(adv, out) : Correlation{0.0, true};
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Gradient allocation

// Per-turn |advantage| is the proxy for gradient mass: it is the scaling
// factor the policy-gradient term would receive at that turn.
struct GradientAllocation {
    double gold_soft_share = 0.0;
    double read_state_share = 0.0;
    double other_share = 0.0;  // message, error, duplicate
    bool shares_valid = false;  // false when every turn is dead
    double dead_fraction = 0.0;
};

inline GradientAllocation gradient_allocation_from(
    const std::vector<AdvantageTensor>& tensors,
    const std::vector<std::vector<std::vector<Tier>>>& tiers, double dead_tol) {
    if (tensors.size() != tiers.size())
        throw ArgumentError("gradient_allocation: tensors/tiers size mismatch");
    GradientAllocation alloc;
    double gold_soft = 0.0, read_state = 0.0, other = 0.0;
    std::size_t dead = 0, total = 0;
    for (std::size_t g = 0; g < tensors.size(); ++g) {
        for (std::size_t i = 0; i < tensors[g].advantage.size(); ++i) {
            for (std::size_t k = 0; k < tensors[g].advantage[i].size(); ++k) {
                const double mass = std::abs(tensors[g].advantage[i][k]);
                ++total;
                if (mass <= dead_tol) {
                    ++dead;
                    continue;
                }
                switch (tiers[g][i][k]) {
                    case Tier::gold_exact:
                    case Tier::soft_match: gold_soft += mass; break;
                    case Tier::read_only:
                    case Tier::state_change: read_state += mass; break;
                    default: other += mass; break;
                }
            }
        }
    }
    alloc.dead_fraction = total ? static_cast<double>(dead) / static_cast<double>(total) : 0.0;
    const double live = gold_soft + read_state + other;
    if (live > 0.0) {
        alloc.shares_valid = true;
        alloc.gold_soft_share = gold_soft / live;
        alloc.read_state_share = read_state / live;
        alloc.other_share = other / live;
    }
    return alloc;
}

inline GradientAllocation gradient_allocation(
    const std::vector<RolloutGroup>& groups,
    const std::vector<std::vector<std::vector<TurnRewards>>>& rewards,
    const EstimatorConfig& config) {
    std::vector<AdvantageTensor> tensors;
    std::vector<std::vector<std::vector<Tier>>> tiers;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!groups[g].usable_for_normalization()) continue;
        tensors.push_back(compute_advantages(groups[g], rewards[g], config));
        std::vector<std::vector<Tier>> group_tiers;
        for (const auto& rollout_rewards : rewards[g]) {
            std::vector<Tier> row;
            row.reserve(rollout_rewards.size());
            for (const TurnRewards& tr : rollout_rewards) row.push_back(tr.tier);
            group_tiers.push_back(std::move(row));
        }
        tiers.push_back(std::move(group_tiers));
    }
    return gradient_allocation_from(tensors, tiers, config.dead_tol);
}

}  // namespace turncredit
