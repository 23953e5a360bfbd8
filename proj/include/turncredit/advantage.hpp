#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "turncredit/errors.hpp"
#include "turncredit/rollout.hpp"
#include "turncredit/tiers.hpp"

namespace turncredit {

enum class EstimatorKind { grpo, mt_grpo, gtpo, hybrid };

inline const char* estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::grpo: return "grpo";
        case EstimatorKind::mt_grpo: return "mt_grpo";
        case EstimatorKind::gtpo: return "gtpo";
        case EstimatorKind::hybrid: return "hybrid";
    }
    return "?";
}

inline std::optional<EstimatorKind> estimator_from_name(const std::string& name) {
    if (name == "grpo") return EstimatorKind::grpo;
    if (name == "mt_grpo") return EstimatorKind::mt_grpo;
    if (name == "gtpo") return EstimatorKind::gtpo;
    if (name == "hybrid") return EstimatorKind::hybrid;
    return std::nullopt;
}

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::hybrid;
    double gamma = 0.9;     // discount on per-turn rewards and outcome
    double lambda = 0.3;    // dampening on the outcome advantage term
    double epsilon = 1e-4;  // normalization stabilizer
    double dead_tol = 1e-6; // |advantage| at or below this counts as dead
};

// Plain numeric view of one group: binary outcomes plus per-rollout,
// per-turn rewards. Decouples the estimators from the classification types.
struct GroupSignal {
    std::vector<double> outcomes;                   // size N
    std::vector<std::vector<double>> turn_rewards;  // [i][k], ragged
};

inline GroupSignal group_signal(const RolloutGroup& group,
                                const std::vector<std::vector<TurnRewards>>& rewards) {
    if (rewards.size() != group.size())
        throw EstimatorError("group \"" + group.group_id + "\": rewards/rollouts size mismatch");
    GroupSignal s;
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (rewards[i].size() != group.rollouts[i].turn_count())
            throw EstimatorError("group \"" + group.group_id + "\": reward turn count mismatch");
        s.outcomes.push_back(static_cast<double>(group.rollouts[i].outcome));
        std::vector<double> rs;
        rs.reserve(rewards[i].size());
        for (const TurnRewards& tr : rewards[i]) rs.push_back(tr.reward);
        s.turn_rewards.push_back(std::move(rs));
    }
    return s;
}

// Per-rollout, per-turn advantages. outcome_advantage is the group-normalized
// outcome; turn_component holds the position-local term where the estimator
// defines one (per-turn reward advantage for mt_grpo, normalized discounted
// return for gtpo/hybrid; empty for grpo).
struct AdvantageTensor {
    std::vector<std::vector<double>> advantage;       // [i][k]
    std::vector<double> outcome_advantage;            // [i]
    std::vector<std::vector<double>> turn_component;  // [i][k], may be empty

    bool has_turn_component() const { return !turn_component.empty(); }
    std::size_t total_turns() const {
        std::size_t n = 0;
        for (const auto& row : advantage) n += row.size();
        return n;
    }
};

// ---------------------------------------------------------------------------
// Group normalization: x -> (x - mean) / (population std + epsilon).
// A constant input has zero deviations, so the output is exactly zero
// regardless of epsilon.
inline std::vector<double> group_normalize(const std::vector<double>& values, double epsilon) {
    const std::size_t n = values.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd + epsilon == 0.0) return out;  // constant input, epsilon 0
    for (std::size_t i = 0; i < n; ++i) out[i] = (values[i] - mean) / (sd + epsilon);
    return out;
}

namespace detail {

// Normalizes some per-rollout value at every turn position across the
// rollouts that possess that position. Positions with fewer than two
// participants contribute zero. `value_at(i, k)` supplies rollout i's value
// at its own position k.
template <typename ValueAt>
inline std::vector<std::vector<double>> per_position_normalize(
    const std::vector<std::vector<double>>& shape_like, double epsilon, ValueAt&& value_at) {
    std::vector<std::vector<double>> out;
    out.reserve(shape_like.size());
    std::size_t max_k = 0;
    for (const auto& row : shape_like) {
        out.emplace_back(row.size(), 0.0);
        max_k = std::max(max_k, row.size());
    }
    std::vector<std::size_t> participants;
    std::vector<double> column;
    for (std::size_t k = 0; k < max_k; ++k) {
        participants.clear();
        column.clear();
        for (std::size_t i = 0; i < shape_like.size(); ++i) {
            if (k < shape_like[i].size()) {
                participants.push_back(i);
                column.push_back(value_at(i, k));
            }
        }
        if (participants.size() < 2) continue;  // zeros already in place
        std::vector<double> normalized = group_normalize(column, epsilon);
        for (std::size_t j = 0; j < participants.size(); ++j)
            out[participants[j]][k] = normalized[j];
    }
    return out;
}

inline void require_usable(const GroupSignal& signal) {
    if (signal.outcomes.size() < 2)
        throw EstimatorError("group has fewer than 2 rollouts; unusable for normalization");
    if (signal.turn_rewards.size() != signal.outcomes.size())
        throw EstimatorError("signal shape mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Estimators

// Outcome-only: one group-normalized outcome value broadcast to every turn
// of its rollout. No per-turn credit assignment.
inline AdvantageTensor grpo_advantages(const GroupSignal& signal, double epsilon) {
    detail::require_usable(signal);
    AdvantageTensor t;
    t.outcome_advantage = group_normalize(signal.outcomes, epsilon);
    for (std::size_t i = 0; i < signal.turn_rewards.size(); ++i)
        t.advantage.emplace_back(signal.turn_rewards[i].size(), t.outcome_advantage[i]);
    return t;
}

// Per-turn group normalization plus suffix sum plus outcome advantage:
//   A[i][k] = sum_{l>=k} AI[i][l] + AO[i]
// where AI[i][l] normalizes rewards at position l across the rollouts that
// reach position l.
inline AdvantageTensor mt_grpo_advantages(const GroupSignal& signal, double epsilon) {
    detail::require_usable(signal);
    AdvantageTensor t;
    t.outcome_advantage = group_normalize(signal.outcomes, epsilon);
    t.turn_component = detail::per_position_normalize(
        signal.turn_rewards, epsilon,
        [&](std::size_t i, std::size_t k) { return signal.turn_rewards[i][k]; });
    for (std::size_t i = 0; i < signal.turn_rewards.size(); ++i) {
        const std::size_t K = signal.turn_rewards[i].size();
        std::vector<double> row(K, 0.0);
        double suffix = 0.0;
        for (std::size_t k = K; k-- > 0;) {
            suffix += t.turn_component[i][k];
            row[k] = suffix + t.outcome_advantage[i];
        }
        t.advantage.push_back(std::move(row));
    }
    return t;
}

// Discounted return at each turn:
//   ret[k] = sum_{l>=k} gamma^(l-k) r[l] + gamma^(K-k) outcome
// computed by backward recursion (exact for gamma = 0 as well).
inline std::vector<double> discounted_return(const std::vector<double>& rewards, double outcome,
                                             double gamma) {
    std::vector<double> out(rewards.size(), 0.0);
    double tail = outcome;
    for (std::size_t k = rewards.size(); k-- > 0;) {
        tail = rewards[k] + gamma * tail;
        out[k] = tail;
    }
    return out;
}

// Normalized discounted returns plus a dampened outcome advantage:
//   A[i][k] = GN_k(ret) + lambda * AO[i]
// with the same fewer-than-two-participants rule as mt_grpo. lambda = 0 is
// pure gtpo.
inline AdvantageTensor hybrid_advantages(const GroupSignal& signal, double gamma, double lambda,
                                         double epsilon) {
    detail::require_usable(signal);
    AdvantageTensor t;
    t.outcome_advantage = group_normalize(signal.outcomes, epsilon);
    std::vector<std::vector<double>> returns;
    returns.reserve(signal.turn_rewards.size());
    for (std::size_t i = 0; i < signal.turn_rewards.size(); ++i)
        returns.push_back(discounted_return(signal.turn_rewards[i], signal.outcomes[i], gamma));
    t.turn_component = detail::per_position_normalize(
        returns, epsilon, [&](std::size_t i, std::size_t k) { return returns[i][k]; });
    for (std::size_t i = 0; i < returns.size(); ++i) {
        std::vector<double> row(returns[i].size(), 0.0);
        for (std::size_t k = 0; k < row.size(); ++k)
            row[k] = t.turn_component[i][k] + lambda * t.outcome_advantage[i];
        t.advantage.push_back(std::move(row));
    }
    return t;
}

inline AdvantageTensor compute_advantages(const GroupSignal& signal,
                                          const EstimatorConfig& config) {
    switch (config.kind) {
        case EstimatorKind::grpo: return grpo_advantages(signal, config.epsilon);
        case EstimatorKind::mt_grpo: return mt_grpo_advantages(signal, config.epsilon);
        case EstimatorKind::gtpo:
            return hybrid_advantages(signal, config.gamma, 0.0, config.epsilon);
        case EstimatorKind::hybrid:
            return hybrid_advantages(signal, config.gamma, config.lambda, config.epsilon);
    }
    throw EstimatorError("unknown estimator kind");
}

inline AdvantageTensor compute_advantages(const RolloutGroup& group,
                                          const std::vector<std::vector<TurnRewards>>& rewards,
                                          const EstimatorConfig& config) {
    return compute_advantages(group_signal(group, rewards), config);
}

// ---------------------------------------------------------------------------
// Dead turns

struct DeadTurnMask {
    std::vector<std::vector<bool>> dead;  // [i][k]
    double fraction = 0.0;                // dead turns / total turns
};

inline DeadTurnMask dead_turn_mask(const AdvantageTensor& tensor, double dead_tol) {
    DeadTurnMask m;
    std::size_t total = 0;
    std::size_t dead = 0;
    for (const auto& row : tensor.advantage) {
        std::vector<bool> mask_row;
        mask_row.reserve(row.size());
        for (double a : row) {
            const bool is_dead = std::abs(a) <= dead_tol;
            mask_row.push_back(is_dead);
            dead += is_dead ? 1 : 0;
        }
        total += row.size();
        m.dead.push_back(std::move(mask_row));
    }
    m.fraction = total == 0 ? 0.0 : static_cast<double>(dead) / static_cast<double>(total);
    return m;
}

// ---------------------------------------------------------------------------
// Export: one record per turn for trainer consumption.

inline void write_advantage_records(const RolloutGroup& group, const AdvantageTensor& tensor,
                                    std::ostream& out) {
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t k = 0; k < tensor.advantage[i].size(); ++k) {
            ArgValue j = ArgValue::object();
            j["rollout_id"] = group.rollouts[i].rollout_id;
            j["turn_index"] = k;
            j["advantage"] = tensor.advantage[i][k];
            j["a_outcome"] = tensor.outcome_advantage[i];
            if (tensor.has_turn_component()) j["a_turn_component"] = tensor.turn_component[i][k];
            out << j.dump() << '\n';
        }
    }
}

}  // namespace turncredit
