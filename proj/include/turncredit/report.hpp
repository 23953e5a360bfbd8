#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "turncredit/advantage.hpp"
#include "turncredit/diagnostics.hpp"
#include "turncredit/irc.hpp"
#include "turncredit/rollout.hpp"
#include "turncredit/tiers.hpp"

namespace turncredit {

// ---------------------------------------------------------------------------
// Classified view of a buffer: grouping plus per-turn tiers and rewards.

struct ClassifiedBuffer {
    std::vector<RolloutGroup> groups;
    std::vector<std::vector<std::vector<TurnRewards>>> rewards;  // [group][rollout][turn]
    std::vector<std::vector<Tier>> tiers_per_rollout;            // buffer order
};

inline ClassifiedBuffer classify_buffer(const RolloutBuffer& buffer, const RewardTable& table,
                                        const ToolRegistry& registry) {
    ClassifiedBuffer out;
    out.tiers_per_rollout.reserve(buffer.size());
    for (const Rollout& r : buffer) {
        std::vector<TurnRewards> rewards = assign_rewards(r, table, registry);
        std::vector<Tier> tiers;
        tiers.reserve(rewards.size());
        for (const TurnRewards& tr : rewards) tiers.push_back(tr.tier);
        out.tiers_per_rollout.push_back(std::move(tiers));
    }
    out.groups = group_rollouts(buffer);
    out.rewards.reserve(out.groups.size());
    for (const RolloutGroup& g : out.groups) {
        std::vector<std::vector<TurnRewards>> group_rewards;
        group_rewards.reserve(g.size());
        for (const Rollout& r : g.rollouts)
            group_rewards.push_back(assign_rewards(r, table, registry));
        out.rewards.push_back(std::move(group_rewards));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full diagnostic report

struct DiagnosticReport {
    std::size_t rollouts = 0;
    std::size_t groups = 0;
    std::size_t usable_groups = 0;
    std::size_t passing = 0;
    std::size_t failing = 0;
    bool single_outcome_class = false;
    EstimatorConfig config;
    TierStats tier_stats;
    AlignmentReport alignment;
    EstimatorComparison comparison;
    GradientAllocation allocation;
};

// Runs every diagnostic over one buffer under one reward table. The
// estimator comparison always covers the four estimators with the active
// gamma/lambda/epsilon so reports are directly comparable.
inline DiagnosticReport run_diagnostics(const RolloutBuffer& buffer, const RewardTable& table,
                                        const ToolRegistry& registry,
                                        const EstimatorConfig& config) {
    if (buffer.empty()) throw ArgumentError("diagnose: empty buffer");
    const ClassifiedBuffer classified = classify_buffer(buffer, table, registry);
    const IntendedSignMap intended = intended_from_table(table);

    DiagnosticReport report;
    report.config = config;
    report.rollouts = buffer.size();
    report.groups = classified.groups.size();
    for (const RolloutGroup& g : classified.groups)
        report.usable_groups += g.usable_for_normalization() ? 1 : 0;
    report.tier_stats = discriminative_table(buffer, classified.tiers_per_rollout);
    report.passing = report.tier_stats.passing;
    report.failing = report.tier_stats.failing;
    report.single_outcome_class = !report.tier_stats.has_both_outcomes;
    report.alignment = alignment_report(classified.groups, classified.rewards, config, intended);

    std::vector<EstimatorConfig> configs;
    for (EstimatorKind kind :
         {EstimatorKind::grpo, EstimatorKind::mt_grpo, EstimatorKind::gtpo, EstimatorKind::hybrid}) {
        EstimatorConfig c = config;
        c.kind = kind;
        configs.push_back(c);
    }
    report.comparison = compare_estimators(classified.groups, classified.rewards, configs, intended);
    report.allocation = gradient_allocation(classified.groups, classified.rewards, config);
    return report;
}

// ---------------------------------------------------------------------------
// Text rendering (aligned columns, one section per analysis)

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace detail

inline std::string render_text(const DiagnosticReport& r) {
    std::ostringstream out;
    out << "buffer: " << r.rollouts << " rollouts, " << r.groups << " groups ("
        << r.usable_groups << " usable), " << r.passing << " pass / " << r.failing << " fail\n";
    if (r.single_outcome_class)
        out << "warning: single outcome class; gaps and correlations are not meaningful\n";
    out << "estimator: " << estimator_name(r.config.kind)
        << " gamma=" << detail::fmt("%.3g", r.config.gamma)
        << " lambda=" << detail::fmt("%.3g", r.config.lambda)
        << " epsilon=" << detail::fmt("%.3g", r.config.epsilon) << "\n\n";

    out << "discriminative power by tier\n";
    out << "  tier          pass%   fail%     gap      rho\n";
    for (Tier t : all_tiers()) {
        const TierRow& row = tier_slot(r.tier_stats.rows, t);
        if (!row.present) continue;
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %6.1f  %6.1f  %+6.1f  %+7.3f%s",
                      tier_name(t), row.pass_pct, row.fail_pct, row.gap, row.rho,
                      row.rho_zero_variance ? " (zero variance)" : "");
        out << "  " << line << "\n";
    }

    out << "\nadvantage direction (" << estimator_name(r.config.kind) << ")\n";
    out << "  tier          mean A_turn  mean total  intended  verdict\n";
    for (Tier t : all_tiers()) {
        const TierAlignment& ta = tier_slot(r.alignment.tiers, t);
        char line[160];
        if (!ta.has_data) {
            std::snprintf(line, sizeof(line), "%-12s %11s %11s  %8s  no data", tier_name(t), "-",
                          "-", intended_sign_name(ta.intended));
        } else {
            std::snprintf(line, sizeof(line), "%-12s %+11.3f %+11.3f  %8s  %s", tier_name(t),
                          ta.mean_component, ta.mean_total, intended_sign_name(ta.intended),
                          ta.mismatch ? "MISMATCH" : (ta.aligned ? "aligned" : "off-zero"));
        }
        out << "  " << line << "\n";
    }
    out << "  mismatches: " << r.alignment.mismatch_count << "\n";

    out << "\nestimator comparison\n";
    out << "  method    mismatches  corr(adv,out)   dead%\n";
    for (const EstimatorRow& row : r.comparison) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-8s  %10zu  %+12.3f%s  %5.1f",
                      estimator_name(row.config.kind), row.mismatches,
                      row.advantage_outcome_corr.value,
                      row.advantage_outcome_corr.zero_variance ? "*" : " ",
                      100.0 * row.dead_fraction);
        out << "  " << line << "\n";
    }
    out << "  (* zero-variance correlation)\n";

    out << "\ngradient allocation (" << estimator_name(r.config.kind) << ")\n";
    if (r.allocation.shares_valid) {
        out << "  gold+soft   " << detail::fmt("%5.1f", 100.0 * r.allocation.gold_soft_share)
            << "%\n";
        out << "  read+state  " << detail::fmt("%5.1f", 100.0 * r.allocation.read_state_share)
            << "%\n";
        out << "  other       " << detail::fmt("%5.1f", 100.0 * r.allocation.other_share)
            << "%\n";
    } else {
        out << "  all turns dead; shares undefined\n";
    }
    out << "  dead turns  " << detail::fmt("%5.1f", 100.0 * r.allocation.dead_fraction) << "%\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// JSON serialization

inline ArgValue tier_stats_to_json(const TierStats& stats) {
    ArgValue tiers = ArgValue::object();
    for (Tier t : all_tiers()) {
        const TierRow& row = tier_slot(stats.rows, t);
        tiers[tier_name(t)] = {{"present", row.present},
                               {"pass_pct", row.pass_pct},
                               {"fail_pct", row.fail_pct},
                               {"gap", row.gap},
                               {"rho", row.rho},
                               {"rho_zero_variance", row.rho_zero_variance}};
    }
    return ArgValue{{"passing", stats.passing},
                    {"failing", stats.failing},
                    {"has_both_outcomes", stats.has_both_outcomes},
                    {"tiers", tiers}};
}

inline ArgValue alignment_to_json(const AlignmentReport& report) {
    ArgValue tiers = ArgValue::object();
    for (Tier t : all_tiers()) {
        const TierAlignment& ta = tier_slot(report.tiers, t);
        ArgValue row = {{"intended", intended_sign_name(ta.intended)},
                        {"has_data", ta.has_data}};
        if (ta.has_data) {
            row["turns"] = ta.turn_count;
            row["mean_turn_component"] = ta.mean_component;
            row["mean_total"] = ta.mean_total;
            row["aligned"] = ta.aligned;
            row["mismatch"] = ta.mismatch;
        }
        tiers[tier_name(t)] = std::move(row);
    }
    return ArgValue{{"mismatch_count", report.mismatch_count},
                    {"groups_used", report.groups_used},
                    {"groups_skipped", report.groups_skipped},
                    {"tiers", tiers}};
}

inline ArgValue estimator_config_to_json(const EstimatorConfig& c) {
    return ArgValue{{"kind", estimator_name(c.kind)},
                    {"gamma", c.gamma},
                    {"lambda", c.lambda},
                    {"epsilon", c.epsilon},
                    {"dead_tol", c.dead_tol}};
}

inline ArgValue comparison_to_json(const EstimatorComparison& rows) {
    ArgValue out = ArgValue::array();
    for (const EstimatorRow& row : rows)
        out.push_back({{"estimator", estimator_name(row.config.kind)},
                       {"config", estimator_config_to_json(row.config)},
                       {"mismatches", row.mismatches},
                       {"corr_advantage_outcome", row.advantage_outcome_corr.value},
                       {"corr_zero_variance", row.advantage_outcome_corr.zero_variance},
                       {"dead_fraction", row.dead_fraction}});
    return out;
}

inline ArgValue allocation_to_json(const GradientAllocation& a) {
    return ArgValue{{"shares_valid", a.shares_valid},
                    {"gold_soft_share", a.gold_soft_share},
                    {"read_state_share", a.read_state_share},
                    {"other_share", a.other_share},
                    {"dead_fraction", a.dead_fraction}};
}

inline ArgValue report_to_json(const DiagnosticReport& r) {
    ArgValue j = ArgValue::object();
    j["buffer"] = {{"rollouts", r.rollouts},
                   {"groups", r.groups},
                   {"usable_groups", r.usable_groups},
                   {"passing", r.passing},
                   {"failing", r.failing},
                   {"single_outcome_class", r.single_outcome_class}};
    j["estimator"] = estimator_config_to_json(r.config);
    j["discriminative"] = tier_stats_to_json(r.tier_stats);
    j["alignment"] = alignment_to_json(r.alignment);
    j["estimator_comparison"] = comparison_to_json(r.comparison);
    j["gradient_allocation"] = allocation_to_json(r.allocation);
    return j;
}

inline ArgValue irc_trace_to_json(const IrcResult& result) {
    ArgValue iterations = ArgValue::array();
    for (const IrcIteration& it : result.trace) {
        ArgValue j = ArgValue::object();
        j["iteration"] = it.index;
        j["converged"] = it.converged;
        if (it.error) {
            j["error"] = *it.error;
        } else {
            if (it.stats) j["discriminative"] = tier_stats_to_json(*it.stats);
            if (it.proposed) j["proposed_table"] = reward_table_to_json(*it.proposed);
            if (it.alignment) j["alignment"] = alignment_to_json(*it.alignment);
            j["reward_outcome_corr"] = it.reward_outcome_corr.value;
            j["reward_outcome_corr_zero_variance"] = it.reward_outcome_corr.zero_variance;
        }
        iterations.push_back(std::move(j));
    }
    ArgValue j = ArgValue::object();
    j["converged"] = result.converged;
    j["iterations"] = std::move(iterations);
    if (result.table) j["final_table"] = reward_table_to_json(*result.table);
    return j;
}

}  // namespace turncredit
