#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "turncredit/argmatch.hpp"
#include "turncredit/errors.hpp"
#include "turncredit/rollout.hpp"

namespace turncredit {

// The seven turn tiers. Order doubles as turn-level aggregation priority:
// when a turn carries several calls, the lowest-valued tier present wins.
enum class Tier : std::size_t {
    gold_exact = 0,
    soft_match = 1,
    error = 2,
    duplicate = 3,
    state_change = 4,
    read_only = 5,
    message_only = 6,
};

inline constexpr std::size_t kTierCount = 7;

inline constexpr std::array<Tier, kTierCount> all_tiers() {
    return {Tier::gold_exact, Tier::soft_match, Tier::error,     Tier::duplicate,
            Tier::state_change, Tier::read_only, Tier::message_only};
}

inline const char* tier_name(Tier t) {
    switch (t) {
        case Tier::gold_exact: return "gold_exact";
        case Tier::soft_match: return "soft_match";
        case Tier::error: return "error";
        case Tier::duplicate: return "duplicate";
        case Tier::state_change: return "state_change";
        case Tier::read_only: return "read_only";
        case Tier::message_only: return "message_only";
    }
    return "?";
}

inline std::optional<Tier> tier_from_name(const std::string& name) {
    for (Tier t : all_tiers())
        if (name == tier_name(t)) return t;
    return std::nullopt;
}

// Convenience for per-tier tables.
template <typename T>
using PerTier = std::array<T, kTierCount>;

template <typename T>
inline T& tier_slot(PerTier<T>& arr, Tier t) { return arr[static_cast<std::size_t>(t)]; }
template <typename T>
inline const T& tier_slot(const PerTier<T>& arr, Tier t) { return arr[static_cast<std::size_t>(t)]; }

// ---------------------------------------------------------------------------
// Tool registry

// Splits the tool namespace into read-only and state-changing tools.
// Entries may end in '*' to match a prefix (update_reservation_*).
// Every tool observed in a buffer must fall in exactly one set.
struct ToolRegistry {
    std::set<std::string> read_only;
    std::set<std::string> state_changing;

    static bool set_contains(const std::set<std::string>& s, const std::string& name) {
        if (s.count(name)) return true;
        for (const std::string& entry : s) {
            if (!entry.empty() && entry.back() == '*' &&
                name.compare(0, entry.size() - 1, entry, 0, entry.size() - 1) == 0)
                return true;
        }
        return false;
    }

    bool is_read_only(const std::string& name) const { return set_contains(read_only, name); }
    bool is_state_changing(const std::string& name) const {
        return set_contains(state_changing, name);
    }

    void check_disjoint() const {
        for (const std::string& name : read_only)
            if (set_contains(state_changing, name))
                throw ValidationError("registry: \"" + name + "\" is in both tool sets");
    }
};

// Airline-domain default registry.
inline ToolRegistry default_registry() {
    ToolRegistry reg;
    reg.read_only = {"get_user_details",   "get_reservation_details", "search_direct_flight",
                     "search_onestop_flight", "list_all_airports",    "calculate"};
    reg.state_changing = {"book_reservation", "cancel_reservation", "update_reservation_*",
                          "send_certificate", "transfer_to_human_agents"};
    return reg;
}

// ---------------------------------------------------------------------------
// Reward table

// Scalar reward per tier. soft_match is special: by default it passes the
// per-call match score (already in [0.5, 1)) through instead of using a
// constant; a zeroed band disables the tier entirely.
struct RewardTable {
    double gold_exact = 1.0;
    std::optional<double> soft_match;  // nullopt = score passthrough
    double read_only = 0.0;
    double state_change = 0.0;
    double message_only = 0.0;
    double error = 0.0;
    double duplicate = 0.0;

    bool soft_is_passthrough() const { return !soft_match.has_value(); }

    double value_for(Tier t, double soft_score = 0.0) const {
        switch (t) {
            case Tier::gold_exact: return gold_exact;
            case Tier::soft_match: return soft_match ? *soft_match : soft_score;
            case Tier::read_only: return read_only;
            case Tier::state_change: return state_change;
            case Tier::message_only: return message_only;
            case Tier::error: return error;
            case Tier::duplicate: return duplicate;
        }
        return 0.0;
    }

    void validate() const {
        auto check = [](double v, const char* name) {
            if (v < -1.0 || v > 1.0)
                throw ValidationError(std::string("reward table: ") + name +
                                      " outside [-1, 1]");
        };
        check(gold_exact, "gold_exact");
        if (soft_match) check(*soft_match, "soft_match");
        check(read_only, "read_only");
        check(state_change, "state_change");
        check(message_only, "message_only");
        check(error, "error");
        check(duplicate, "duplicate");
    }
};

// The hand-designed dense table: gold 1.0, soft passthrough, read 0.3,
// state 0.1, message 0.0, error -0.1, duplicate -0.2.
inline RewardTable naive_table() {
    RewardTable t;
    t.gold_exact = 1.0;
    t.soft_match = std::nullopt;
    t.read_only = 0.3;
    t.state_change = 0.1;
    t.message_only = 0.0;
    t.error = -0.1;
    t.duplicate = -0.2;
    return t;
}

// The calibrated table: read-only zeroed, state-change flipped negative.
inline RewardTable calibrated_table() {
    RewardTable t = naive_table();
    t.read_only = 0.0;
    t.state_change = -0.1;
    return t;
}

// All-zero rewards: outcome-only training signal.
inline RewardTable sparse_table() {
    RewardTable t;
    t.gold_exact = 0.0;
    t.soft_match = 0.0;
    t.read_only = 0.0;
    t.state_change = 0.0;
    t.message_only = 0.0;
    t.error = 0.0;
    t.duplicate = 0.0;
    return t;
}

inline std::pair<RewardTable, RewardTable> default_tables() {
    return {naive_table(), calibrated_table()};
}

// ---------------------------------------------------------------------------
// Configuration documents (flat JSON)

inline ArgValue reward_table_to_json(const RewardTable& t) {
    ArgValue j = ArgValue::object();
    j["gold_exact"] = t.gold_exact;
    if (t.soft_match)
        j["soft_match"] = *t.soft_match;
    else
        j["soft_match"] = "score-passthrough";
    j["read_only"] = t.read_only;
    j["state_change"] = t.state_change;
    j["message_only"] = t.message_only;
    j["error"] = t.error;
    j["duplicate"] = t.duplicate;
    return j;
}

inline RewardTable reward_table_from_json(const ArgValue& j) {
    if (!j.is_object()) throw ParseError("reward table document must be a JSON object");
    RewardTable t = sparse_table();
    for (const auto& [key, val] : j.items()) {
        auto tier = tier_from_name(key);
        if (!tier) throw ParseError("reward table: unknown tier \"" + key + "\"");
        if (*tier == Tier::soft_match && val.is_string()) {
            if (val.get<std::string>() != "score-passthrough")
                throw ParseError("reward table: soft_match must be a number or "
                                 "\"score-passthrough\"");
            t.soft_match = std::nullopt;
            continue;
        }
        if (!val.is_number()) throw ParseError("reward table: \"" + key + "\" must be a number");
        const double v = val.get<double>();
        switch (*tier) {
            case Tier::gold_exact: t.gold_exact = v; break;
            case Tier::soft_match: t.soft_match = v; break;
            case Tier::read_only: t.read_only = v; break;
            case Tier::state_change: t.state_change = v; break;
            case Tier::message_only: t.message_only = v; break;
            case Tier::error: t.error = v; break;
            case Tier::duplicate: t.duplicate = v; break;
        }
    }
    t.validate();
    return t;
}

inline ArgValue registry_to_json(const ToolRegistry& reg) {
    ArgValue j = ArgValue::object();
    j["read_only"] = reg.read_only;
    j["state_changing"] = reg.state_changing;
    return j;
}

inline ToolRegistry registry_from_json(const ArgValue& j) {
    if (!j.is_object()) throw ParseError("registry document must be a JSON object");
    ToolRegistry reg;
    if (auto it = j.find("read_only"); it != j.end())
        reg.read_only = it->get<std::set<std::string>>();
    if (auto it = j.find("state_changing"); it != j.end())
        reg.state_changing = it->get<std::set<std::string>>();
    reg.check_disjoint();
    return reg;
}

// ---------------------------------------------------------------------------
// Turn classification

// Normalized record of an earlier call, for duplicate detection.
struct SeenCall {
    std::string name;
    ArgValue normalized_args;
};

using TurnHistory = std::vector<SeenCall>;

namespace detail {

// Per-call tier, checked in priority order. The alignment decides gold/soft;
// the errored flag beats the duplicate check; repeats of an earlier call
// (same name, deep-equal normalized args) that are not exact golden matches
// count as duplicates; everything else falls to the registry split.
inline Tier classify_call(const ToolCall& call, bool errored, const MatchScore& match,
                          const TurnHistory& history, const ArgValue& normalized_args,
                          const ToolRegistry& registry) {
    if (match.is_exact()) return Tier::gold_exact;
    if (match.is_soft()) return Tier::soft_match;
    if (errored) return Tier::error;
    for (const SeenCall& seen : history) {
        if (seen.name == call.name && equal_normalized(seen.normalized_args, normalized_args))
            return Tier::duplicate;
    }
    if (registry.is_read_only(call.name)) return Tier::read_only;
    if (registry.is_state_changing(call.name)) return Tier::state_change;
    throw ClassificationError("tool \"" + call.name + "\" not in registry");
}

}  // namespace detail

// Classifies one turn given the alignment row for its calls and the rollout
// history so far. Appends this turn's calls to the history.
inline Tier classify_turn(const Turn& turn, const std::vector<MatchScore>& alignment_row,
                          TurnHistory& history, const ToolRegistry& registry) {
    if (turn.tool_calls.empty()) return Tier::message_only;
    Tier best = Tier::message_only;
    for (std::size_t c = 0; c < turn.tool_calls.size(); ++c) {
        ArgValue normalized = normalize_value(turn.tool_calls[c].args);
        Tier call_tier = detail::classify_call(turn.tool_calls[c], turn.tool_errored[c],
                                               alignment_row[c], history, normalized, registry);
        if (static_cast<std::size_t>(call_tier) < static_cast<std::size_t>(best)) best = call_tier;
        history.push_back(SeenCall{turn.tool_calls[c].name, std::move(normalized)});
    }
    return best;
}

// Tier, reward and (when a match drove the tier) the contributing score for
// one turn.
struct TurnRewards {
    Tier tier = Tier::message_only;
    double reward = 0.0;
    std::optional<MatchScore> match;
};

// Classifies every turn of a rollout and maps tiers to scalar rewards.
inline std::vector<TurnRewards> assign_rewards(const Rollout& r, const RewardTable& table,
                                               const ToolRegistry& registry) {
    const GoldenAlignment alignment = align_golden(r);
    std::vector<TurnRewards> out;
    out.reserve(r.turns.size());
    TurnHistory history;
    for (std::size_t k = 0; k < r.turns.size(); ++k) {
        TurnRewards tr;
        tr.tier = classify_turn(r.turns[k], alignment.per_turn[k], history, registry);
        if (tr.tier == Tier::gold_exact || tr.tier == Tier::soft_match) {
            // contributing score: best same-kind call score in the turn
            for (const MatchScore& m : alignment.per_turn[k]) {
                const bool fits = (tr.tier == Tier::gold_exact) ? m.is_exact() : m.is_soft();
                if (fits && (!tr.match || m.score > tr.match->score)) tr.match = m;
            }
        }
        tr.reward = table.value_for(tr.tier, tr.match ? tr.match->score : 0.0);
        out.push_back(std::move(tr));
    }
    return out;
}

// Tier sequence only (no reward mapping), for discriminative statistics.
inline std::vector<Tier> classify_rollout(const Rollout& r, const ToolRegistry& registry) {
    const GoldenAlignment alignment = align_golden(r);
    std::vector<Tier> out;
    out.reserve(r.turns.size());
    TurnHistory history;
    for (std::size_t k = 0; k < r.turns.size(); ++k)
        out.push_back(classify_turn(r.turns[k], alignment.per_turn[k], history, registry));
    return out;
}

}  // namespace turncredit
