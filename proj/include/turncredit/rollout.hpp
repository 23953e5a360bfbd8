#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "turncredit/arg_value.hpp"
#include "turncredit/errors.hpp"

namespace turncredit {

// One tool invocation: name plus a map of arguments.
struct ToolCall {
    std::string name;
    ArgValue args = ArgValue::object();
};

// Ground-truth tool call the task expects. Same shape as ToolCall; kept as
// a distinct type because the two sides of matching never mix.
struct GoldenAction {
    std::string name;
    ArgValue args = ArgValue::object();
};

// One agent turn. Message-only turns have text and no calls; acting turns
// may carry several calls, each with an environment error flag.
struct Turn {
    std::size_t index = 0;
    std::optional<std::string> text;
    std::vector<ToolCall> tool_calls;
    std::vector<bool> tool_errored;  // parallel to tool_calls
};

// One complete trajectory with its binary outcome.
struct Rollout {
    std::string rollout_id;
    std::string group_id;
    std::string task_id;
    std::vector<Turn> turns;
    std::vector<GoldenAction> golden_actions;
    int outcome = 0;

    std::size_t turn_count() const { return turns.size(); }
};

using RolloutBuffer = std::vector<Rollout>;

// Rollouts sampled for the same prompt; the unit of group normalization.
// Groups of size 1 are representable but flagged unusable.
struct RolloutGroup {
    std::string group_id;
    std::vector<Rollout> rollouts;

    std::size_t size() const { return rollouts.size(); }
    bool usable_for_normalization() const { return rollouts.size() >= 2; }
};

// ---------------------------------------------------------------------------
// Validation

struct ValidationVerdict {
    std::vector<std::string> violations;
    bool valid() const { return violations.empty(); }
};

inline ValidationVerdict validate_rollout(const Rollout& r) {
    ValidationVerdict v;
    auto fail = [&](std::string what) { v.violations.push_back(std::move(what)); };

    if (r.rollout_id.empty()) fail("rollout_id");
    if (r.turns.empty()) fail("turns (K >= 1 required)");
    if (r.outcome != 0 && r.outcome != 1) fail("outcome");

    for (std::size_t k = 0; k < r.turns.size(); ++k) {
        const Turn& t = r.turns[k];
        if (t.index != k) fail("turn.index (expected " + std::to_string(k) + ")");
        if (t.tool_calls.size() != t.tool_errored.size()) fail("turn.tool_errored size");
        if (t.tool_calls.empty() && (!t.text || t.text->empty()))
            fail("turn " + std::to_string(k) + " (message-only turn needs text)");
        for (const ToolCall& c : t.tool_calls) {
            if (c.name.empty()) fail("tool_call.name");
            if (!c.args.is_object()) fail("tool_call.args (must be a map)");
            collect_arg_value_violations(c.args, "tool_call.args", v.violations);
        }
    }
    for (const GoldenAction& g : r.golden_actions) {
        if (g.name.empty()) fail("golden_action.name");
        if (!g.args.is_object()) fail("golden_action.args (must be a map)");
        collect_arg_value_violations(g.args, "golden_action.args", v.violations);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Line-delimited record format
//
// One JSON object per line:
//   {"rollout_id": ..., "group_id": ..., "task_id": ..., "outcome": 0|1,
//    "golden_actions": [{"name":..., "args":{...}}],
//    "turns": [{"index":0, "text":..., "tool_calls":[{"name":...,"args":{...},"errored":false}]}]}
// Unknown fields are ignored.

namespace detail {

inline const ArgValue& require_field(const ArgValue& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field \"") + key + "\"", line);
    return *it;
}

inline Rollout rollout_from_json(const ArgValue& j, std::size_t line) {
    if (!j.is_object()) throw ParseError("record is not a JSON object", line);
    Rollout r;
    r.rollout_id = require_field(j, "rollout_id", line).get<std::string>();
    r.group_id = require_field(j, "group_id", line).get<std::string>();
    r.task_id = require_field(j, "task_id", line).get<std::string>();
    const ArgValue& outcome = require_field(j, "outcome", line);
    if (!outcome.is_number_integer() && !outcome.is_number_unsigned())
        throw ParseError("outcome must be an integer", line);
    r.outcome = outcome.get<int>();

    for (const ArgValue& gj : require_field(j, "golden_actions", line)) {
        GoldenAction g;
        g.name = require_field(gj, "name", line).get<std::string>();
        g.args = require_field(gj, "args", line);
        r.golden_actions.push_back(std::move(g));
    }
    for (const ArgValue& tj : require_field(j, "turns", line)) {
        Turn t;
        t.index = require_field(tj, "index", line).get<std::size_t>();
        if (auto it = tj.find("text"); it != tj.end() && !it->is_null())
            t.text = it->get<std::string>();
        if (auto it = tj.find("tool_calls"); it != tj.end()) {
            for (const ArgValue& cj : *it) {
                ToolCall c;
                c.name = require_field(cj, "name", line).get<std::string>();
                c.args = require_field(cj, "args", line);
                bool errored = false;
                if (auto e = cj.find("errored"); e != cj.end()) errored = e->get<bool>();
                t.tool_calls.push_back(std::move(c));
                t.tool_errored.push_back(errored);
            }
        }
        r.turns.push_back(std::move(t));
    }
    return r;
}

}  // namespace detail

inline ArgValue rollout_to_json(const Rollout& r) {
    ArgValue j = ArgValue::object();
    j["rollout_id"] = r.rollout_id;
    j["group_id"] = r.group_id;
    j["task_id"] = r.task_id;
    j["outcome"] = r.outcome;
    ArgValue goldens = ArgValue::array();
    for (const GoldenAction& g : r.golden_actions)
        goldens.push_back({{"name", g.name}, {"args", g.args}});
    j["golden_actions"] = std::move(goldens);
    ArgValue turns = ArgValue::array();
    for (const Turn& t : r.turns) {
        ArgValue tj = ArgValue::object();
        tj["index"] = t.index;
        if (t.text) tj["text"] = *t.text;
        ArgValue calls = ArgValue::array();
        for (std::size_t i = 0; i < t.tool_calls.size(); ++i)
            calls.push_back({{"name", t.tool_calls[i].name},
                             {"args", t.tool_calls[i].args},
                             {"errored", static_cast<bool>(t.tool_errored[i])}});
        tj["tool_calls"] = std::move(calls);
        turns.push_back(std::move(tj));
    }
    j["turns"] = std::move(turns);
    return j;
}

inline std::string serialize_rollout(const Rollout& r) { return rollout_to_json(r).dump(); }

inline void serialize_buffer(const RolloutBuffer& buffer, std::ostream& out) {
    for (const Rollout& r : buffer) out << serialize_rollout(r) << '\n';
}

// Parses a whole stream of line-delimited records. Every rollout is
// validated; the first invariant violation aborts with the offending
// rollout_id and field so corrupted logs fail loudly.
inline RolloutBuffer parse_buffer(std::istream& in) {
    RolloutBuffer buffer;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ArgValue j = ArgValue::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("malformed JSON record", line_no);
        Rollout r = detail::rollout_from_json(j, line_no);
        ValidationVerdict verdict = validate_rollout(r);
        if (!verdict.valid())
            throw ValidationError("rollout \"" + r.rollout_id + "\": " + verdict.violations.front());
        buffer.push_back(std::move(r));
    }
    return buffer;
}

// ---------------------------------------------------------------------------
// Grouping

inline bool golden_actions_equal(const std::vector<GoldenAction>& a,
                                 const std::vector<GoldenAction>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].name != b[i].name || a[i].args != b[i].args) return false;
    return true;
}

// Partitions a buffer by group_id, preserving input order within and across
// groups (group order = first appearance).
inline std::vector<RolloutGroup> group_rollouts(const RolloutBuffer& buffer) {
    std::vector<RolloutGroup> groups;
    std::unordered_map<std::string, std::size_t> index_of;
    for (const Rollout& r : buffer) {
        auto [it, inserted] = index_of.emplace(r.group_id, groups.size());
        if (inserted) {
            groups.push_back(RolloutGroup{r.group_id, {}});
        } else {
            const Rollout& first = groups[it->second].rollouts.front();
            if (!golden_actions_equal(first.golden_actions, r.golden_actions))
                throw ConsistencyError("group \"" + r.group_id +
                                       "\": golden_actions differ between rollouts");
            if (first.task_id != r.task_id)
                throw ConsistencyError("group \"" + r.group_id + "\": task_id differs");
        }
        groups[it->second].rollouts.push_back(r);
    }
    return groups;
}

}  // namespace turncredit
