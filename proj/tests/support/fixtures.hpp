#pragma once

// Shared test support: hand-built fixture buffers, the canonical-form oracle
// used to cross-check deep_equal, randomized value generators, and a small
// process runner for CLI tests. Everything here is test-only and independent
// of the library's own normalization path wherever it serves as an oracle.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <turncredit/turncredit.hpp>

namespace testsupport {

using namespace turncredit;

// ---------------------------------------------------------------------------
// Rollout builders

inline Turn message_turn(std::size_t index, const std::string& text) {
    Turn t;
    t.index = index;
    t.text = text;
    return t;
}

inline Turn call_turn(std::size_t index, const std::string& name, const ArgValue& args,
                      bool errored = false) {
    Turn t;
    t.index = index;
    t.tool_calls.push_back(ToolCall{name, args});
    t.tool_errored.push_back(errored);
    return t;
}

struct RolloutSpec {
    std::string rollout_id;
    int outcome = 0;
    std::vector<Turn> turns;
};

inline Rollout make_rollout(const std::string& group_id, const std::string& task_id,
                            const std::vector<GoldenAction>& goldens, RolloutSpec spec) {
    Rollout r;
    r.rollout_id = std::move(spec.rollout_id);
    r.group_id = group_id;
    r.task_id = task_id;
    r.golden_actions = goldens;
    r.outcome = spec.outcome;
    r.turns = std::move(spec.turns);
    for (std::size_t k = 0; k < r.turns.size(); ++k) r.turns[k].index = k;
    return r;
}

// ---------------------------------------------------------------------------
// Misalignment fixture
//
// Groups of four rollouts with outcomes [1,0,0,0]. Every rollout opens with
// the same lookup; the pass does a second lookup and the golden cancel, the
// fails hit two errored lookups and then ramble through redundant reads and
// never execute the cancel. Under the naive dense table this makes the
// read-only tier's per-turn advantage weakly positive while its total
// advantage is negative under mt_grpo (the sign flip), and positive again
// under the dampened hybrid.

inline RolloutBuffer misalignment_fixture(std::size_t group_count = 12) {
    RolloutBuffer buffer;
    for (std::size_t g = 0; g < group_count; ++g) {
        const std::string gid = "mg" + std::to_string(g);
        const std::string tid = "mtask" + std::to_string(g);
        const std::string user = "user_" + std::to_string(g);
        const std::string res = "RES" + std::to_string(g) + "a";
        const std::string res2 = "RES" + std::to_string(g) + "b";
        const std::string res3 = "RES" + std::to_string(g) + "c";
        const std::vector<GoldenAction> goldens = {
            GoldenAction{"cancel_reservation", {{"reservation_id", res}}}};

        RolloutSpec pass;
        pass.rollout_id = gid + "_pass";
        pass.outcome = 1;
        pass.turns = {
            call_turn(0, "get_user_details", {{"user_id", user}}),
            call_turn(1, "get_reservation_details", {{"reservation_id", res}}),
            call_turn(2, "cancel_reservation", {{"reservation_id", res}}),
        };
        buffer.push_back(make_rollout(gid, tid, goldens, std::move(pass)));

        for (int f = 0; f < 3; ++f) {
            RolloutSpec fail;
            fail.rollout_id = gid + "_fail" + std::to_string(f);
            fail.outcome = 0;
            fail.turns = {
                call_turn(0, "get_user_details", {{"user_id", user}}),
                call_turn(1, "get_reservation_details", {{"reservation_id", res2}}, true),
                call_turn(2, "get_reservation_details", {{"reservation_id", res3}}, true),
                call_turn(3, "search_direct_flight",
                          {{"origin", "JFK"}, {"destination", "MCO"}}),
                call_turn(4, "search_onestop_flight",
                          {{"origin", "JFK"}, {"destination", "MCO"}}),
                call_turn(5, "list_all_airports", ArgValue::object()),
            };
            buffer.push_back(make_rollout(gid, tid, goldens, std::move(fail)));
        }
    }
    return buffer;
}

// ---------------------------------------------------------------------------
// Gradient-focusing fixture
//
// Two group archetypes. Mixed-outcome groups diverge only at the golden
// call (exact vs one corrupted argument, i.e. gold vs soft) and otherwise
// contain message turns, so under sparse rewards all their live mass sits on
// gold/soft turns. Uniform-outcome groups are read-heavy with one position
// where two rollouts read and two send a message; under sparse rewards they
// are entirely dead, under dense rewards that variance comes alive and puts
// mass on read turns.

inline RolloutBuffer gradient_focus_fixture(std::size_t groups_per_archetype = 25) {
    RolloutBuffer buffer;
    for (std::size_t g = 0; g < groups_per_archetype; ++g) {
        const std::string gid = "ga" + std::to_string(g);
        const std::string tid = "gtaskA" + std::to_string(g);
        const std::string res = "RESA" + std::to_string(g);
        const std::vector<GoldenAction> goldens = {GoldenAction{
            "update_reservation_flights",
            {{"reservation_id", res}, {"origin", "SFO"}, {"destination", "ORD"}}}};
        for (int i = 0; i < 4; ++i) {
            const bool pass = i < 2;
            RolloutSpec spec;
            spec.rollout_id = gid + "_r" + std::to_string(i);
            spec.outcome = pass ? 1 : 0;
            spec.turns = {
                message_turn(0, "Reviewing your reservation."),
                call_turn(1, "update_reservation_flights",
                          {{"reservation_id", res},
                           {"origin", "SFO"},
                           {"destination", pass ? "ORD" : "DEN"}}),
                message_turn(2, "Done."),
            };
            buffer.push_back(make_rollout(gid, tid, goldens, std::move(spec)));
        }
    }
    for (std::size_t g = 0; g < groups_per_archetype; ++g) {
        const std::string gid = "gb" + std::to_string(g);
        const std::string tid = "gtaskB" + std::to_string(g);
        const std::string user = "userB" + std::to_string(g);
        const std::string res = "RESB" + std::to_string(g);
        const std::vector<GoldenAction> goldens = {
            GoldenAction{"cancel_reservation", {{"reservation_id", res}}}};
        for (int i = 0; i < 4; ++i) {
            RolloutSpec spec;
            spec.rollout_id = gid + "_r" + std::to_string(i);
            spec.outcome = 1;
            spec.turns = {call_turn(0, "get_user_details", {{"user_id", user}})};
            if (i < 2)
                spec.turns.push_back(
                    call_turn(1, "get_reservation_details", {{"reservation_id", res}}));
            else
                spec.turns.push_back(message_turn(1, "One moment."));
            spec.turns.push_back(call_turn(2, "cancel_reservation", {{"reservation_id", res}}));
            buffer.push_back(make_rollout(gid, tid, goldens, std::move(spec)));
        }
    }
    return buffer;
}

// ---------------------------------------------------------------------------
// Deep-equal fixture corpus

struct ArgPair {
    const char* a;
    const char* b;
    bool equivalent;
    const char* category;  // key_order | coercion | empty_values | list_sort | mixed | different
};

inline const std::vector<ArgPair>& deep_equal_corpus() {
    static const std::vector<ArgPair> corpus = {
        // --- key ordering -------------------------------------------------
        {R"({"a":1,"b":2})", R"({"b":2,"a":1})", true, "key_order"},
        {R"({"x":"JFK","y":"MCO","z":"ATL"})", R"({"z":"ATL","x":"JFK","y":"MCO"})", true, "key_order"},
        {R"({"outer":{"a":1,"b":2}})", R"({"outer":{"b":2,"a":1}})", true, "key_order"},
        {R"({"origin":"JFK","destination":"MCO"})", R"({"destination":"MCO","origin":"JFK"})", true, "key_order"},
        {R"({"a":{"c":3,"d":4},"b":1})", R"({"b":1,"a":{"d":4,"c":3}})", true, "key_order"},
        {R"({"k1":[1,2],"k2":[3,4]})", R"({"k2":[3,4],"k1":[1,2]})", true, "key_order"},
        {R"({"user":"u1","res":"r1","cabin":"eco"})", R"({"cabin":"eco","user":"u1","res":"r1"})", true, "key_order"},
        {R"({"p":true,"q":false})", R"({"q":false,"p":true})", true, "key_order"},
        {R"({"m":{"n":{"o":1,"p":2}}})", R"({"m":{"n":{"p":2,"o":1}}})", true, "key_order"},
        {R"({"a":1,"b":2,"c":3,"d":4})", R"({"d":4,"c":3,"b":2,"a":1})", true, "key_order"},
        // --- numeric-string coercion --------------------------------------
        {R"({"id":"123"})", R"({"id":123})", true, "coercion"},
        {R"("123")", R"(123)", true, "coercion"},
        {R"("0")", R"(0)", true, "coercion"},
        {R"("-4")", R"(-4)", true, "coercion"},
        {R"("+5")", R"(5)", true, "coercion"},
        {R"("12.5")", R"(12.5)", true, "coercion"},
        {R"("3.50")", R"(3.5)", true, "coercion"},
        {R"("-0.25")", R"(-0.25)", true, "coercion"},
        {R"({"price":"199.99"})", R"({"price":199.99})", true, "coercion"},
        {R"({"count":"2","price":"10.0"})", R"({"count":2,"price":10.0})", true, "coercion"},
        {R"(["1","2","3"])", R"([1,2,3])", true, "coercion"},
        {R"({"flight":"447"})", R"({"flight":447})", true, "coercion"},
        {R"({"nested":{"qty":"12"}})", R"({"nested":{"qty":12}})", true, "coercion"},
        {R"({"a":"0.5","b":"1"})", R"({"a":0.5,"b":1})", true, "coercion"},
        {R"("9007199254740993")", R"(9007199254740993)", true, "coercion"},
        {R"(123)", R"(123.0)", true, "coercion"},
        // --- empty-value handling ------------------------------------------
        {R"({"x":"","y":[],"z":1})", R"({"z":1})", true, "empty_values"},
        {R"({"a":null,"b":2})", R"({"b":2})", true, "empty_values"},
        {R"({"a":{},"b":2})", R"({"b":2})", true, "empty_values"},
        {R"({"a":{"inner":null},"b":2})", R"({"b":2})", true, "empty_values"},
        {R"({"keep":"v","drop":""})", R"({"keep":"v"})", true, "empty_values"},
        {R"([null,1,""])", R"([1])", true, "empty_values"},
        {R"([[],{},2])", R"([2])", true, "empty_values"},
        {R"({"a":[null,null]})", R"({})", true, "empty_values"},
        {R"({"a":1,"pad1":"","pad2":null,"pad3":[]})", R"({"a":1})", true, "empty_values"},
        {R"({"outer":{"keep":1,"drop":{}}})", R"({"outer":{"keep":1}})", true, "empty_values"},
        {R"({"x":{"y":{"z":""}}})", R"({})", true, "empty_values"},
        {R"(["a","",null,"b"])", R"(["a","b"])", true, "empty_values"},
        // --- map-list sorting ----------------------------------------------
        {R"([{"b":2},{"a":1}])", R"([{"a":1},{"b":2}])", true, "list_sort"},
        {R"([{"id":2},{"id":1},{"id":3}])", R"([{"id":1},{"id":2},{"id":3}])", true, "list_sort"},
        {R"({"k":[{"a":1},{"b":2}]})", R"({"k":[{"b":2},{"a":1}]})", true, "list_sort"},
        {R"([{"x":1,"y":2},{"x":0}])", R"([{"x":0},{"y":2,"x":1}])", true, "list_sort"},
        {R"([{"n":"cancel"},{"n":"book"}])", R"([{"n":"book"},{"n":"cancel"}])", true, "list_sort"},
        {R"({"legs":[{"to":"B"},{"to":"A"}]})", R"({"legs":[{"to":"A"},{"to":"B"}]})", true, "list_sort"},
        {R"([{"a":1},{"a":1},{"b":2}])", R"([{"b":2},{"a":1},{"a":1}])", true, "list_sort"},
        {R"([{"q":[{"z":2},{"y":1}]}])", R"([{"q":[{"y":1},{"z":2}]}])", true, "list_sort"},
        // --- combined ------------------------------------------------------
        {R"({"id":"42","pad":"","legs":[{"b":2},{"a":1}]})",
         R"({"legs":[{"a":1},{"b":2}],"id":42})", true, "mixed"},
        {R"({"b":"2","a":null})", R"({"b":2})", true, "mixed"},
        {R"([{"k":"1","junk":[]},{"k":"0"}])", R"([{"k":0},{"k":1}])", true, "mixed"},
        {R"({"res":{"id":"777","extras":{}},"note":""})", R"({"res":{"id":777}})", true, "mixed"},
        {R"({"fare":"99.50","tax":null})", R"({"fare":99.5})", true, "mixed"},
        {R"({"seq":[{"q":"3"},{"p":"2"}],"blank":""})",
         R"({"seq":[{"p":2},{"q":3}]})", true, "mixed"},
        {R"({"a":"10","b":{"c":"","d":"0.5"}})", R"({"b":{"d":0.5},"a":10})", true, "mixed"},
        {R"([{"m":"7","void":null},{"m":"6"}])", R"([{"m":6},{"m":7}])", true, "mixed"},
        {R"({"deep":[{"u":[{"w":"2"}]},{"t":""}]})", R"({"deep":[{"u":[{"w":2}]}]})", true, "mixed"},
        {R"({"p1":"+1","p2":"-1"})", R"({"p2":-1,"p1":1})", true, "mixed"},
        // --- genuinely different --------------------------------------------
        {R"({"a":1})", R"({"a":2})", false, "different"},
        {R"({"a":1})", R"({"a":1,"b":2})", false, "different"},
        {R"({"id":"007"})", R"({"id":7})", false, "different"},
        {R"("007")", R"(7)", false, "different"},
        {R"("1e3")", R"(1000)", false, "different"},
        {R"(" 123")", R"(123)", false, "different"},
        {R"("12.")", R"(12)", false, "different"},
        {R"([1,2])", R"([2,1])", false, "different"},
        {R"([1,{"a":1}])", R"([{"a":1},1])", false, "different"},
        {R"({"a":"hello"})", R"({"a":"Hello"})", false, "different"},
        {R"(1)", R"(true)", false, "different"},
        {R"(null)", R"(0)", false, "different"},
        {R"("")", R"(0)", false, "different"},
        {R"({"a":0.5})", R"({"a":0.500001})", false, "different"},
        {R"([{"a":1}])", R"([{"a":2}])", false, "different"},
        {R"([{"a":1},{"b":2}])", R"([{"a":1}])", false, "different"},
        {R"({"x":{"y":1}})", R"({"x":{"y":1,"z":0}})", false, "different"},
        {R"({"origin":"JFK"})", R"({"origin":"LGA"})", false, "different"},
        {R"({"n":"12a"})", R"({"n":12})", false, "different"},
        {R"({"a":[1,2,3]})", R"({"a":[1,2]})", false, "different"},
        {R"({"a":1000000000})", R"({"a":1000000001})", false, "different"},
        {R"("0.5")", R"("0,5")", false, "different"},
    };
    return corpus;
}

// ---------------------------------------------------------------------------
// Canonical-form oracle (independent of normalize_value / deep_equal)
//
// Produces a canonical text for a value by recursive descent: numeric-string
// coercion via std::regex, empty-entry removal, lexicographic sorting of
// all-object arrays, keys sorted explicitly. Two values are
// oracle-equivalent iff their canonical texts match.

namespace oracle {

struct Canon {
    std::string text;
    bool removable = false;
};

inline std::string number_text(double v) {
    char buf[64];
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    } else {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
    }
    return buf;
}

inline Canon canonicalize(const ArgValue& v) {
    static const std::regex numeric(R"([+-]?(0|[1-9][0-9]*)(\.[0-9]+)?)");
    switch (v.type()) {
        case ArgValue::value_t::null:
            return {"null", true};
        case ArgValue::value_t::boolean:
            return {v.get<bool>() ? "true" : "false", false};
        case ArgValue::value_t::number_integer:
        case ArgValue::value_t::number_unsigned:
        case ArgValue::value_t::number_float:
            return {number_text(v.get<double>()), false};
        case ArgValue::value_t::string: {
            const std::string& s = v.get_ref<const std::string&>();
            if (std::regex_match(s, numeric)) return {number_text(std::stod(s)), false};
            return {ArgValue(s).dump(), s.empty()};
        }
        case ArgValue::value_t::array: {
            std::vector<std::string> parts;
            bool all_objects = true;
            for (const ArgValue& e : v) {
                Canon c = canonicalize(e);
                if (c.removable) continue;
                all_objects = all_objects && !c.text.empty() && c.text.front() == '{';
                parts.push_back(std::move(c.text));
            }
            if (all_objects && parts.size() > 1) std::sort(parts.begin(), parts.end());
            std::string out = "[";
            for (std::size_t i = 0; i < parts.size(); ++i)
                out += (i ? "," : "") + parts[i];
            out += "]";
            return {out, parts.empty()};
        }
        case ArgValue::value_t::object: {
            std::vector<std::pair<std::string, std::string>> entries;
            for (const auto& [key, val] : v.items()) {
                Canon c = canonicalize(val);
                if (c.removable) continue;
                entries.emplace_back(key, std::move(c.text));
            }
            std::sort(entries.begin(), entries.end());
            std::string out = "{";
            for (std::size_t i = 0; i < entries.size(); ++i)
                out += (i ? "," : "") + ArgValue(entries[i].first).dump() + ":" +
                       entries[i].second;
            out += "}";
            return {out, entries.empty()};
        }
        default:
            return {"?", false};
    }
}

inline std::string canonical(const ArgValue& v) { return canonicalize(v).text; }

inline bool equivalent(const ArgValue& a, const ArgValue& b) {
    return canonical(a) == canonical(b);
}

}  // namespace oracle

// ---------------------------------------------------------------------------
// Randomized value generation

inline ArgValue random_arg_value(SplitMix64& rng, int depth = 3) {
    const std::size_t kind = rng.below(depth > 0 ? 7 : 5);
    switch (kind) {
        case 0: return ArgValue(static_cast<std::int64_t>(rng.below(2000)) - 1000);
        case 1: {
            // grid-quantized doubles so random collisions are exact
            const double v = (static_cast<double>(rng.below(4001)) - 2000.0) / 8.0;
            return ArgValue(v);
        }
        case 2: return ArgValue(rng.chance(0.5));
        case 3: return ArgValue(nullptr);
        case 4: {
            static const std::array<const char*, 8> pool = {"alpha", "42",  "007", "x",
                                                            "",      "3.5", "JFK", "beta"};
            return ArgValue(pool[rng.below(pool.size())]);
        }
        case 5: {
            ArgValue arr = ArgValue::array();
            const std::size_t n = rng.below(4);
            for (std::size_t i = 0; i < n; ++i) arr.push_back(random_arg_value(rng, depth - 1));
            return arr;
        }
        default: {
            ArgValue obj = ArgValue::object();
            static const std::array<const char*, 6> keys = {"k0", "k1", "k2", "k3", "k4", "k5"};
            const std::size_t n = rng.below(4);
            for (std::size_t i = 0; i < n; ++i)
                obj[keys[rng.below(keys.size())]] = random_arg_value(rng, depth - 1);
            return obj;
        }
    }
}

// Equivalence-preserving rewrite: stringify safe numbers, pad containers
// with empty-valued entries, permute all-object arrays.
inline ArgValue equivalent_variant(const ArgValue& v, SplitMix64& rng) {
    static const std::regex numeric(R"([+-]?(0|[1-9][0-9]*)(\.[0-9]+)?)");
    switch (v.type()) {
        case ArgValue::value_t::number_integer:
        case ArgValue::value_t::number_unsigned:
        case ArgValue::value_t::number_float: {
            const std::string text = v.dump();
            if (rng.chance(0.5) && std::regex_match(text, numeric)) return ArgValue(text);
            return v;
        }
        case ArgValue::value_t::array: {
            ArgValue out = ArgValue::array();
            bool all_objects = !v.empty();
            for (const ArgValue& e : v) {
                out.push_back(equivalent_variant(e, rng));
                all_objects = all_objects && e.is_object();
            }
            if (all_objects && out.size() > 1 && rng.chance(0.7)) {
                // rotate by a random offset
                const std::size_t shift = rng.below(out.size());
                ArgValue rotated = ArgValue::array();
                for (std::size_t i = 0; i < out.size(); ++i)
                    rotated.push_back(out[(i + shift) % out.size()]);
                out = std::move(rotated);
            }
            if (rng.chance(0.3)) out.push_back(nullptr);  // removable padding
            return out;
        }
        case ArgValue::value_t::object: {
            ArgValue out = ArgValue::object();
            for (const auto& [key, val] : v.items()) out[key] = equivalent_variant(val, rng);
            if (rng.chance(0.4)) {
                static const std::array<const char*, 3> pads = {"pad_a", "pad_b", "pad_c"};
                const char* key = pads[rng.below(pads.size())];
                if (!out.contains(key)) {
                    switch (rng.below(3)) {
                        case 0: out[key] = "";
                        break;
                        case 1: out[key] = ArgValue::array();
                        break;
                        default: out[key] = nullptr;
                    }
                }
            }
            return out;
        }
        default:
            return v;
    }
}

// ---------------------------------------------------------------------------
// Random group signals for estimator properties

inline GroupSignal random_group_signal(SplitMix64& rng, std::size_t max_n = 6,
                                       std::size_t max_k = 6, bool ragged = true) {
    GroupSignal s;
    const std::size_t n = 2 + rng.below(max_n - 1);
    const std::size_t base_k = 1 + rng.below(max_k);
    for (std::size_t i = 0; i < n; ++i) {
        s.outcomes.push_back(rng.chance(0.5) ? 1.0 : 0.0);
        const std::size_t k = ragged ? 1 + rng.below(max_k) : base_k;
        std::vector<double> rewards;
        for (std::size_t j = 0; j < k; ++j)
            rewards.push_back((static_cast<double>(rng.below(21)) - 10.0) / 10.0);
        s.turn_rewards.push_back(std::move(rewards));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Files and processes

inline std::string write_temp_buffer(const RolloutBuffer& buffer, const std::string& name) {
    const std::string path = std::string("/tmp/") + name;
    std::ofstream out(path, std::ios::trunc);
    serialize_buffer(buffer, out);
    return path;
}

struct ProcResult {
    int exit_code = -1;
    std::string output;  // stdout only
};

inline ProcResult run_process(const std::string& command) {
    ProcResult result;
    FILE* pipe = popen((command + " 2>/dev/null").c_str(), "r");
    if (!pipe) return result;
    char chunk[4096];
    while (std::size_t n = std::fread(chunk, 1, sizeof(chunk), pipe)) result.output.append(chunk, n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testsupport
