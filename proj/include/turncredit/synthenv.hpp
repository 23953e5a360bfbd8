#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "turncredit/arg_value.hpp"
#include "turncredit/errors.hpp"
#include "turncredit/rollout.hpp"
#include "turncredit/tiers.hpp"

namespace turncredit {

// ---------------------------------------------------------------------------
// Deterministic random stream
//
// SplitMix64 (Steele, Lea & Flood's 64-bit mixer). Chosen over <random>
// engines + distributions because the full stream, including the mapping to
// doubles and ranges below, is pinned here: identical seeds give identical
// buffers on any platform.

struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53 mantissa bits
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return next_unit() < p; }

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
};

// Stable seed derivation for (task index, rollout index) substreams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    SplitMix64 s(seed ^ (0x9e3779b97f4a7c15ULL * (a + 1)) ^ (0xbf58476d1ce4e5b9ULL * (b + 1)));
    return s.next();
}

// ---------------------------------------------------------------------------
// Micro airline world

struct Reservation {
    std::string origin;
    std::string destination;
    std::string cabin;
    int passengers = 1;
};

struct Flight {
    std::string origin;
    std::string destination;
    std::string flight_id;
};

struct MicroWorld {
    std::map<std::string, std::string> users;  // user id -> display name
    std::map<std::string, Reservation> reservations;
    std::vector<Flight> flights;

    std::set<std::string> airports() const {
        std::set<std::string> out;
        for (const Flight& f : flights) {
            out.insert(f.origin);
            out.insert(f.destination);
        }
        return out;
    }

    void validate() const {
        const std::set<std::string> known = airports();
        for (const auto& [id, res] : reservations)
            if (!known.count(res.origin) || !known.count(res.destination))
                throw ValidationError("reservation " + id + " references unknown airport");
    }
};

inline ArgValue world_to_json(const MicroWorld& w) {
    ArgValue j = ArgValue::object();
    j["users"] = w.users;
    ArgValue res = ArgValue::object();
    for (const auto& [id, r] : w.reservations)
        res[id] = {{"origin", r.origin},
                   {"destination", r.destination},
                   {"cabin", r.cabin},
                   {"passengers", r.passengers}};
    j["reservations"] = std::move(res);
    ArgValue flights = ArgValue::array();
    for (const Flight& f : w.flights)
        flights.push_back(
            {{"origin", f.origin}, {"destination", f.destination}, {"flight_id", f.flight_id}});
    j["flights"] = std::move(flights);
    return j;
}

// Deep structural equality of the world maps.
inline bool worlds_equal(const MicroWorld& a, const MicroWorld& b) {
    return world_to_json(a) == world_to_json(b);
}

// Applies one call to the world. Read-only tools never mutate; unknown
// reservation ids are no-ops (a wrong cancel simply misses).
inline void apply_call(MicroWorld& world, const ToolCall& call) {
    if (call.name == "cancel_reservation") {
        if (auto it = call.args.find("reservation_id"); it != call.args.end())
            world.reservations.erase(it->get<std::string>());
        return;
    }
    if (call.name == "update_reservation_flights") {
        auto id = call.args.find("reservation_id");
        if (id == call.args.end()) return;
        auto res = world.reservations.find(id->get<std::string>());
        if (res == world.reservations.end()) return;
        if (auto f = call.args.find("origin"); f != call.args.end())
            res->second.origin = f->get<std::string>();
        if (auto f = call.args.find("destination"); f != call.args.end())
            res->second.destination = f->get<std::string>();
        if (auto f = call.args.find("cabin"); f != call.args.end())
            res->second.cabin = f->get<std::string>();
    }
    // reads and anything else: no effect
}

// ---------------------------------------------------------------------------
// Tasks

// A task: an initial world, the golden action sequence, and the target world
// reached by replaying the goldens on the initial state.
struct Task {
    std::string task_id;
    MicroWorld initial;
    std::vector<GoldenAction> golden_actions;
    MicroWorld target;
};

namespace detail {

inline std::string hex_id(std::uint64_t v, std::size_t digits) {
    static const char* k = "0123456789abcdef";
    std::string s(digits, '0');
    for (std::size_t i = digits; i-- > 0; v >>= 4) s[i] = k[v & 0xf];
    return s;
}

}  // namespace detail

// Deterministic task from a seed: a world with enough reservations to make
// wrong-target corruption possible, and a golden sequence of one lookup plus
// one or two cancellations.
inline Task build_task(std::uint64_t seed) {
    SplitMix64 rng(seed);
    Task task;
    task.task_id = "task-" + detail::hex_id(seed, 8);

    static const std::vector<std::string> pool = {"JFK", "MCO", "ATL", "SFO",
                                                  "ORD", "DEN", "SEA", "BOS"};
    std::vector<std::string> airports = pool;
    for (std::size_t i = airports.size(); i-- > 1;)
        std::swap(airports[i], airports[rng.below(i + 1)]);
    airports.resize(4);

    MicroWorld& world = task.initial;
    int flight_no = 100 + static_cast<int>(rng.below(800));
    for (std::size_t a = 0; a < airports.size(); ++a)
        for (std::size_t b = 0; b < airports.size(); ++b)
            if (a != b)
                world.flights.push_back(
                    Flight{airports[a], airports[b], "HAT" + std::to_string(flight_no++)});

    const std::string user_id = "user_" + detail::hex_id(rng.next(), 6);
    world.users[user_id] = "Customer " + detail::hex_id(rng.next(), 4);

    const std::size_t state_actions = 1 + rng.below(2);         // 1 or 2 cancellations
    const std::size_t reservation_count = state_actions + 1 + rng.below(4 - state_actions);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < reservation_count; ++i) {
        std::string id;
        do {
            id = "RES" + detail::hex_id(rng.next(), 4);
        } while (world.reservations.count(id));
        ids.push_back(id);
        const Flight& f = world.flights[rng.below(world.flights.size())];
        world.reservations[id] = Reservation{f.origin, f.destination,
                                             rng.chance(0.3) ? "business" : "economy",
                                             1 + static_cast<int>(rng.below(3))};
    }
    world.validate();

    task.golden_actions.push_back(
        GoldenAction{"get_reservation_details", {{"reservation_id", ids[0]}}});
    for (std::size_t j = 0; j < state_actions; ++j)
        task.golden_actions.push_back(
            GoldenAction{"cancel_reservation", {{"reservation_id", ids[j]}}});

    task.target = task.initial;
    for (const GoldenAction& g : task.golden_actions)
        apply_call(task.target, ToolCall{g.name, g.args});
    return task;
}

// ---------------------------------------------------------------------------
// Scripted policy

enum class ErrorMode {
    independent,     // error flags land regardless of outcome (uninformative)
    failure_linked,  // error flags land only in failing episodes (informative)
};

struct PolicyParams {
    double p_wrong_arg = 0.0;   // per state-changing call: corrupt its target
    double p_extra_read = 0.0;  // per golden action: insert a redundant read first
    double p_error = 0.0;       // per eligible read call: flag it errored
    double p_duplicate = 0.0;   // per read call: re-issue it verbatim next turn
    ErrorMode error_mode = ErrorMode::failure_linked;
    std::uint64_t seed = 0;

    void validate() const {
        for (double p : {p_wrong_arg, p_extra_read, p_error, p_duplicate})
            if (p < 0.0 || p > 1.0)
                throw ValidationError("policy parameter outside [0, 1]");
    }
};

// Settings that reproduce the qualitative tier statistics of the airline
// analysis at desk scale: corrupted targets make gold strongly pass-linked
// and state-change fail-linked, near-universal extra reads keep read-only
// non-discriminative, and failure-linked errors make the error tier strongly
// fail-linked.
inline PolicyParams paper_patterned_params(std::uint64_t seed) {
    PolicyParams p;
    p.p_wrong_arg = 0.35;
    p.p_extra_read = 0.9;
    p.p_error = 0.8;
    p.p_duplicate = 0.0;
    p.error_mode = ErrorMode::failure_linked;
    p.seed = seed;
    return p;
}

// Simulates one episode against the task. The policy walks the golden
// sequence; with p_wrong_arg a state-changing call (and the lookup that
// precedes the first one) targets a different, non-golden reservation.
// Outcome compares the final world with the target state. Fully
// deterministic given (task, params.seed).
inline Rollout run_episode(const Task& task, const PolicyParams& params) {
    params.validate();
    SplitMix64 rng(params.seed);

    // effective targets for state-changing goldens, corrupted per p_wrong_arg
    std::vector<std::string> golden_targets;  // golden index -> effective target
    std::vector<std::string> non_golden_pool;
    {
        std::set<std::string> golden_ids;
        for (const GoldenAction& g : task.golden_actions)
            if (g.name != "get_reservation_details")
                golden_ids.insert(g.args.at("reservation_id").get<std::string>());
        for (const auto& [id, res] : task.initial.reservations)
            if (!golden_ids.count(id)) non_golden_pool.push_back(id);
    }
    golden_targets.resize(task.golden_actions.size());
    std::string first_state_target;
    for (std::size_t j = 0; j < task.golden_actions.size(); ++j) {
        const GoldenAction& g = task.golden_actions[j];
        if (g.name == "get_reservation_details") continue;
        std::string target = g.args.at("reservation_id").get<std::string>();
        if (!non_golden_pool.empty() && rng.chance(params.p_wrong_arg))
            target = non_golden_pool[rng.below(non_golden_pool.size())];
        golden_targets[j] = target;
        if (first_state_target.empty()) first_state_target = target;
    }

    // compose the turn sequence
    Rollout r;
    r.task_id = task.task_id;
    r.rollout_id = "ep-" + detail::hex_id(params.seed, 8);
    r.group_id = task.task_id;
    r.golden_actions = task.golden_actions;

    auto add_message = [&r](const std::string& text) {
        Turn t;
        t.index = r.turns.size();
        t.text = text;
        r.turns.push_back(std::move(t));
    };
    auto add_call = [&r](ToolCall call) {
        Turn t;
        t.index = r.turns.size();
        t.tool_calls.push_back(std::move(call));
        t.tool_errored.push_back(false);
        r.turns.push_back(std::move(t));
    };
    const std::vector<std::string> airports(task.initial.airports().begin(),
                                            task.initial.airports().end());
    auto random_search = [&]() -> ToolCall {
        const std::string& name =
            rng.chance(0.5) ? "search_direct_flight" : "search_onestop_flight";
        const std::string& origin = airports[rng.below(airports.size())];
        std::string destination = origin;
        while (destination == origin) destination = airports[rng.below(airports.size())];
        return ToolCall{name, {{"origin", origin}, {"destination", destination}}};
    };
    const ToolRegistry registry = default_registry();
    auto maybe_duplicate_last_read = [&]() {
        if (r.turns.empty() || r.turns.back().tool_calls.empty()) return;
        if (!registry.is_read_only(r.turns.back().tool_calls.front().name)) return;
        if (!rng.chance(params.p_duplicate)) return;
        add_call(r.turns[r.turns.size() - 1].tool_calls.front());
    };

    add_message("Let me check that for you.");
    for (std::size_t j = 0; j < task.golden_actions.size(); ++j) {
        const GoldenAction& g = task.golden_actions[j];
        if (rng.chance(params.p_extra_read)) {
            add_call(random_search());
            maybe_duplicate_last_read();
        }
        if (g.name == "get_reservation_details") {
            // the lookup mirrors whatever the first state call will target
            const std::string& target = first_state_target.empty()
                                            ? g.args.at("reservation_id").get<std::string>()
                                            : first_state_target;
            add_call(ToolCall{g.name, {{"reservation_id", target}}});
        } else {
            add_call(ToolCall{g.name, {{"reservation_id", golden_targets[j]}}});
        }
        maybe_duplicate_last_read();
    }
    add_message("Done. Anything else?");

    // outcome: replay state-changing calls on a copy of the initial world
    MicroWorld world = task.initial;
    for (const Turn& t : r.turns)
        for (const ToolCall& c : t.tool_calls)
            if (registry.is_state_changing(c.name)) apply_call(world, c);
    r.outcome = worlds_equal(world, task.target) ? 1 : 0;

    // error flags: read calls other than the exact golden lookup are
    // eligible; failure_linked mode only flags failing episodes
    const GoldenAction& lookup = task.golden_actions.front();
    for (Turn& t : r.turns) {
        for (std::size_t c = 0; c < t.tool_calls.size(); ++c) {
            const ToolCall& call = t.tool_calls[c];
            if (!registry.is_read_only(call.name)) continue;
            if (call.name == lookup.name && call.args == lookup.args) continue;
            if (params.error_mode == ErrorMode::failure_linked && r.outcome == 1) continue;
            if (rng.chance(params.p_error)) t.tool_errored[c] = true;
        }
    }
    return r;
}

// task_count groups of N rollouts each. Per-episode seeds derive from
// (seed, task index, rollout index), so generation is reproducible and
// episodes are independent.
inline RolloutBuffer generate_buffer(std::size_t task_count, std::size_t group_size,
                                     const PolicyParams& params, std::uint64_t seed) {
    if (group_size < 2)
        throw ArgumentError("generate_buffer: group size must be >= 2 for normalization");
    params.validate();
    RolloutBuffer buffer;
    buffer.reserve(task_count * group_size);
    for (std::size_t t = 0; t < task_count; ++t) {
        const Task task = build_task(derive_seed(seed, 0x7a5c, t));
        for (std::size_t i = 0; i < group_size; ++i) {
            PolicyParams episode_params = params;
            episode_params.seed = derive_seed(seed, t, i);
            Rollout r = run_episode(task, episode_params);
            r.group_id = "g" + std::to_string(t);
            r.rollout_id = "t" + std::to_string(t) + "_r" + std::to_string(i);
            buffer.push_back(std::move(r));
        }
    }
    return buffer;
}

}  // namespace turncredit
