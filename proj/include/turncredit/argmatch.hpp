#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "turncredit/arg_value.hpp"
#include "turncredit/rollout.hpp"

namespace turncredit {

// ---------------------------------------------------------------------------
// Canonical normalization
//
// Semantically equivalent tool calls differ in key ordering, numeric type
// representation ("123" vs 123) and empty-value padding. normalize_value
// rewrites an argument tree into a canonical form so that structural
// comparison sees through all three.

namespace detail {

// Accepts [+-]?(0|[1-9][0-9]*)(.[0-9]+)? and nothing else. Leading-zero
// strings like "007" are identifiers, not numbers: coercing them would not
// round-trip. Exponents are likewise left alone.
inline std::optional<ArgValue> coerce_numeric_string(const std::string& s) {
    std::size_t i = 0;
    bool negative = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
        negative = (s[i] == '-');
        ++i;
    }
    const std::size_t digits_begin = i;
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    if (s[i] == '0') {
        ++i;
        if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    } else {
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    }
    const std::size_t digits_end = i;
    bool fractional = false;
    if (i < s.size() && s[i] == '.') {
        fractional = true;
        ++i;
        if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    }
    if (i != s.size()) return std::nullopt;

    if (!fractional) {
        std::uint64_t magnitude = 0;
        auto [ptr, ec] = std::from_chars(s.data() + digits_begin, s.data() + digits_end, magnitude);
        if (ec != std::errc() || ptr != s.data() + digits_end) return std::nullopt;
        if (negative) {
            if (magnitude > static_cast<std::uint64_t>(INT64_MAX) + 1) return std::nullopt;
            if (magnitude == static_cast<std::uint64_t>(INT64_MAX) + 1) return ArgValue(INT64_MIN);
            return ArgValue(-static_cast<std::int64_t>(magnitude));
        }
        if (magnitude <= static_cast<std::uint64_t>(INT64_MAX))
            return ArgValue(static_cast<std::int64_t>(magnitude));
        return ArgValue(magnitude);
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data() + (negative || s[0] == '+' ? 1 : 0),
                                     s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value))
        return std::nullopt;
    return ArgValue(negative ? -value : value);
}

inline bool is_empty_value(const ArgValue& v) {
    return v.is_null() || (v.is_string() && v.get_ref<const std::string&>().empty()) ||
           (v.is_array() && v.empty()) || (v.is_object() && v.empty());
}

}  // namespace detail

// Canonical form, applied recursively bottom-up:
//   (a) strings that parse as finite numbers become numbers;
//   (b) map entries / list elements whose value is null, "", [] or {} are dropped;
//   (c) lists whose elements are all maps are sorted by canonical serialization.
// Idempotent: normalize(normalize(v)) == normalize(v).
inline ArgValue normalize_value(const ArgValue& v) {
    switch (v.type()) {
        case ArgValue::value_t::string: {
            if (auto num = detail::coerce_numeric_string(v.get_ref<const std::string&>()))
                return *num;
            return v;
        }
        case ArgValue::value_t::array: {
            ArgValue out = ArgValue::array();
            bool all_objects = true;
            for (const ArgValue& e : v) {
                ArgValue ne = normalize_value(e);
                if (detail::is_empty_value(ne)) continue;
                all_objects = all_objects && ne.is_object();
                out.push_back(std::move(ne));
            }
            if (all_objects && out.size() > 1) {
                std::vector<std::pair<std::string, ArgValue>> keyed;
                keyed.reserve(out.size());
                for (ArgValue& e : out) keyed.emplace_back(canonical_text(e), std::move(e));
                std::sort(keyed.begin(), keyed.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                out = ArgValue::array();
                for (auto& [key, e] : keyed) out.push_back(std::move(e));
            }
            return out;
        }
        case ArgValue::value_t::object: {
            ArgValue out = ArgValue::object();
            for (const auto& [key, val] : v.items()) {
                ArgValue nv = normalize_value(val);
                if (detail::is_empty_value(nv)) continue;
                out[key] = std::move(nv);
            }
            return out;
        }
        default:
            return v;
    }
}

// ---------------------------------------------------------------------------
// Structural equality with numeric tolerance

namespace detail {

inline bool is_integral_number(const ArgValue& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) return true;
    if (!v.is_number_float()) return false;
    double d = v.get<double>();
    return std::isfinite(d) && std::trunc(d) == d;
}

// long double holds every int64/uint64 exactly on x86-64, so integral
// values of mixed storage types compare exactly.
inline long double integral_magnitude(const ArgValue& v) {
    if (v.is_number_unsigned()) return static_cast<long double>(v.get<std::uint64_t>());
    if (v.is_number_integer()) return static_cast<long double>(v.get<std::int64_t>());
    return static_cast<long double>(v.get<double>());
}

inline bool numbers_equal(const ArgValue& a, const ArgValue& b) {
    if (is_integral_number(a) && is_integral_number(b))
        return integral_magnitude(a) == integral_magnitude(b);
    const double x = a.get<double>();
    const double y = b.get<double>();
    if (x == y) return true;
    const double scale = std::max(std::abs(x), std::abs(y));
    return std::abs(x - y) <= 1e-9 * scale;
}

// Assumes both sides are already normalized.
inline bool equal_normalized(const ArgValue& a, const ArgValue& b) {
    if (a.is_number() && b.is_number()) return numbers_equal(a, b);
    if (a.type() != b.type()) return false;
    switch (a.type()) {
        case ArgValue::value_t::array: {
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (!equal_normalized(a[i], b[i])) return false;
            return true;
        }
        case ArgValue::value_t::object: {
            if (a.size() != b.size()) return false;
            auto ia = a.items().begin();
            auto ib = b.items().begin();
            for (; ia != a.items().end(); ++ia, ++ib) {
                if (ia.key() != ib.key()) return false;
                if (!equal_normalized(ia.value(), ib.value())) return false;
            }
            return true;
        }
        default:
            return a == b;
    }
}

}  // namespace detail

// Deep comparison: true iff both values normalize to the same structure.
// Numbers compare exactly when both are integral, with relative tolerance
// 1e-9 otherwise, so IDs never fuzzy-match but prices survive representation
// noise.
inline bool deep_equal(const ArgValue& a, const ArgValue& b) {
    return detail::equal_normalized(normalize_value(a), normalize_value(b));
}

// ---------------------------------------------------------------------------
// Golden action matching

struct MatchScore {
    enum class Kind { exact, soft, none };
    Kind kind = Kind::none;
    double score = 0.0;
    std::optional<std::size_t> matched_golden_index;

    bool is_exact() const { return kind == Kind::exact; }
    bool is_soft() const { return kind == Kind::soft; }
};

// Scores one call against one golden action:
//   exact (1.0)            names equal and args deep-equal;
//   soft (0.5 + 0.5*|I|/|args*|, capped at 0.99)
//                          names equal and the key-wise intersection I
//                          (keys in both whose normalized values are
//                          deep-equal) is non-empty;
//   none (0.0)             otherwise.
// A golden action with no (post-normalization) arguments either matches
// exactly or conveys nothing partial, so it never scores soft.
inline MatchScore match_call(const ToolCall& call, const GoldenAction& golden) {
    MatchScore none;
    if (call.name != golden.name) return none;
    const ArgValue call_args = normalize_value(call.args);
    const ArgValue golden_args = normalize_value(golden.args);
    if (detail::equal_normalized(call_args, golden_args))
        return MatchScore{MatchScore::Kind::exact, 1.0, std::nullopt};
    if (!golden_args.is_object() || golden_args.empty() || !call_args.is_object()) return none;

    std::size_t overlap = 0;
    for (const auto& [key, golden_val] : golden_args.items()) {
        auto it = call_args.find(key);
        if (it != call_args.end() && detail::equal_normalized(*it, golden_val)) ++overlap;
    }
    if (overlap == 0) return none;
    const double raw = 0.5 + 0.5 * static_cast<double>(overlap) /
                                 static_cast<double>(golden_args.size());
    return MatchScore{MatchScore::Kind::soft, std::min(raw, 0.99), std::nullopt};
}

// Per-call match scores for a whole rollout plus golden consumption flags.
struct GoldenAlignment {
    std::vector<std::vector<MatchScore>> per_turn;  // [turn][call]
    std::vector<bool> golden_consumed;

    const MatchScore& at(std::size_t turn, std::size_t call) const {
        return per_turn[turn][call];
    }
};

// Greedy in-order assignment: a single left-to-right pass over tool calls.
// Each call takes the earliest unconsumed golden it matches exactly
// (consuming it); failing that, its best soft score against any unconsumed
// golden (ties broken by earliest golden index). A call that only matches an
// already-consumed golden scores none here; the tier classifier treats such
// repeats as duplicates.
inline GoldenAlignment align_golden(const Rollout& r) {
    GoldenAlignment alignment;
    alignment.golden_consumed.assign(r.golden_actions.size(), false);
    alignment.per_turn.reserve(r.turns.size());

    for (const Turn& turn : r.turns) {
        std::vector<MatchScore> scores;
        scores.reserve(turn.tool_calls.size());
        for (const ToolCall& call : turn.tool_calls) {
            MatchScore best;  // none
            std::optional<std::size_t> exact_index;
            for (std::size_t g = 0; g < r.golden_actions.size(); ++g) {
                if (alignment.golden_consumed[g]) continue;
                MatchScore m = match_call(call, r.golden_actions[g]);
                if (m.is_exact()) {
                    exact_index = g;
                    break;
                }
                if (m.is_soft() && m.score > best.score) {
                    best = m;
                    best.matched_golden_index = g;
                }
            }
            if (exact_index) {
                alignment.golden_consumed[*exact_index] = true;
                scores.push_back(MatchScore{MatchScore::Kind::exact, 1.0, exact_index});
            } else {
                scores.push_back(best);
            }
        }
        alignment.per_turn.push_back(std::move(scores));
    }
    return alignment;
}

}  // namespace turncredit
