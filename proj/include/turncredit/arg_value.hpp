#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

namespace turncredit {

// Tool-call arguments are nested JSON-like trees: null, bool, number
// (exact integer or finite decimal), string, array, or object with unique
// string keys. nlohmann::json gives us exactly that value model plus exact
// integer/decimal round-tripping; objects are std::map-backed, so canonical
// serialization (sorted keys) falls out of dump().
using ArgValue = nlohmann::json;

// Canonical text form: sorted keys, shortest round-trip numbers. Used for
// sorting lists of objects and for deterministic file output.
inline std::string canonical_text(const ArgValue& v) { return v.dump(); }

// Collects invariant violations instead of throwing, so callers can report
// every problem at once.
inline void collect_arg_value_violations(const ArgValue& v, const std::string& path,
                                         std::vector<std::string>& out) {
    switch (v.type()) {
        case ArgValue::value_t::number_float:
            if (!std::isfinite(v.get<double>()))
                out.push_back("ArgValue finiteness at " + path);
            break;
        case ArgValue::value_t::array: {
            std::size_t i = 0;
            for (const auto& e : v)
                collect_arg_value_violations(e, path + "[" + std::to_string(i++) + "]", out);
            break;
        }
        case ArgValue::value_t::object:
            for (const auto& [key, val] : v.items())
                collect_arg_value_violations(val, path + "." + key, out);
            break;
        case ArgValue::value_t::binary:
        case ArgValue::value_t::discarded:
            out.push_back("ArgValue kind at " + path);
            break;
        default:
            break;  // null, bool, string, exact integers are always fine
    }
}

inline bool arg_value_valid(const ArgValue& v) {
    std::vector<std::string> violations;
    collect_arg_value_violations(v, "$", violations);
    return violations.empty();
}

}  // namespace turncredit
