#pragma once

#include <string>

#include <json.hpp>

#include "gridshock/common.hpp"

namespace gridshock::detail {

using nlohmann::json;

inline const json& member(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(ctx, "missing required field '" + key + "'");
    return *it;
}

inline double num_field(const json& j, const std::string& key, const std::string& ctx) {
    const json& v = member(j, key, ctx);
    if (!v.is_number()) throw ParseError(ctx + "." + key, "expected a number");
    return v.get<double>();
}

inline double num_or(const json& j, const std::string& key, double fallback,
                     const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) throw ParseError(ctx + "." + key, "expected a number");
    return it->get<double>();
}

inline int int_field(const json& j, const std::string& key, const std::string& ctx) {
    const json& v = member(j, key, ctx);
    if (!v.is_number_integer()) throw ParseError(ctx + "." + key, "expected an integer");
    return v.get<int>();
}

inline int int_or(const json& j, const std::string& key, int fallback, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer()) throw ParseError(ctx + "." + key, "expected an integer");
    return it->get<int>();
}

inline bool bool_or(const json& j, const std::string& key, bool fallback,
                    const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_boolean()) throw ParseError(ctx + "." + key, "expected a boolean");
    return it->get<bool>();
}

inline std::string str_or(const json& j, const std::string& key, const std::string& fallback,
                          const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_string()) throw ParseError(ctx + "." + key, "expected a string");
    return it->get<std::string>();
}

}  // namespace gridshock::detail
