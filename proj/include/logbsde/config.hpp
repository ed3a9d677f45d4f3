#pragma once

#include <json.hpp>
#include <string>

#include "logbsde/common.hpp"
#include "logbsde/rng.hpp"

namespace logbsde {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Schema-by-example validation: `user` may only carry keys that exist in
/// `defaults` with the same JSON type (numbers are interchangeable).
/// Unknown keys are rejected with their full path.
inline void validate_against(const Json& defaults, const Json& user, const std::string& path) {
    if (!user.is_object()) {
        if (defaults.type() != user.type() &&
            !(defaults.is_number() && user.is_number()))
            fail("config-error", "wrong type at " + (path.empty() ? "<root>" : path));
        return;
    }
    require(defaults.is_object(), "config-error",
            "unexpected object at " + (path.empty() ? "<root>" : path));
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string child = path.empty() ? it.key() : path + "." + it.key();
        if (!defaults.contains(it.key())) fail("config-error", "unknown key: " + child);
        validate_against(defaults.at(it.key()), it.value(), child);
    }
}

/// Deep merge of overrides into defaults (objects merge, scalars replace).
inline Json merge_config(Json defaults, const Json& overrides) {
    if (!overrides.is_object() || !defaults.is_object()) return overrides;
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        if (defaults.contains(it.key()))
            defaults[it.key()] = merge_config(defaults.at(it.key()), it.value());
        else
            defaults[it.key()] = it.value();
    }
    return defaults;
}

/// Stable digest of the resolved config (output directory excluded):
/// FNV-1a over the canonical key-sorted dump.
inline std::string config_hash(Json config) {
    config.erase("out_dir");
    const std::string dump = config.dump();
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : dump) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ResultRecord {
    std::string scenario;
    std::string config_hash;
    Json metrics = Json::object();
    Json verdicts = Json::object();  // name -> "pass" | "fail" | "inconclusive"
    Real wall_time_s = 0.0;
    std::vector<std::string> artifacts;

    /// Worst verdict: pass < inconclusive < fail.
    std::string overall() const {
        bool inconclusive = false;
        for (const auto& [key, value] : verdicts.items()) {
            if (value == "fail") return "fail";
            if (value == "inconclusive") inconclusive = true;
        }
        return inconclusive ? "inconclusive" : "pass";
    }

    Json to_json() const {
        Json j;
        j["scenario"] = scenario;
        j["config_hash"] = config_hash;
        j["metrics"] = metrics;
        j["verdicts"] = verdicts;
        j["wall_time_s"] = wall_time_s;
        j["artifacts"] = artifacts;
        return j;
    }
};

}  // namespace logbsde
