#pragma once

#include "qmax/types.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace qmax::detail {

// Reads numeric/string parameters from a JSON object and rejects unknown keys.
struct ParamReader {
    const nlohmann::json& p;
    std::string owner;
    std::set<std::string> used;

    ParamReader(const nlohmann::json& params, std::string who) : p(params), owner(std::move(who)) {
        if (!p.is_object() && !p.is_null())
            throw Error(ErrorCode::config_invalid, owner + ": parameters must be an object");
    }
    bool has(const std::string& key) const { return p.is_object() && p.contains(key); }
    double get(const std::string& key, double def) {
        used.insert(key);
        if (!has(key)) return def;
        if (!p.at(key).is_number())
            throw Error(ErrorCode::config_invalid, owner + ": parameter '" + key + "' must be a number");
        return p.at(key).get<double>();
    }
    int get_int(const std::string& key, int def) {
        used.insert(key);
        if (!has(key)) return def;
        if (!p.at(key).is_number_integer())
            throw Error(ErrorCode::config_invalid, owner + ": parameter '" + key + "' must be an integer");
        return p.at(key).get<int>();
    }
    bool get_bool(const std::string& key, bool def) {
        used.insert(key);
        if (!has(key)) return def;
        if (!p.at(key).is_boolean())
            throw Error(ErrorCode::config_invalid, owner + ": parameter '" + key + "' must be a boolean");
        return p.at(key).get<bool>();
    }
    std::string get_str(const std::string& key, const std::string& def) {
        used.insert(key);
        if (!has(key)) return def;
        if (!p.at(key).is_string())
            throw Error(ErrorCode::config_invalid, owner + ": parameter '" + key + "' must be a string");
        return p.at(key).get<std::string>();
    }
    std::vector<double> get_vec(const std::string& key, std::vector<double> def, std::size_t len) {
        used.insert(key);
        if (!has(key)) return def;
        const auto& v = p.at(key);
        if (!v.is_array() || v.size() != len)
            throw Error(ErrorCode::config_invalid,
                        owner + ": parameter '" + key + "' must be an array of " + std::to_string(len) + " numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number())
                throw Error(ErrorCode::config_invalid, owner + ": parameter '" + key + "' must hold numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }
    void finish() const {
        if (!p.is_object()) return;
        for (auto it = p.begin(); it != p.end(); ++it)
            if (!used.count(it.key()))
                throw Error(ErrorCode::config_invalid, owner + ": unknown parameter '" + it.key() + "'");
    }
};

}  // namespace qmax::detail
