#pragma once

// Line-oriented UTF-8 config: `section.key = value`, `#` comments, strict
// unknown-key rejection. Silent typos would invalidate inequality checks, so
// every key must be registered by the consuming command.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grid.hpp"

namespace hjlab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Config {
public:
    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path);
    }

    static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip(line);
            if (s.empty() || s[0] == '#') continue;
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected 'section.key = value'");
            std::string key = strip(s.substr(0, eq));
            std::string value = strip(s.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (cfg.values_.count(key))
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
            cfg.values_[key] = value;
            cfg.lines_[key] = lineno;
        }
        return cfg;
    }

    void apply_override(const std::string& assignment) {
        auto eq = assignment.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must look like key=value: " + assignment);
        values_[strip(assignment.substr(0, eq))] = strip(assignment.substr(eq + 1));
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
        return it->second;
    }
    std::string get_string(const std::string& key, const std::string& dflt) const {
        auto it = values_.find(key);
        return it == values_.end() ? dflt : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double dflt) const {
        return has(key) ? get_double(key) : dflt;
    }
    long get_int(const std::string& key) const {
        double v = get_double(key);
        long l = std::lround(v);
        if (std::abs(v - l) > 1e-12)
            throw ConfigError(where(key) + ": expected an integer for '" + key + "'");
        return l;
    }
    long get_int(const std::string& key, long dflt) const {
        return has(key) ? get_int(key) : dflt;
    }

    // every present key must belong to the allowed set
    void require_known(const std::set<std::string>& allowed) const {
        for (const auto& [k, v] : values_) {
            if (!allowed.count(k))
                throw ConfigError(where(k) + ": unknown key '" + k + "'");
        }
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string strip(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    double to_double(const std::string& key, const std::string& v) const {
        try {
            size_t pos = 0;
            double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("junk");
            return d;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": not a number: '" + v + "'");
        }
    }
    std::string where(const std::string& key) const {
        auto it = lines_.find(key);
        if (it == lines_.end()) return origin_;
        return origin_ + ":" + std::to_string(it->second);
    }

    std::string origin_ = "<empty>";
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
};

// grid.* keys shared by the solver-facing commands
inline GridSpec grid_from_config(const Config& cfg) {
    GridSpec g;
    g.d = static_cast<int>(cfg.get_int("grid.d", 1));
    g.nx = static_cast<int>(cfg.get_int("grid.nx"));
    g.nt = static_cast<int>(cfg.get_int("grid.nt"));
    g.t_lo = cfg.get_double("grid.t_lo", 0.0);
    g.t_hi = cfg.get_double("grid.t_hi", 1.0);
    g.x_lo = {cfg.get_double("grid.x1_lo", 0.0), cfg.get_double("grid.x2_lo", 0.0)};
    g.x_hi = {cfg.get_double("grid.x1_hi", 1.0), cfg.get_double("grid.x2_hi", 1.0)};
    std::string b = cfg.get_string("grid.boundary", "clamped");
    if (b == "clamped") g.boundary = Boundary::Clamped;
    else if (b == "periodic") g.boundary = Boundary::Periodic;
    else throw ConfigError("grid.boundary must be 'clamped' or 'periodic'");
    g.validate();
    return g;
}

inline const std::set<std::string>& grid_config_keys() {
    static const std::set<std::string> keys{"grid.d",     "grid.nx",    "grid.nt",
                                            "grid.t_lo",  "grid.t_hi",  "grid.x1_lo",
                                            "grid.x1_hi", "grid.x2_lo", "grid.x2_hi",
                                            "grid.boundary"};
    return keys;
}

}  // namespace hjlab
