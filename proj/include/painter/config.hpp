#pragma once

#include <map>
#include <sstream>
#include <string>

#include "painter/common.hpp"

namespace painter {

// Plain-text configuration: "key = value" lines, "[table]" headers nesting
// keys as "table.key", "#" comments. Values stay strings until read.
class Config {
  public:
    Config() = default;

    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip(line.substr(0, line.find('#')));
            if (s.empty()) continue;
            if (s.front() == '[') {
                require(s.back() == ']', "config line " + std::to_string(lineno) + ": bad table header");
                section = strip(s.substr(1, s.size() - 2));
                continue;
            }
            auto eq = s.find('=');
            require(eq != std::string::npos, "config line " + std::to_string(lineno) + ": missing '='");
            std::string key = strip(s.substr(0, eq));
            std::string value = strip(s.substr(eq + 1));
            require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    static Config load(const std::filesystem::path& path) {
        require(std::filesystem::exists(path), "missing config file: " + path.string());
        return parse(read_file(path));
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw error("config key " + key + ": not a number: " + it->second);
        }
    }

    long get_int(const std::string& key, long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (...) {
            throw error("config key " + key + ": not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw error("config key " + key + ": not a boolean: " + it->second);
    }

    // Keys within a table, e.g. table "train.task_weights".
    std::vector<std::pair<std::string, std::string>> table(const std::string& prefix) const {
        std::vector<std::pair<std::string, std::string>> out;
        std::string p = prefix + ".";
        for (const auto& [k, v] : values_)
            if (k.rfind(p, 0) == 0) out.emplace_back(k.substr(p.size()), v);
        return out;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

  private:
    static std::string strip(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace painter
