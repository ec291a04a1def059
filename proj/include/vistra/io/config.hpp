#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "vistra/common.hpp"

namespace vistra {

// Sectioned key=value run configuration:
//
//   # comment
//   [model]
//   preset = hlg-tiny
//
// Unknown sections or keys are rejected with file:line messages. Values are
// scalars or comma lists; consumers pull typed values through the getters,
// which also carry line information into later validation errors.
class RunConfig {
public:
    struct Item {
        std::string value;
        int line = 0;
    };

    std::string path;

    static const std::map<std::string, std::set<std::string>>& schema() {
        static const std::map<std::string, std::set<std::string>> s = {
            {"model",
             {"kind",       "preset",       "backbone",     "task",         "num_classes",  "input",
              "patch",      "layers",       "hidden",       "heads",        "mlp_ratio",    "decoder",
              "mla_streams","aux",          "pup_channels", "channels",     "depths",       "window",
              "dilations",  "mlp_hidden",   "drop_path",    "seg_window",   "seg_dilation", "seg_pup_channels",
              "global_bias","window_embed", "aux_weight"}},
            {"data", {"kind", "count", "height", "width", "classes", "seed", "dir"}},
            {"recipe",
             {"optimizer", "base_lr", "iters", "batch", "momentum", "weight_decay", "power", "warmup",
              "min_lr", "aux_weight", "eval_interval", "checkpoint_interval", "seed", "deterministic",
              "crop", "resize_min", "resize_max", "augment"}},
            {"output", {"dir"}},
        };
        return s;
    }

    static RunConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse_text(text, path);
    }

    static RunConfig parse_text(const std::string& text, const std::string& path = "<config>") {
        RunConfig cfg;
        cfg.path = path;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError(loc(path, lineno) + "unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                if (!schema().count(section))
                    throw ConfigError(loc(path, lineno) + "unknown section [" + section + "]");
                cfg.sections_[section];  // touch so empty sections exist
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError(loc(path, lineno) + "expected key = value");
            if (section.empty()) throw ConfigError(loc(path, lineno) + "key outside any [section]");
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            if (!schema().at(section).count(key))
                throw ConfigError(loc(path, lineno) + "unknown key '" + key + "' in [" + section + "]");
            if (cfg.sections_[section].count(key))
                throw ConfigError(loc(path, lineno) + "duplicate key '" + key + "' in [" + section + "]");
            cfg.sections_[section][key] = {value, lineno};
        }
        if (!cfg.sections_.count("model"))
            throw ConfigError(path +
                              ": missing required section [model] "
                              "(required fields: model.preset or model.kind; for train runs also "
                              "[recipe] optimizer, base_lr, iters and [output] dir)");
        return cfg;
    }

    bool has(const std::string& section, const std::string& key) const {
        auto it = sections_.find(section);
        return it != sections_.end() && it->second.count(key);
    }

    std::string get_str(const std::string& section, const std::string& key, const std::string& def = "") const {
        auto* item = find(section, key);
        return item ? item->value : def;
    }

    std::string require_str(const std::string& section, const std::string& key) const {
        auto* item = find(section, key);
        if (!item)
            throw ConfigError(path + ": missing required field '" + key + "' in [" + section + "]");
        return item->value;
    }

    int64_t get_int(const std::string& section, const std::string& key, int64_t def) const {
        auto* item = find(section, key);
        if (!item) return def;
        return parse_int(*item, section, key);
    }

    double get_double(const std::string& section, const std::string& key, double def) const {
        auto* item = find(section, key);
        if (!item) return def;
        try {
            size_t pos = 0;
            double v = std::stod(item->value, &pos);
            if (pos != item->value.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError(loc(path, item->line) + "expected number for " + section + "." + key + ", got '" +
                              item->value + "'");
        }
    }

    bool get_bool(const std::string& section, const std::string& key, bool def) const {
        auto* item = find(section, key);
        if (!item) return def;
        if (item->value == "true" || item->value == "on" || item->value == "1") return true;
        if (item->value == "false" || item->value == "off" || item->value == "0") return false;
        throw ConfigError(loc(path, item->line) + "expected true/false for " + section + "." + key);
    }

    std::vector<int64_t> get_int_list(const std::string& section, const std::string& key,
                                      std::vector<int64_t> def = {}) const {
        auto* item = find(section, key);
        if (!item) return def;
        std::vector<int64_t> out;
        std::istringstream ss(item->value);
        std::string part;
        while (std::getline(ss, part, ',')) {
            Item tmp{trim(part), item->line};
            out.push_back(parse_int(tmp, section, key));
        }
        return out;
    }

    int line_of(const std::string& section, const std::string& key) const {
        auto* item = find(section, key);
        return item ? item->line : 0;
    }

    [[noreturn]] void fail_at(const std::string& section, const std::string& key, const std::string& msg) const {
        auto* item = find(section, key);
        throw ConfigError((item ? loc(path, item->line) : path + ": ") + msg);
    }

    // Canonical "key=value" dump of one section, for fingerprinting.
    std::string canonical_section(const std::string& section) const {
        std::string out;
        auto it = sections_.find(section);
        if (it == sections_.end()) return out;
        for (const auto& [k, v] : it->second) out += k + "=" + v.value + "\n";
        return out;
    }

    uint64_t model_fingerprint() const { return fnv1a64(canonical_section("model")); }

private:
    static std::string trim(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r");
        size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }
    static std::string loc(const std::string& path, int line) {
        return path + ":" + std::to_string(line) + ": ";
    }
    const Item* find(const std::string& section, const std::string& key) const {
        auto it = sections_.find(section);
        if (it == sections_.end()) return nullptr;
        auto jt = it->second.find(key);
        return jt == it->second.end() ? nullptr : &jt->second;
    }
    int64_t parse_int(const Item& item, const std::string& section, const std::string& key) const {
        try {
            size_t pos = 0;
            int64_t v = std::stoll(item.value, &pos);
            if (pos != item.value.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError(loc(path, item.line) + "expected integer for " + section + "." + key + ", got '" +
                              item.value + "'");
        }
    }

    std::map<std::string, std::map<std::string, Item>> sections_;
};

}  // namespace vistra
