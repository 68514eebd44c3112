#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wpad/errors.hpp"
#include "wpad/model.hpp"
#include "wpad/train.hpp"

namespace wpad {

// Plain `key = value` text with '#' comments. Duplicate keys are rejected,
// and so is any key nobody consumed (fail-fast against typos).
class KvReader {
public:
    static KvReader parse(std::istream& in) {
        KvReader r;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            }
            if (!r.kv_.emplace(key, value).second) {
                throw ConfigError("duplicate key '" + key + "'");
            }
        }
        return r;
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }

    double get_double(const std::string& key, double fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return parse_double(key, it->second);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return parse_u64(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        if (it->second == "true") return true;
        if (it->second == "false") return false;
        throw ConfigError("key '" + key + "': expected true or false, got '" + it->second + "'");
    }

    std::vector<std::size_t> get_size_list(const std::string& key,
                                           const std::vector<std::size_t>& fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        std::vector<std::size_t> out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            out.push_back(static_cast<std::size_t>(parse_u64(key, trim(item))));
        }
        if (out.empty()) throw ConfigError("key '" + key + "': empty list");
        return out;
    }

    // Throws if the input held keys no reader asked for.
    void finish() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : kv_) {
            if (!used_.count(k)) unknown.push_back(k);
        }
        if (!unknown.empty()) {
            std::string msg = "unknown config key(s):";
            for (const auto& k : unknown) msg += " '" + k + "'";
            throw ConfigError(msg);
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

private:
    static double parse_double(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
        }
    }
    static std::uint64_t parse_u64(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const unsigned long long u = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return u;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + v +
                              "'");
        }
    }

    std::map<std::string, std::string> kv_;
    std::set<std::string> used_;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_size_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace detail

inline void write_train_config(std::ostream& out, const TrainConfig& cfg) {
    out << "epochs = " << cfg.epochs << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "learning_rate = " << detail::fmt_double(cfg.learning_rate) << "\n";
    out << "momentum = " << detail::fmt_double(cfg.momentum) << "\n";
    out << "weight_decay = " << detail::fmt_double(cfg.weight_decay) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "feature_mode = " << to_string(cfg.feature_mode) << "\n";
    out << "wavelet_filter = " << cfg.wavelet_filter << "\n";
    out << "eval_every = " << cfg.eval_every << "\n";
    out << "train_frac = " << detail::fmt_double(cfg.train_frac) << "\n";
    out << "val_frac = " << detail::fmt_double(cfg.val_frac) << "\n";
}

inline TrainConfig read_train_config(KvReader& kv) {
    TrainConfig cfg;
    cfg.epochs = static_cast<std::size_t>(kv.get_u64("epochs", cfg.epochs));
    cfg.batch_size = static_cast<std::size_t>(kv.get_u64("batch_size", cfg.batch_size));
    cfg.learning_rate = kv.get_double("learning_rate", cfg.learning_rate);
    cfg.momentum = kv.get_double("momentum", cfg.momentum);
    cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.feature_mode =
        feature_mode_from_string(kv.get_string("feature_mode", to_string(cfg.feature_mode)));
    cfg.wavelet_filter = kv.get_string("wavelet_filter", cfg.wavelet_filter);
    FilterPair::by_name(cfg.wavelet_filter);  // validate
    cfg.eval_every = static_cast<std::size_t>(kv.get_u64("eval_every", cfg.eval_every));
    cfg.train_frac = kv.get_double("train_frac", cfg.train_frac);
    cfg.val_frac = kv.get_double("val_frac", cfg.val_frac);
    return cfg;
}

inline void write_model_config(std::ostream& out, const ModelConfig& cfg) {
    out << "input_shape = " << cfg.input_shape[0] << "," << cfg.input_shape[1] << ","
        << cfg.input_shape[2] << "\n";
    out << "num_classes = " << cfg.num_classes << "\n";
    out << "block_convs = " << detail::fmt_size_list(cfg.block_convs) << "\n";
    out << "channels = " << detail::fmt_size_list(cfg.channels) << "\n";
    out << "skip_mode = " << to_string(cfg.skip_mode) << "\n";
    out << "stem = " << (cfg.stem ? "true" : "false") << "\n";
    out << "maxpool_after = " << detail::fmt_size_list(cfg.maxpool_after) << "\n";
    out << "paper_default = " << (cfg.paper_default ? "true" : "false") << "\n";
}

// input_shape is optional here: the CLI derives it from the images and the
// feature mode, while checkpoints always store it.
inline ModelConfig read_model_config(KvReader& kv) {
    ModelConfig cfg;
    const auto shape = kv.get_size_list(
        "input_shape", {cfg.input_shape[0], cfg.input_shape[1], cfg.input_shape[2]});
    if (shape.size() != 3) throw ConfigError("input_shape must be C,H,W");
    cfg.input_shape = {shape[0], shape[1], shape[2]};
    cfg.num_classes = static_cast<std::size_t>(kv.get_u64("num_classes", cfg.num_classes));
    cfg.block_convs = kv.get_size_list("block_convs", cfg.block_convs);
    cfg.channels = kv.get_size_list("channels", cfg.channels);
    cfg.skip_mode = skip_mode_from_string(kv.get_string("skip_mode", to_string(cfg.skip_mode)));
    cfg.stem = kv.get_bool("stem", cfg.stem);
    cfg.maxpool_after = kv.get_size_list("maxpool_after", cfg.maxpool_after);
    cfg.paper_default = kv.get_bool("paper_default", cfg.paper_default);
    return cfg;
}

}  // namespace wpad
