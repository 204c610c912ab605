#include "ckbert/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ckbert/encoder.hpp"
#include "ckbert/errors.hpp"

namespace ckbert {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string format_double(double d) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, ptr);
}

struct Field {
    std::string key;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define CKBERT_STR(name)                                                                              \
    Field{#name, [](TrainConfig& c, const std::string& v) { c.name = v; },                             \
          [](const TrainConfig& c) { return c.name; }}
#define CKBERT_DBL(name)                                                                              \
    Field{#name, [](TrainConfig& c, const std::string& v) { c.name = parse_double(#name, v); },       \
          [](const TrainConfig& c) { return format_double(c.name); }}
#define CKBERT_INT(name)                                                                              \
    Field{#name,                                                                                      \
          [](TrainConfig& c, const std::string& v) { c.name = parse_int<decltype(c.name)>(#name, v); }, \
          [](const TrainConfig& c) { return std::to_string(c.name); }}
#define CKBERT_BOOL(name)                                                                             \
    Field{#name, [](TrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); },         \
          [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        CKBERT_STR(preset),
        CKBERT_DBL(lr),
        CKBERT_INT(batch_size),
        CKBERT_INT(max_seq_len),
        CKBERT_DBL(mask_ratio),
        CKBERT_DBL(random_frac),
        CKBERT_DBL(tau),
        CKBERT_INT(negatives),
        CKBERT_INT(delta),
        CKBERT_INT(seed),
        CKBERT_INT(steps),
        CKBERT_STR(corpus),
        CKBERT_STR(annotations),
        CKBERT_STR(kg),
        CKBERT_STR(vocab),
        CKBERT_STR(output_dir),
        CKBERT_STR(resume),
        CKBERT_BOOL(include_pos_in_denom),
        CKBERT_BOOL(bert_style_replacement),
        CKBERT_STR(triple_pooling),
        CKBERT_DBL(adam_beta1),
        CKBERT_DBL(adam_beta2),
        CKBERT_DBL(adam_eps),
        CKBERT_INT(checkpoint_every),
        CKBERT_INT(keep_checkpoints),
        CKBERT_INT(workers),
    };
    return table;
}

#undef CKBERT_STR
#undef CKBERT_DBL
#undef CKBERT_INT
#undef CKBERT_BOOL

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(cfg, value);
            return;
        }
    }
    std::string valid;
    for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
}

void validate(const TrainConfig& c) {
    auto fail = [](const std::string& field, const std::string& bound) {
        throw ConfigError(field + " must be " + bound);
    };
    encoder_preset(c.preset);
    if (!(c.lr > 0.0)) fail("lr", "> 0");
    if (c.batch_size < 1) fail("batch_size", ">= 1");
    if (c.max_seq_len < 4) fail("max_seq_len", ">= 4");
    if (!(c.mask_ratio > 0.0 && c.mask_ratio < 1.0)) fail("mask_ratio", "in (0, 1)");
    if (!(c.random_frac >= 0.0 && c.random_frac <= 1.0)) fail("random_frac", "in [0, 1]");
    if (!(c.tau > 0.0)) fail("tau", "> 0");
    if (c.negatives < 1) fail("negatives", ">= 1");
    if (c.delta < 2) fail("delta", ">= 2");
    if (c.triple_pooling != "cls" && c.triple_pooling != "mean") fail("triple_pooling", "cls or mean");
    if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) fail("adam_beta1", "in [0, 1)");
    if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) fail("adam_beta2", "in [0, 1)");
    if (!(c.adam_eps > 0.0)) fail("adam_eps", "> 0");
    if (c.checkpoint_every < 1) fail("checkpoint_every", ">= 1");
    if (c.keep_checkpoints < 1) fail("keep_checkpoints", ">= 1");
    if (c.workers < 1) fail("workers", ">= 1");
}

TrainConfig parse_config(std::istream& file, const ConfigOverrides& overrides) {
    TrainConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
    validate(cfg);
    return cfg;
}

TrainConfig parse_config(const ConfigOverrides& overrides) {
    std::istringstream empty;
    return parse_config(empty, overrides);
}

TrainConfig parse_config_file(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in, overrides);
}

std::string render_config(const TrainConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
    return out;
}

}  // namespace ckbert
