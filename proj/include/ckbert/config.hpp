#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace ckbert {

struct TrainConfig {
    std::string preset = "tiny";
    double lr = 5e-5;
    std::size_t batch_size = 20;
    std::size_t max_seq_len = 128;
    double mask_ratio = 0.15;
    double random_frac = 0.40;
    double tau = 0.5;
    std::size_t negatives = 3;
    std::uint32_t delta = 3;
    std::uint64_t seed = 42;
    std::size_t steps = 1000;

    std::string corpus;
    std::string annotations;  // optional sidecar; no spans when empty
    std::string kg;
    std::string vocab;
    std::string output_dir = "run";
    std::string resume;  // checkpoint to continue from

    bool include_pos_in_denom = false;
    bool bert_style_replacement = false;
    std::string triple_pooling = "cls";

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    std::size_t checkpoint_every = 100;
    std::size_t keep_checkpoints = 3;
    std::size_t workers = 1;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

std::vector<std::string> config_keys();

// Throws ConfigError for unknown keys (listing the valid ones) and
// unparsable values.
void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);

// Throws ConfigError naming the field and the violated bound.
void validate(const TrainConfig& cfg);

// `key = value` lines; '#' starts a comment. Overrides win over the file,
// the file wins over defaults.
TrainConfig parse_config(std::istream& file, const ConfigOverrides& overrides = {});
TrainConfig parse_config(const ConfigOverrides& overrides);
TrainConfig parse_config_file(const std::string& path, const ConfigOverrides& overrides = {});

// Fully resolved config in the same key = value format.
std::string render_config(const TrainConfig& cfg);

}  // namespace ckbert
