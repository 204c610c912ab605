#pragma once
// Checkpoint container (little-endian):
//
//   magic        8 bytes  "CKBTCKPT"
//   version      u32      kCheckpointVersion
//   header_len   u32      followed by header_len bytes of `key = value` text
//                         (encoder config, step, free-form metadata)
//   array_count  u32
//   per array:   u32 name_len, name bytes, u32 ndim, ndim x u32 dims,
//                prod(dims) x f32 values
//
// Optimizer moments are stored as arrays named "adam.m.<param>" and
// "adam.v.<param>".

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ckbert/encoder.hpp"
#include "ckbert/optimizer.hpp"

namespace ckbert {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

struct CheckpointData {
    std::uint32_t version = kCheckpointVersion;
    std::map<std::string, std::string> header;
    std::vector<NamedArray> arrays;
};

void write_checkpoint_data(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint_data(const std::string& path);  // rejects version mismatch

struct Checkpoint {
    Parameters<float> params;
    std::optional<AdamState<float>> adam;
    std::uint64_t step = 0;
    std::map<std::string, std::string> meta;  // header entries that are not encoder fields
};

// Written to a temporary file first, then renamed into place.
void save_checkpoint(const std::string& path, const Parameters<float>& params, const AdamState<float>* adam,
                     std::uint64_t step, const std::map<std::string, std::string>& meta = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ckbert
