#include "ckbert/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ckbert/errors.hpp"

namespace ckbert {

namespace {

constexpr char kMagic[8] = {'C', 'K', 'B', 'T', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::string get_bytes(std::istream& in, std::size_t n) {
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint truncated");
    return s;
}

std::map<std::string, std::string> parse_header(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        out[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

const char* const kEncoderKeys[] = {"encoder.name",     "encoder.layers",    "encoder.heads",
                                    "encoder.head_dim", "encoder.ff_dim",    "encoder.model_dim",
                                    "encoder.vocab_size", "encoder.max_len"};

std::size_t header_size(const std::map<std::string, std::string>& h, const std::string& key) {
    auto it = h.find(key);
    if (it == h.end()) throw DataError("checkpoint header lacks " + key);
    return std::stoull(it->second);
}

}  // namespace

void write_checkpoint_data(const std::string& path, const CheckpointData& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof kMagic);
    put_u32(out, data.version);
    std::string header;
    for (const auto& [k, v] : data.header) header += k + " = " + v + "\n";
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put_u32(out, static_cast<std::uint32_t>(data.arrays.size()));
    for (const auto& a : data.arrays) {
        put_u32(out, static_cast<std::uint32_t>(a.name.size()));
        out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
        for (auto d : a.dims) put_u32(out, d);
        for (float f : a.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

CheckpointData read_checkpoint_data(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    if (get_bytes(in, sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
        throw DataError("not a checkpoint file: " + path);
    }
    CheckpointData data;
    data.version = get_u32(in);
    if (data.version != kCheckpointVersion) {
        throw DataError("checkpoint format version " + std::to_string(data.version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    data.header = parse_header(get_bytes(in, get_u32(in)));
    const auto count = get_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = get_bytes(in, get_u32(in));
        const auto ndim = get_u32(in);
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            a.dims.push_back(get_u32(in));
            n *= a.dims.back();
        }
        a.values.resize(n);
        for (auto& f : a.values) f = std::bit_cast<float>(get_u32(in));
        data.arrays.push_back(std::move(a));
    }
    return data;
}

void save_checkpoint(const std::string& path, const Parameters<float>& params, const AdamState<float>* adam,
                     std::uint64_t step, const std::map<std::string, std::string>& meta) {
    CheckpointData data;
    data.header = meta;
    const auto& c = params.config;
    data.header["encoder.name"] = c.name;
    data.header["encoder.layers"] = std::to_string(c.layers);
    data.header["encoder.heads"] = std::to_string(c.heads);
    data.header["encoder.head_dim"] = std::to_string(c.head_dim);
    data.header["encoder.ff_dim"] = std::to_string(c.ff_dim);
    data.header["encoder.model_dim"] = std::to_string(c.model_dim);
    data.header["encoder.vocab_size"] = std::to_string(c.vocab_size);
    data.header["encoder.max_len"] = std::to_string(c.max_len);
    data.header["step"] = std::to_string(step);
    data.header["has_optimizer"] = adam ? "1" : "0";
    if (adam) data.header["optimizer.step"] = std::to_string(adam->step);

    auto add = [&data](const std::string& prefix, const Parameters<float>& p) {
        p.for_each([&](const std::string& name, const Tensor<float>& t) {
            data.arrays.push_back({prefix + name,
                                   {static_cast<std::uint32_t>(t.rows()), static_cast<std::uint32_t>(t.cols())},
                                   {t.values().begin(), t.values().end()}});
        });
    };
    add("", params);
    if (adam) {
        add("adam.m.", adam->m);
        add("adam.v.", adam->v);
    }
    const std::string tmp = path + ".tmp";
    write_checkpoint_data(tmp, data);
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    auto data = read_checkpoint_data(path);
    EncoderConfig c;
    c.name = data.header.count("encoder.name") ? data.header.at("encoder.name") : "";
    c.layers = header_size(data.header, "encoder.layers");
    c.heads = header_size(data.header, "encoder.heads");
    c.head_dim = header_size(data.header, "encoder.head_dim");
    c.ff_dim = header_size(data.header, "encoder.ff_dim");
    c.model_dim = header_size(data.header, "encoder.model_dim");
    c.vocab_size = header_size(data.header, "encoder.vocab_size");
    c.max_len = header_size(data.header, "encoder.max_len");

    Checkpoint ck;
    ck.params = Parameters<float>::zeros(c);
    ck.step = header_size(data.header, "step");
    const bool has_opt = data.header.count("has_optimizer") && data.header.at("has_optimizer") == "1";
    if (has_opt) {
        ck.adam = AdamState<float>::zeros(c);
        ck.adam->step = header_size(data.header, "optimizer.step");
    }

    std::map<std::string, const NamedArray*> by_name;
    for (const auto& a : data.arrays) by_name[a.name] = &a;
    auto fill = [&by_name](const std::string& prefix, Parameters<float>& p) {
        p.for_each([&](const std::string& name, Tensor<float>& t) {
            auto it = by_name.find(prefix + name);
            if (it == by_name.end()) throw DataError("checkpoint lacks array " + prefix + name);
            const auto& a = *it->second;
            if (a.dims.size() != 2 || a.dims[0] != t.rows() || a.dims[1] != t.cols()) {
                throw DataError("checkpoint array " + prefix + name + " has the wrong shape");
            }
            std::copy(a.values.begin(), a.values.end(), t.values().begin());
        });
    };
    fill("", ck.params);
    if (ck.adam) {
        fill("adam.m.", ck.adam->m);
        fill("adam.v.", ck.adam->v);
    }
    for (auto& [k, v] : data.header) {
        bool encoder_key = false;
        for (const char* ek : kEncoderKeys) encoder_key = encoder_key || k == ek;
        if (!encoder_key) ck.meta[k] = v;
    }
    return ck;
}

}  // namespace ckbert
