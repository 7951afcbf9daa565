#include "ppt/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ppt {

namespace {

constexpr char kMagic[8] = {'P', 'P', 'T', 'C', 'K', 'P', 'T', '\x01'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw CheckpointError("checkpoint truncated");
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto n = read_pod<uint64_t>(in);
    if (n > (1ull << 20)) throw CheckpointError("checkpoint: implausible string size");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw CheckpointError("checkpoint truncated");
    return s;
}

void write_params(std::ostream& out, Parameters<float>& params) {
    for (const auto& block : params.blocks()) {
        write_pod<uint64_t>(out, block.size);
        out.write(reinterpret_cast<const char*>(block.data),
                  static_cast<std::streamsize>(block.size * sizeof(float)));
    }
}

void read_params(std::istream& in, Parameters<float>& params) {
    for (auto& block : params.blocks()) {
        const auto n = read_pod<uint64_t>(in);
        if (n != block.size)
            throw CheckpointError("checkpoint: block size mismatch in " + block.name);
        in.read(reinterpret_cast<char*>(block.data),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw CheckpointError("checkpoint truncated");
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    const auto& c = ckpt.config;
    write_pod<int32_t>(out, c.layers);
    write_pod<int32_t>(out, c.heads);
    write_pod<int32_t>(out, c.model_dim);
    write_pod<int32_t>(out, c.ff_dim);
    write_pod<int32_t>(out, c.max_seq_len);
    write_pod<int32_t>(out, c.vocab_size);
    write_pod<double>(out, c.mask_ratio);
    write_pod<double>(out, c.dropout);
    write_pod<uint64_t>(out, ckpt.vocab_hash);
    write_pod<int32_t>(out, ckpt.epochs_completed);
    write_pod<int64_t>(out, ckpt.opt.step);
    write_pod<double>(out, ckpt.opt.learning_rate);
    write_pod<double>(out, ckpt.opt.weight_decay);
    write_pod<double>(out, ckpt.opt.beta1);
    write_pod<double>(out, ckpt.opt.beta2);
    write_pod<double>(out, ckpt.opt.epsilon);
    write_string(out, ckpt.rng_state);
    auto& mut = const_cast<Checkpoint&>(ckpt);
    write_params(out, mut.params);
    write_params(out, mut.opt.m);
    write_params(out, mut.opt.v);
    if (!out) throw CheckpointError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path, uint64_t expected_vocab_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError(path + ": not a checkpoint file");
    if (read_pod<uint32_t>(in) != kVersion)
        throw CheckpointError(path + ": unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.config.layers = read_pod<int32_t>(in);
    ckpt.config.heads = read_pod<int32_t>(in);
    ckpt.config.model_dim = read_pod<int32_t>(in);
    ckpt.config.ff_dim = read_pod<int32_t>(in);
    ckpt.config.max_seq_len = read_pod<int32_t>(in);
    ckpt.config.vocab_size = read_pod<int32_t>(in);
    ckpt.config.mask_ratio = read_pod<double>(in);
    ckpt.config.dropout = read_pod<double>(in);
    ckpt.config.validate();
    ckpt.vocab_hash = read_pod<uint64_t>(in);
    if (expected_vocab_hash != 0 && ckpt.vocab_hash != expected_vocab_hash)
        throw CheckpointError(path + ": vocabulary hash mismatch");
    ckpt.epochs_completed = read_pod<int32_t>(in);
    ckpt.opt.step = read_pod<int64_t>(in);
    ckpt.opt.learning_rate = read_pod<double>(in);
    ckpt.opt.weight_decay = read_pod<double>(in);
    ckpt.opt.beta1 = read_pod<double>(in);
    ckpt.opt.beta2 = read_pod<double>(in);
    ckpt.opt.epsilon = read_pod<double>(in);
    ckpt.rng_state = read_string(in);
    ckpt.params = Parameters<float>::shaped(ckpt.config);
    ckpt.opt.m = Parameters<float>::shaped(ckpt.config);
    ckpt.opt.v = Parameters<float>::shaped(ckpt.config);
    read_params(in, ckpt.params);
    read_params(in, ckpt.opt.m);
    read_params(in, ckpt.opt.v);
    return ckpt;
}

}  // namespace ppt
