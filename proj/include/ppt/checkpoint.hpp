#pragma once
// Self-describing binary checkpoint: model config, vocabulary hash, float32
// parameters, AdamW state, completed-epoch counter, and the trainer RNG
// state. Loading refuses a checkpoint whose vocabulary hash differs from the
// expected one.

#include <string>

#include "ppt/encoder.hpp"

namespace ppt {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    ModelConfig config;
    uint64_t vocab_hash = 0;
    int epochs_completed = 0;
    Parameters<float> params;
    OptimizerState<float> opt;
    std::string rng_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// expected_vocab_hash = 0 skips the vocabulary check.
Checkpoint load_checkpoint(const std::string& path, uint64_t expected_vocab_hash);

}  // namespace ppt
