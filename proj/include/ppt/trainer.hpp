#pragma once
// Epoch training loop: per epoch, sample B anchored fact sequences for every
// entity (subject-fixed and object-fixed) and every relation, convert to
// interval form, serialize with prompts, mask, and run AdamW steps.
//
// All randomness flows through one master generator: each epoch draws an
// epoch seed, and corpus slots, shuffling, masking, and dropout derive
// per-use generators from it. Resuming from a checkpoint therefore
// reproduces the uninterrupted run exactly.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppt/checkpoint.hpp"
#include "ppt/encoder.hpp"
#include "ppt/kg_store.hpp"
#include "ppt/prompter.hpp"
#include "ppt/sampler.hpp"

namespace ppt {

struct TrainConfig {
    int max_epochs = 10;
    SamplerConfig sampler;
    ModelConfig model;
    int seq_len = 256;
    int batch_size = 16;
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    uint64_t seed = 42;
    int checkpoint_every = 1;     // epochs between checkpoints; 0 disables
    std::string checkpoint_dir;   // empty disables checkpoint writing
    int validation_queries = 500; // advisory size for the validation hook
    PromptVariant variant = PromptVariant::Full;
    int threads = 1;

    void validate() const {
        sampler.validate();
        if (max_epochs < 0) throw std::invalid_argument("train: max_epochs < 0");
        if (seq_len < 1 || seq_len > model.max_seq_len)
            throw std::invalid_argument("train: need 1 <= seq_len <= max_seq_len");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
    }
};

struct EpochReport {
    int epoch = 0;          // 1-based
    double mean_loss = 0.0; // masked-token cross entropy, epoch mean
    size_t sequences = 0;   // sequences trained this epoch
    size_t skipped = 0;     // empty-pool anchor slots
    double seconds = 0.0;
    double validation_mrr = -1.0;  // < 0 when the hook is disabled
};

struct CorpusResult {
    std::vector<PromptSequence> sequences;
    size_t skipped = 0;
};

// One epoch's corpus: B passes over all entities (one subject-fixed and one
// object-fixed sequence per anchor; under the frequency strategy anchors are
// weighted draws instead of an enumeration) plus all relations. Empty-pool
// anchors are skipped and counted.
CorpusResult build_epoch_corpus(const TemporalKG& kg, const Vocabulary& vocab,
                                const IntervalDictionary& dict,
                                const TrainConfig& config, uint64_t epoch_seed);

using ValidationHook = std::function<double(const Parameters<float>&)>;

struct TrainResult {
    Parameters<float> params;
    OptimizerState<float> opt;
    std::vector<EpochReport> reports;
    std::string rng_state;  // master generator after the last epoch
    int epochs_completed = 0;
};

// Runs max_epochs epochs (resuming after resume->epochs_completed when a
// checkpoint is given). Initial entity-token embeddings are the mean of the
// word embeddings of each entity's name words. Progress lines
// "epoch\tloss\tsequences\tseconds" go to `progress` when non-null.
TrainResult train(const TemporalKG& kg, const Vocabulary& vocab,
                  const IntervalDictionary& dict, const TrainConfig& config,
                  const Checkpoint* resume = nullptr,
                  const ValidationHook& validation = nullptr,
                  std::ostream* progress = nullptr);

}  // namespace ppt
