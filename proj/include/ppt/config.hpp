#pragma once
// Run configuration: a flat "key = value" text file with [section] headers,
// overridable by command-line flags. Every field has a default except the
// dataset paths.

#include <string>

#include "ppt/evaluator.hpp"
#include "ppt/sampler.hpp"
#include "ppt/trainer.hpp"

namespace ppt {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // [data]
    std::string train_path;
    std::string valid_path;
    std::string test_path;
    std::string entity_map_path;
    std::string relation_map_path;
    std::string lexicon_path;     // optional preposition lexicon
    std::string dictionary_path;  // optional interval dictionary override
    int64_t granularity = 24;

    // [sampler]
    SamplerConfig sampler{.k_min = 2, .k_max = 12, .samples_per_anchor = 1,
                          .strategy = SamplingStrategy::FrequencyBased};

    // [model]
    ModelConfig model;

    // [train]
    int epochs = 10;
    int seq_len = 256;
    int batch_size = 16;
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    int checkpoint_every = 1;
    int validation_queries = 0;  // 0 disables the validation hook

    // [eval]
    int context_draws = 1;
    std::string checkpoint_path;
    std::string split = "test";

    // [miner]
    MinerConfig miner;

    // [run]
    uint64_t seed = 42;
    int threads = 1;
    std::string out_dir = "runs";
    std::string variant = "full";  // full | no-prompts | rand-prompts

    // Fills a "section.key" setting; context prefixes error messages.
    void set(const std::string& key, const std::string& value,
             const std::string& context);

    // Parses the file and applies every setting (file overrides current
    // values; flags are applied afterwards by the caller).
    void apply_file(const std::string& path);

    // Derived configs. seq_len also caps model.max_seq_len.
    TrainConfig train_config() const;
    EvalConfig eval_config() const;
    PromptVariant prompt_variant() const;

    void require_dataset() const;  // throws when any dataset path is missing
};

// "<out_dir>/<UTC timestamp>-seed<seed>"; creates the directory.
std::string make_run_directory(const RunConfig& config);

}  // namespace ppt
