// ppt: prompt-based temporal knowledge graph completion.
//
// Subcommands: ingest, train, eval, ablate, mine, dump-corpus. Settings come
// from defaults, then the --config file, then flags. PPT_LOG={quiet,info,
// debug} controls diagnostics on stderr; structured results go to stdout.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ppt/checkpoint.hpp"
#include "ppt/config.hpp"
#include "ppt/evaluator.hpp"
#include "ppt/trainer.hpp"

namespace {

using namespace ppt;

struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> data_dir;
    std::optional<int64_t> granularity;
    std::optional<uint64_t> seed;
    std::optional<int> threads;
    std::optional<int> epochs;
    std::optional<int> seq_len;
    std::optional<int> k_min;
    std::optional<int> k_max;
    std::optional<std::string> strategy;
    std::optional<std::string> variant;
    std::optional<int64_t> window;
    std::optional<int64_t> min_support;
    std::optional<double> purity;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
    std::optional<std::string> split;
    std::optional<std::string> lexicon;
    std::optional<std::string> dump_ranks;
    std::optional<std::string> dump_attention;
    std::optional<int> validation_queries;
    std::optional<double> learning_rate;
    std::optional<int> batch_size;
};

void register_flags(CLI::App& app, Flags& f) {
    app.add_option("--config", f.config, "config file (key = value with [sections])");
    app.add_option("--data", f.data_dir,
                   "dataset directory holding train.txt valid.txt test.txt "
                   "entity2id.txt relation2id.txt");
    app.add_option("--granularity", f.granularity, "raw timestamp units per day");
    app.add_option("--seed", f.seed, "master seed");
    app.add_option("--threads", f.threads, "worker cap");
    app.add_option("--epochs", f.epochs, "training epochs");
    app.add_option("--seq-len", f.seq_len, "token sequence length");
    app.add_option("--k-min", f.k_min, "minimum sampled facts per sequence");
    app.add_option("--k-max", f.k_max, "maximum sampled facts per sequence");
    app.add_option("--strategy", f.strategy, "anchor sampling: uniform|frequency");
    app.add_option("--variant", f.variant, "full|no-prompts|rand-prompts");
    app.add_option("--window", f.window, "miner window in days");
    app.add_option("--min-support", f.min_support, "miner minimum support");
    app.add_option("--purity", f.purity, "miner order purity threshold");
    app.add_option("--out", f.out, "output root directory");
    app.add_option("--checkpoint", f.checkpoint, "checkpoint path (eval)");
    app.add_option("--split", f.split, "evaluation split: valid|test");
    app.add_option("--lexicon", f.lexicon, "relation preposition lexicon file");
    app.add_option("--dump-ranks", f.dump_ranks, "write per-query ranks to file");
    app.add_option("--dump-attention", f.dump_attention,
                   "write attention matrices of the first query to file");
    app.add_option("--validation-queries", f.validation_queries,
                   "validation subset size per epoch (0 disables)");
    app.add_option("--learning-rate", f.learning_rate, "AdamW learning rate");
    app.add_option("--batch-size", f.batch_size, "mini-batch size");
}

RunConfig resolve_config(const Flags& f) {
    RunConfig cfg;  // defaults
    if (f.config) cfg.apply_file(*f.config);
    if (f.data_dir) {
        const std::string d = *f.data_dir;
        cfg.train_path = d + "/train.txt";
        cfg.valid_path = d + "/valid.txt";
        cfg.test_path = d + "/test.txt";
        cfg.entity_map_path = d + "/entity2id.txt";
        cfg.relation_map_path = d + "/relation2id.txt";
    }
    if (f.granularity) cfg.granularity = *f.granularity;
    if (f.seed) cfg.seed = *f.seed;
    if (f.threads) cfg.threads = *f.threads;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.seq_len) cfg.seq_len = *f.seq_len;
    if (f.k_min) cfg.sampler.k_min = *f.k_min;
    if (f.k_max) cfg.sampler.k_max = *f.k_max;
    if (f.strategy) cfg.set("sampler.strategy", *f.strategy, "--strategy");
    if (f.variant) cfg.set("run.variant", *f.variant, "--variant");
    if (f.window) cfg.miner.window = *f.window;
    if (f.min_support) cfg.miner.min_support = static_cast<uint32_t>(*f.min_support);
    if (f.purity) cfg.miner.order_purity = *f.purity;
    if (f.out) cfg.out_dir = *f.out;
    if (f.checkpoint) cfg.checkpoint_path = *f.checkpoint;
    if (f.split) cfg.set("eval.split", *f.split, "--split");
    if (f.lexicon) cfg.lexicon_path = *f.lexicon;
    if (f.validation_queries) cfg.validation_queries = *f.validation_queries;
    if (f.learning_rate) cfg.learning_rate = *f.learning_rate;
    if (f.batch_size) cfg.batch_size = *f.batch_size;
    return cfg;
}

TemporalKG load_graph(const RunConfig& cfg) {
    cfg.require_dataset();
    return TemporalKG::load(cfg.train_path, cfg.valid_path, cfg.test_path,
                            cfg.entity_map_path, cfg.relation_map_path,
                            cfg.granularity);
}

struct PromptArtifacts {
    IntervalDictionary dict;
    PrepositionLexicon lexicon;
    Vocabulary vocab;
};

PromptArtifacts build_artifacts(const RunConfig& cfg, const TemporalKG& kg) {
    PromptArtifacts a{
        cfg.dictionary_path.empty() ? IntervalDictionary::default_dictionary()
                                    : IntervalDictionary::load(cfg.dictionary_path),
        cfg.lexicon_path.empty() ? PrepositionLexicon{}
                                 : load_lexicon(cfg.lexicon_path),
        Vocabulary{}};
    a.vocab = Vocabulary::build(kg, a.dict, a.lexicon);
    return a;
}

int cmd_ingest(const Flags& f) {
    const auto cfg = resolve_config(f);
    const auto kg = load_graph(cfg);
    std::cout << "entities\t" << kg.entity_count() << "\n"
              << "relations\t" << kg.relation_count() << "\n"
              << "granularity\t" << kg.granularity() << "\n"
              << "train\t" << kg.split_size(Split::Train) << "\n"
              << "valid\t" << kg.split_size(Split::Valid) << "\n"
              << "test\t" << kg.split_size(Split::Test) << "\n"
              << "min_day\t" << kg.min_timestamp() << "\n"
              << "max_day\t" << kg.max_timestamp() << "\n";
    return 0;
}

// Mirrors writes to stdout and the run log.
class TeeStream : public std::ostream {
    struct TeeBuf : std::streambuf {
        std::streambuf* a;
        std::streambuf* b;
        int overflow(int c) override {
            if (c == EOF) return !EOF;
            const int ra = a->sputc(static_cast<char>(c));
            const int rb = b->sputc(static_cast<char>(c));
            return ra == EOF || rb == EOF ? EOF : c;
        }
        int sync() override {
            const int ra = a->pubsync();
            const int rb = b->pubsync();
            return ra == 0 && rb == 0 ? 0 : -1;
        }
    };

public:
    TeeStream(std::ostream& a, std::ostream& b) : std::ostream(&buf_) {
        buf_.a = a.rdbuf();
        buf_.b = b.rdbuf();
    }

private:
    TeeBuf buf_;
};

int cmd_train(const Flags& f) {
    const auto cfg = resolve_config(f);
    const auto kg = load_graph(cfg);
    const auto artifacts = build_artifacts(cfg, kg);
    const std::string run_dir = make_run_directory(cfg);
    log_info("run directory: " + run_dir);
    artifacts.vocab.save(run_dir + "/vocab.txt");
    artifacts.dict.save(run_dir + "/interval_dictionary.txt");

    auto train_cfg = cfg.train_config();
    train_cfg.checkpoint_dir = run_dir;

    ValidationHook hook;
    if (cfg.validation_queries > 0)
        hook = make_validation_hook(kg, artifacts.vocab, artifacts.dict,
                                    cfg.eval_config(),
                                    static_cast<size_t>(cfg.validation_queries));

    std::ofstream log_file(run_dir + "/train.log");
    TeeStream progress(std::cout, log_file);
    const auto result = train(kg, artifacts.vocab, artifacts.dict, train_cfg,
                              nullptr, hook, &progress);
    if (!result.reports.empty() && result.reports.back().validation_mrr >= 0.0)
        std::cout << "validation_mrr\t" << result.reports.back().validation_mrr
                  << "\n";
    std::cout << "checkpoint\t" << run_dir << "/checkpoint.bin\n";
    return 0;
}

int cmd_eval(const Flags& f) {
    const auto cfg = resolve_config(f);
    if (cfg.checkpoint_path.empty())
        throw ConfigError("no checkpoint: pass --checkpoint or set eval.checkpoint");
    const auto kg = load_graph(cfg);
    const auto artifacts = build_artifacts(cfg, kg);
    const auto ckpt = load_checkpoint(cfg.checkpoint_path, artifacts.vocab.hash());
    const Split split = cfg.split == "valid" ? Split::Valid : Split::Test;
    const auto report = evaluate(kg, split, ckpt.params, artifacts.vocab,
                                 artifacts.dict, cfg.eval_config());
    std::cout << metrics_tsv(report);

    if (f.dump_ranks) {
        std::ofstream out(*f.dump_ranks);
        if (!out) throw ConfigError("cannot write " + *f.dump_ranks);
        for (const auto& r : report.ranks) {
            const auto& q = r.query;
            const bool obj = q.direction == Direction::PredictObject;
            out << (obj ? q.known : q.truth) << '\t' << q.relation << '\t'
                << (obj ? q.truth : q.known) << '\t' << q.t << '\t'
                << (obj ? "object" : "subject") << '\t' << r.rank << '\n';
        }
    }
    if (f.dump_attention && !report.ranks.empty()) {
        const auto& q = report.ranks.front().query;
        Rng rng(mix64(cfg.seed, fnv1a64("eval"), 0));
        const auto seq = build_query_sequence(kg, q, artifacts.vocab, artifacts.dict,
                                              cfg.eval_config(), rng);
        std::ofstream out(*f.dump_attention);
        if (!out) throw ConfigError("cannot write " + *f.dump_attention);
        out << attention_report(ckpt.params, seq, artifacts.vocab);
    }
    return 0;
}

int cmd_ablate(const Flags& f) {
    const auto cfg = resolve_config(f);
    if (cfg.variant == "full")
        throw ConfigError("ablate needs --variant no-prompts or rand-prompts");
    const auto kg = load_graph(cfg);
    const auto artifacts = build_artifacts(cfg, kg);
    const Split split = cfg.split == "valid" ? Split::Valid : Split::Test;
    const auto report = run_ablation(kg, artifacts.vocab, artifacts.dict,
                                     cfg.train_config(), cfg.eval_config(),
                                     cfg.prompt_variant(), split, nullptr);
    std::cout << "variant\t" << cfg.variant << "\n" << metrics_tsv(report);
    return 0;
}

int cmd_mine(const Flags& f) {
    const auto cfg = resolve_config(f);
    const auto kg = load_graph(cfg);
    const auto result = mine_relation_pairs(kg, cfg.miner);
    std::cout << pairs_tsv(result, kg);
    const std::string run_dir = make_run_directory(cfg);
    std::ofstream pairs(run_dir + "/relation_pairs.txt");
    pairs << pairs_tsv(result, kg);
    std::ofstream filtered(run_dir + "/filtered_test.txt");
    for (const auto& q : result.filtered_test)
        filtered << q.subject << '\t' << q.relation << '\t' << q.object << '\t'
                 << q.t * kg.granularity() << '\n';
    log_info("miner artifacts in " + run_dir);
    return 0;
}

int cmd_dump_corpus(const Flags& f) {
    const auto cfg = resolve_config(f);
    const auto kg = load_graph(cfg);
    const auto artifacts = build_artifacts(cfg, kg);
    auto train_cfg = cfg.train_config();
    Rng master(train_cfg.seed);
    const auto corpus = build_epoch_corpus(kg, artifacts.vocab, artifacts.dict,
                                           train_cfg, master.next());
    const std::string run_dir = make_run_directory(cfg);
    const std::string path = run_dir + "/corpus.txt";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    for (const auto& seq : corpus.sequences) {
        const auto words = detokenize(seq, artifacts.vocab);
        for (size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << words[i];
        out << '\n';
    }
    std::cout << "sequences\t" << corpus.sequences.size() << "\n"
              << "skipped\t" << corpus.skipped << "\n"
              << "corpus\t" << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prompt-based temporal knowledge graph completion"};
    app.require_subcommand(1);

    Flags flags;
    auto* ingest = app.add_subcommand("ingest", "validate a dataset and report statistics");
    auto* train_cmd = app.add_subcommand("train", "train a masked encoder");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (raw schema)");
    auto* ablate = app.add_subcommand("ablate", "train + evaluate a prompt ablation");
    auto* mine = app.add_subcommand("mine", "mine time-sensitive relation pairs");
    auto* dump = app.add_subcommand("dump-corpus", "write one epoch corpus as text");
    for (auto* sub : {ingest, train_cmd, eval_cmd, ablate, mine, dump})
        register_flags(*sub, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(flags);
        if (train_cmd->parsed()) return cmd_train(flags);
        if (eval_cmd->parsed()) return cmd_eval(flags);
        if (ablate->parsed()) return cmd_ablate(flags);
        if (mine->parsed()) return cmd_mine(flags);
        if (dump->parsed()) return cmd_dump_corpus(flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
