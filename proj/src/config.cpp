#include "ppt/config.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

namespace ppt {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

int64_t to_int(const std::string& value, const std::string& context) {
    int64_t out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError(context + ": expected integer, got \"" + value + "\"");
    return out;
}

double to_double(const std::string& value, const std::string& context) {
    try {
        size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(context + ": expected number, got \"" + value + "\"");
    }
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value,
                    const std::string& context) {
    auto int_of = [&] { return to_int(value, context); };
    auto double_of = [&] { return to_double(value, context); };

    if (key == "data.train") train_path = value;
    else if (key == "data.valid") valid_path = value;
    else if (key == "data.test") test_path = value;
    else if (key == "data.entities") entity_map_path = value;
    else if (key == "data.relations") relation_map_path = value;
    else if (key == "data.lexicon") lexicon_path = value;
    else if (key == "data.dictionary") dictionary_path = value;
    else if (key == "data.granularity") granularity = int_of();
    else if (key == "sampler.k_min") sampler.k_min = static_cast<int>(int_of());
    else if (key == "sampler.k_max") sampler.k_max = static_cast<int>(int_of());
    else if (key == "sampler.samples_per_anchor")
        sampler.samples_per_anchor = static_cast<int>(int_of());
    else if (key == "sampler.strategy") {
        if (value == "uniform") sampler.strategy = SamplingStrategy::Uniform;
        else if (value == "frequency") sampler.strategy = SamplingStrategy::FrequencyBased;
        else throw ConfigError(context + ": strategy must be uniform or frequency");
    }
    else if (key == "model.layers") model.layers = static_cast<int>(int_of());
    else if (key == "model.heads") model.heads = static_cast<int>(int_of());
    else if (key == "model.model_dim") model.model_dim = static_cast<int>(int_of());
    else if (key == "model.ff_dim") model.ff_dim = static_cast<int>(int_of());
    else if (key == "model.max_seq_len") model.max_seq_len = static_cast<int>(int_of());
    else if (key == "model.mask_ratio") model.mask_ratio = double_of();
    else if (key == "model.dropout") model.dropout = double_of();
    else if (key == "train.epochs") epochs = static_cast<int>(int_of());
    else if (key == "train.seq_len") seq_len = static_cast<int>(int_of());
    else if (key == "train.batch_size") batch_size = static_cast<int>(int_of());
    else if (key == "train.learning_rate") learning_rate = double_of();
    else if (key == "train.weight_decay") weight_decay = double_of();
    else if (key == "train.checkpoint_every") checkpoint_every = static_cast<int>(int_of());
    else if (key == "train.validation_queries")
        validation_queries = static_cast<int>(int_of());
    else if (key == "eval.context_draws") context_draws = static_cast<int>(int_of());
    else if (key == "eval.checkpoint") checkpoint_path = value;
    else if (key == "eval.split") {
        if (value != "valid" && value != "test")
            throw ConfigError(context + ": split must be valid or test");
        split = value;
    }
    else if (key == "miner.window") miner.window = int_of();
    else if (key == "miner.min_support")
        miner.min_support = static_cast<uint32_t>(int_of());
    else if (key == "miner.purity") miner.order_purity = double_of();
    else if (key == "run.seed") seed = static_cast<uint64_t>(int_of());
    else if (key == "run.threads") threads = static_cast<int>(int_of());
    else if (key == "run.out") out_dir = value;
    else if (key == "run.variant") {
        if (value != "full" && value != "no-prompts" && value != "rand-prompts")
            throw ConfigError(context +
                              ": variant must be full, no-prompts, or rand-prompts");
        variant = value;
    }
    else throw ConfigError(context + ": unknown key \"" + key + "\"");
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string line;
    std::string section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string context = path + ":" + std::to_string(lineno);
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError(context + ": unterminated section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) throw ConfigError(context + ": empty section name");
            continue;
        }
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(context + ": expected \"key = value\"");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError(context + ": empty key");
        if (section.empty())
            throw ConfigError(context + ": key \"" + key + "\" outside any section");
        set(section + "." + key, value, context);
    }
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.max_epochs = epochs;
    t.sampler = sampler;
    t.sampler.seed = seed;
    t.model = model;
    if (t.model.max_seq_len < seq_len) t.model.max_seq_len = seq_len;
    t.seq_len = seq_len;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.weight_decay = weight_decay;
    t.seed = seed;
    t.checkpoint_every = checkpoint_every;
    t.validation_queries = validation_queries;
    t.variant = prompt_variant();
    t.threads = threads;
    return t;
}

EvalConfig RunConfig::eval_config() const {
    EvalConfig e;
    e.sampler = sampler;
    e.sampler.seed = seed;
    e.seq_len = seq_len;
    e.variant = prompt_variant();
    e.context_draws = context_draws;
    e.seed = seed;
    e.threads = threads;
    return e;
}

PromptVariant RunConfig::prompt_variant() const {
    if (variant == "no-prompts") return PromptVariant::NoPrompts;
    if (variant == "rand-prompts") return PromptVariant::RandPrompts;
    return PromptVariant::Full;
}

void RunConfig::require_dataset() const {
    if (train_path.empty() || valid_path.empty() || test_path.empty() ||
        entity_map_path.empty() || relation_map_path.empty())
        throw ConfigError(
            "missing dataset: set data.{train,valid,test,entities,relations} "
            "in the config file or pass --data");
}

std::string make_run_directory(const RunConfig& config) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    const std::string dir = config.out_dir + "/" + stamp + "-seed" +
                            std::to_string(config.seed);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace ppt
