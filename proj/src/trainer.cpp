#include "ppt/trainer.hpp"

#include <chrono>
#include <numeric>
#include <ostream>

namespace ppt {

namespace {

struct Slot {
    TsgKind kind;
    uint32_t anchor;
};

std::vector<Slot> plan_slots(const TemporalKG& kg, const TrainConfig& config,
                             uint64_t epoch_seed) {
    std::vector<Slot> slots;
    const size_t entities = kg.entity_count();
    const size_t relations = kg.relation_count();
    slots.reserve(static_cast<size_t>(config.sampler.samples_per_anchor) *
                  (2 * entities + relations));
    Rng anchor_rng(mix64(epoch_seed, fnv1a64("anchors")));
    std::optional<AnchorPicker> picker;
    if (config.sampler.strategy == SamplingStrategy::FrequencyBased)
        picker.emplace(kg, SamplingStrategy::FrequencyBased);
    for (int b = 0; b < config.sampler.samples_per_anchor; ++b) {
        for (size_t i = 0; i < entities; ++i) {
            const EntityId anchor =
                picker ? picker->pick(anchor_rng) : static_cast<EntityId>(i);
            slots.push_back(Slot{TsgKind::FixSubject, anchor});
            slots.push_back(Slot{TsgKind::FixObject, anchor});
        }
        for (size_t r = 0; r < relations; ++r)
            slots.push_back(Slot{TsgKind::FixRelation, static_cast<RelationId>(r)});
    }
    return slots;
}

}  // namespace

CorpusResult build_epoch_corpus(const TemporalKG& kg, const Vocabulary& vocab,
                                const IntervalDictionary& dict,
                                const TrainConfig& config, uint64_t epoch_seed) {
    config.validate();
    const auto slots = plan_slots(kg, config, epoch_seed);
    std::vector<std::optional<PromptSequence>> produced(slots.size());
    parallel_for(slots.size(), config.threads, [&](size_t i) {
        Rng rng(mix64(epoch_seed, fnv1a64("slot"), i));
        const int k = draw_k(config.sampler, rng);
        auto tsg = sample_tsg(kg, slots[i].anchor, slots[i].kind, k, rng);
        if (!tsg) return;
        if (config.variant == PromptVariant::RandPrompts)
            randomize_timestamps(*tsg, kg.min_timestamp(), kg.max_timestamp(), rng);
        produced[i] = serialize_tig(tsg_to_tig(*tsg), vocab, dict, config.seq_len,
                                    config.variant);
    });
    CorpusResult result;
    result.sequences.reserve(slots.size());
    for (auto& seq : produced) {
        if (seq)
            result.sequences.push_back(std::move(*seq));
        else
            ++result.skipped;
    }
    return result;
}

TrainResult train(const TemporalKG& kg, const Vocabulary& vocab,
                  const IntervalDictionary& dict, const TrainConfig& config_in,
                  const Checkpoint* resume, const ValidationHook& validation,
                  std::ostream* progress) {
    TrainConfig config = config_in;
    if (config.model.vocab_size == 0)
        config.model.vocab_size = static_cast<int>(vocab.size());
    if (config.model.vocab_size != static_cast<int>(vocab.size()))
        throw EncoderError("train: model vocab_size does not match vocabulary");
    config.model.validate();
    config.validate();

    TrainResult result;
    Rng master(config.seed);
    int start_epoch = 0;

    if (resume) {
        if (!(resume->config == config.model))
            throw EncoderError("train: resume checkpoint has a different model config");
        if (resume->vocab_hash != vocab.hash())
            throw CheckpointError("train: resume checkpoint vocabulary hash mismatch");
        result.params = resume->params;
        result.opt = resume->opt;
        master = Rng::deserialize(resume->rng_state);
        start_epoch = resume->epochs_completed;
    } else {
        // Two-phase init: draw the seeded base rows first, then overwrite
        // entity-token rows with the mean of their name-word embeddings.
        auto base = init_params<float>(config.model, nullptr, config.seed);
        WordLookup lookup = [&](const std::string& word)
            -> std::optional<std::vector<double>> {
            const TokenId id = vocab.id_of(word);
            if (id < 0) return std::nullopt;
            std::vector<double> vec(static_cast<size_t>(config.model.model_dim));
            for (int d = 0; d < config.model.model_dim; ++d)
                vec[static_cast<size_t>(d)] = static_cast<double>(base.token_emb(id, d));
            return vec;
        };
        std::unordered_map<int32_t, std::vector<float>> inits;
        for (size_t e = 0; e < kg.entity_count(); ++e) {
            const auto vec = entity_init_embedding(
                kg.entity_name(static_cast<EntityId>(e)), lookup,
                config.model.model_dim, config.seed);
            std::vector<float> row(vec.size());
            for (size_t d = 0; d < vec.size(); ++d) row[d] = static_cast<float>(vec[d]);
            inits[vocab.entity_token(static_cast<EntityId>(e))] = std::move(row);
        }
        result.params = init_params<float>(config.model, &inits, config.seed);
        result.opt = OptimizerState<float>::make(config.model, config.learning_rate,
                                                 config.weight_decay);
    }
    result.epochs_completed = start_epoch;

    auto grads = Parameters<float>::shaped(config.model);

    for (int epoch = start_epoch; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const uint64_t epoch_seed = master.next();

        auto corpus = build_epoch_corpus(kg, vocab, dict, config, epoch_seed);
        std::vector<size_t> order(corpus.sequences.size());
        std::iota(order.begin(), order.end(), size_t{0});
        Rng shuffle_rng(mix64(epoch_seed, fnv1a64("shuffle")));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        size_t masked_total = 0;
        size_t batch_index = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size), ++batch_index) {
            const size_t stop = std::min(
                order.size(), start + static_cast<size_t>(config.batch_size));
            std::vector<MaskedRow> rows;
            rows.reserve(stop - start);
            for (size_t j = start; j < stop; ++j) {
                Rng mask_rng(mix64(epoch_seed, fnv1a64("mask"), j));
                rows.push_back(apply_random_mask(corpus.sequences[order[j]].tokens,
                                                 config.model.mask_ratio, mask_rng,
                                                 Vocabulary::kMask));
            }
            const auto batch = assemble_batch(rows, Vocabulary::kPad);
            grads.set_zero();
            Rng dropout_rng(mix64(epoch_seed, fnv1a64("dropout"), batch_index));
            const double loss = loss_and_gradients(
                result.params, batch, grads,
                config.model.dropout > 0.0 ? &dropout_rng : nullptr);
            adamw_step(result.params, grads, result.opt);
            const size_t masked = batch.masked_count();
            loss_sum += loss * static_cast<double>(masked);
            masked_total += masked;
        }

        EpochReport report;
        report.epoch = epoch + 1;
        report.mean_loss = masked_total ? loss_sum / static_cast<double>(masked_total) : 0.0;
        report.sequences = corpus.sequences.size();
        report.skipped = corpus.skipped;
        report.seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t0).count();
        if (validation) report.validation_mrr = validation(result.params);
        result.reports.push_back(report);
        result.epochs_completed = epoch + 1;

        if (progress)
            (*progress) << report.epoch << '\t' << report.mean_loss << '\t'
                        << report.sequences << '\t' << report.seconds << "\n";

        const bool last = epoch + 1 == config.max_epochs;
        if (!config.checkpoint_dir.empty() && config.checkpoint_every > 0 &&
            ((epoch + 1) % config.checkpoint_every == 0 || last)) {
            Checkpoint ckpt;
            ckpt.config = config.model;
            ckpt.vocab_hash = vocab.hash();
            ckpt.epochs_completed = epoch + 1;
            ckpt.params = result.params;
            ckpt.opt = result.opt;
            ckpt.rng_state = master.serialize();
            save_checkpoint(config.checkpoint_dir + "/checkpoint_epoch" +
                                std::to_string(epoch + 1) + ".bin",
                            ckpt);
            save_checkpoint(config.checkpoint_dir + "/checkpoint.bin", ckpt);
        }
    }

    result.rng_state = master.serialize();
    return result;
}

}  // namespace ppt
