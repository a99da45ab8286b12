#include "pardec/collect.hpp"

#include "pardec/errors.hpp"
#include "pardec/parallel.hpp"

namespace pardec {

Tokens pad_reference(std::span<const TokenId> reference, int gen_length, TokenId eot_id) {
    if (static_cast<int>(reference.size()) > gen_length) {
        throw AlignmentError("reference of length " + std::to_string(reference.size()) + " exceeds gen_length " +
                             std::to_string(gen_length));
    }
    Tokens out(reference.begin(), reference.end());
    out.resize(gen_length, eot_id);
    return out;
}

std::vector<Tokens> vanilla_references(std::span<const Tokens> prompts, const MaskPredictor & predictor,
                                       const BlockConfig & block_cfg, int jobs) {
    std::vector<Tokens> out(prompts.size());
    StrategyConfig      cfg;
    cfg.kind = StrategyKind::vanilla;
    parallel_for(prompts.size(), jobs, [&](std::size_t i) {
        DecodeState state(prompts[i], block_cfg, predictor.vocabulary());
        out[i] = decode(state, predictor, cfg, block_cfg).output;
    });
    return out;
}

namespace {

TrainingSample make_sample(const DecodeState & state, const PredictionStep & pred, BlockRange block,
                           std::span<const TokenId> reference, int block_size) {
    TrainingSample s;
    s.conf = block_confidences(pred, block, state.masked(), block_size);
    s.labels.assign(block_size, 1);
    s.mask_active.assign(block_size, 0);
    for (int j = block.first; j < block.second; ++j) {
        s.labels[j - block.first]      = pred.predictions[j] == reference[j] ? 1 : 0;
        s.mask_active[j - block.first] = state.is_masked(j) ? 1 : 0;
    }
    return s;
}

}  // namespace

CollectionRun collect_samples(std::span<const Tokens> prompts, std::span<const Tokens> references,
                              const MaskPredictor & predictor, const BlockConfig & block_cfg, int jobs) {
    if (prompts.size() != references.size()) {
        throw AlignmentError(std::to_string(prompts.size()) + " prompts but " + std::to_string(references.size()) +
                             " references");
    }
    block_cfg.validate();
    const TokenId eot = predictor.vocabulary().eot_id();

    CollectionRun run;
    run.prompts.assign(prompts.begin(), prompts.end());
    for (const auto & r : references) {
        run.references.push_back(pad_reference(r, block_cfg.gen_length, eot));
    }

    struct PerPrompt {
        std::vector<TrainingSample>   samples;
        std::vector<SampleProvenance> provenance;
        DecodeTrace                   trace;
    };
    std::vector<PerPrompt> parts(prompts.size());

    parallel_for(prompts.size(), jobs, [&](std::size_t i) {
        StrategyConfig cfg;
        cfg.kind      = StrategyKind::egp;
        cfg.reference = run.references[i];
        PerPrompt & part = parts[i];
        DecodeState state(prompts[i], block_cfg, predictor.vocabulary());
        auto observe = [&](const DecodeState & st, const PredictionStep & pred, BlockRange block,
                           const UnmaskDecision &) {
            part.samples.push_back(make_sample(st, pred, block, *cfg.reference, block_cfg.block_size));
            part.provenance.push_back({static_cast<int>(i), st.current_block(), st.step()});
        };
        part.trace = decode(state, predictor, cfg, block_cfg, observe).trace;
    });

    for (auto & part : parts) {
        run.forward_calls += part.trace.forward_calls;
        run.samples.insert(run.samples.end(), std::make_move_iterator(part.samples.begin()),
                           std::make_move_iterator(part.samples.end()));
        run.provenance.insert(run.provenance.end(), part.provenance.begin(), part.provenance.end());
        run.traces.push_back(std::move(part.trace));
    }
    return run;
}

OnlineTrainResult online_train(std::span<const Tokens> prompts, std::span<const Tokens> references,
                               const MaskPredictor & predictor, FilterModel filter, const AdamWConfig & opt,
                               const BlockConfig & block_cfg) {
    if (prompts.size() != references.size()) {
        throw AlignmentError("prompts and references differ in count");
    }
    if (filter.width() != block_cfg.block_size) {
        throw ConfigError("filter width does not match the block size");
    }
    OnlineTrainResult out;
    AdamWState        state_opt;
    const TokenId     eot = predictor.vocabulary().eot_id();

    for (std::size_t i = 0; i < prompts.size(); ++i) {
        StrategyConfig cfg;
        cfg.kind      = StrategyKind::egp;
        cfg.reference = pad_reference(references[i], block_cfg.gen_length, eot);
        DecodeState state(prompts[i], block_cfg, predictor.vocabulary());
        auto observe = [&](const DecodeState & st, const PredictionStep & pred, BlockRange block,
                           const UnmaskDecision &) {
            const TrainingSample s = make_sample(st, pred, block, *cfg.reference, block_cfg.block_size);
            LossAndGradients     lg = bce_backward(filter, s.conf, s.labels, s.mask_active);
            adamw_step(filter, lg.grads, state_opt, opt);
            ++out.optimizer_steps;
        };
        out.traces.push_back(decode(state, predictor, cfg, block_cfg, observe).trace);
    }
    out.model = std::move(filter);
    return out;
}

}  // namespace pardec
