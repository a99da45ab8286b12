#pragma once

#include "pardec/core.hpp"
#include "pardec/filter.hpp"
#include "pardec/predictor.hpp"
#include "pardec/strategies.hpp"

#include <span>
#include <vector>

namespace pardec {

struct SampleProvenance {
    int prompt = 0;
    int block  = 0;
    int step   = 0;  // global step within that prompt's decode
};

struct CollectionRun {
    std::vector<Tokens>           prompts;
    std::vector<Tokens>           references;  // EoT-padded to gen_length
    std::vector<TrainingSample>   samples;
    std::vector<SampleProvenance> provenance;
    std::vector<DecodeTrace>      traces;
    int                           forward_calls = 0;
};

// Pad (with EoT) a reference to gen_length. Throws AlignmentError if longer.
Tokens pad_reference(std::span<const TokenId> reference, int gen_length, TokenId eot_id);

// Reference answers as the predictor's own vanilla (k = 1) outputs.
std::vector<Tokens> vanilla_references(std::span<const Tokens> prompts, const MaskPredictor & predictor,
                                       const BlockConfig & block_cfg, int jobs = 1);

// Run EGP per prompt and harvest one sample per decode step, taken before the
// step's commits: conf is the filter's block confidence vector, labels mark
// prediction == reference, mask_active marks positions still masked.
CollectionRun collect_samples(std::span<const Tokens> prompts, std::span<const Tokens> references,
                              const MaskPredictor & predictor, const BlockConfig & block_cfg, int jobs = 1);

struct OnlineTrainResult {
    FilterModel              model;
    int                      optimizer_steps = 0;
    std::vector<DecodeTrace> traces;
};

// Training interleaved with EGP decoding: one AdamW step on the step's masked
// BCE after every decode step, prompts in order.
OnlineTrainResult online_train(std::span<const Tokens> prompts, std::span<const Tokens> references,
                               const MaskPredictor & predictor, FilterModel filter, const AdamWConfig & opt,
                               const BlockConfig & block_cfg);

}  // namespace pardec
