#pragma once

#include "pardec/core.hpp"
#include "pardec/filter.hpp"
#include "pardec/predictor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pardec {

enum class StrategyKind { vanilla, egp, learn2pd };

std::string  strategy_name(StrategyKind k);
StrategyKind parse_strategy(const std::string & name);

using BlockRange = std::pair<int, int>;  // half-open, generation-region indices

struct StrategyConfig {
    StrategyKind kind            = StrategyKind::vanilla;
    int          tokens_per_step = 1;     // vanilla
    double       tau             = 0.96;  // learn2pd, compared against sigmoid(logit)
    bool         eotp            = false;
    // Truncate as soon as an EoT is committed rather than when its block ends.
    bool eotp_per_step = false;
    std::shared_ptr<const FilterModel> filter;     // learn2pd
    std::optional<Tokens>              reference;  // egp, one token per generation position

    // Throws ConfigError when a kind-specific field is missing or out of range.
    void validate(const BlockConfig & block_cfg) const;
};

// commit[i] refers to block position range.first + i.
struct UnmaskDecision {
    std::vector<std::uint8_t> commit;
    bool                      fallback_used = false;

    int count() const;
};

// Commit the k most confident masked block positions (leftmost wins ties).
UnmaskDecision vanilla_decision(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                                int k);

// Commit every masked block position whose prediction equals the reference.
// When nothing matches and at_step_cap is set, force-commit the most confident
// masked position instead.
UnmaskDecision egp_decision(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                            std::span<const TokenId> reference, bool at_step_cap = false);

// Feed the block confidence vector (committed and out-of-range positions read
// 1.0) through the filter; commit masked j with sigmoid(logit_j) > tau. With no
// such position, force-commit the most confident masked position.
UnmaskDecision learn2pd_decision(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                                 const FilterModel & filter, double tau, int block_size);

// Block confidence vector as seen by the filter.
std::vector<double> block_confidences(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                                      int block_size);

// Shrink active_len to end just after the first committed EoT. No-op (returns
// the state unchanged) when none has been committed.
DecodeState eotp_truncate(DecodeState state);
// In-place form; returns true when the state was truncated.
bool apply_eotp(DecodeState & state);

struct DecodeResult {
    Tokens      output;
    DecodeTrace trace;
};

// Called once per step after the decision and before it is applied.
using StepObserver =
    std::function<void(const DecodeState &, const PredictionStep &, BlockRange, const UnmaskDecision &)>;

// Semi-autoregressive decode: blocks left to right; within a block repeat
// predict -> decide -> commit until no masked position remains.
DecodeResult decode(DecodeState & state, const MaskPredictor & predictor, const StrategyConfig & cfg,
                    const BlockConfig & block_cfg, const StepObserver & observer = {});

}  // namespace pardec
