#pragma once

#include "pardec/collect.hpp"
#include "pardec/core.hpp"
#include "pardec/metrics.hpp"
#include "pardec/predictor.hpp"
#include "pardec/strategies.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pardec {

// Decode every prompt with one strategy configuration. For EGP, references
// supplies the per-prompt reference (cfg.reference is ignored). Timing covers
// the decode loop only.
RunSummary run_strategy(const std::string & label, std::span<const Tokens> prompts, const MaskPredictor & predictor,
                        const StrategyConfig & cfg, const BlockConfig & block_cfg, int jobs = 1,
                        std::span<const Tokens> references = {});

}  // namespace pardec
