#include "pardec/strategies.hpp"

#include "pardec/errors.hpp"

#include <algorithm>
#include <numeric>

namespace pardec {

std::string strategy_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::vanilla:
            return "vanilla";
        case StrategyKind::egp:
            return "egp";
        case StrategyKind::learn2pd:
            return "learn2pd";
    }
    return "vanilla";
}

StrategyKind parse_strategy(const std::string & name) {
    if (name == "vanilla") {
        return StrategyKind::vanilla;
    }
    if (name == "egp") {
        return StrategyKind::egp;
    }
    if (name == "learn2pd") {
        return StrategyKind::learn2pd;
    }
    throw ConfigError("unknown strategy '" + name + "'");
}

void StrategyConfig::validate(const BlockConfig & block_cfg) const {
    switch (kind) {
        case StrategyKind::vanilla:
            if (tokens_per_step < 1) {
                throw ConfigError("tokens_per_step must be positive");
            }
            break;
        case StrategyKind::egp:
            if (!reference) {
                throw ConfigError("egp requires a reference");
            }
            if (static_cast<int>(reference->size()) < block_cfg.gen_length) {
                throw ConfigError("egp reference shorter than gen_length");
            }
            break;
        case StrategyKind::learn2pd:
            if (!filter) {
                throw ConfigError("learn2pd requires filter weights");
            }
            if (filter->width() != block_cfg.block_size) {
                throw ConfigError("filter width " + std::to_string(filter->width()) + " does not match block size " +
                                  std::to_string(block_cfg.block_size));
            }
            if (!(tau >= 0.0 && tau < 1.0)) {
                throw ConfigError("tau must lie in [0, 1)");
            }
            break;
    }
}

int UnmaskDecision::count() const {
    return static_cast<int>(std::count(commit.begin(), commit.end(), std::uint8_t{1}));
}

namespace {

void check_block(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked) {
    if (block.first < 0 || block.second < block.first || block.second > static_cast<int>(pred.predictions.size()) ||
        block.second > static_cast<int>(masked.size()) || pred.confidences.size() != pred.predictions.size()) {
        throw PreconditionError("prediction does not cover the block");
    }
}

// Most confident masked position in the block, leftmost on ties; -1 if none.
int most_confident(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked) {
    int best = -1;
    for (int j = block.first; j < block.second; ++j) {
        if (masked[j] && (best < 0 || pred.confidences[j] > pred.confidences[best])) {
            best = j;
        }
    }
    return best;
}

void force_commit(UnmaskDecision & d, const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked) {
    const int j = most_confident(pred, block, masked);
    if (j >= 0) {
        d.commit[j - block.first] = 1;
        d.fallback_used           = true;
    }
}

}  // namespace

UnmaskDecision vanilla_decision(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                                int k) {
    check_block(pred, block, masked);
    UnmaskDecision d;
    d.commit.assign(block.second - block.first, 0);

    std::vector<int> order;
    for (int j = block.first; j < block.second; ++j) {
        if (masked[j]) {
            order.push_back(j);
        }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pred.confidences[a] > pred.confidences[b]; });
    const int n = std::min<int>(std::max(k, 0), static_cast<int>(order.size()));
    for (int i = 0; i < n; ++i) {
        d.commit[order[i] - block.first] = 1;
    }
    return d;
}

UnmaskDecision egp_decision(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                            std::span<const TokenId> reference, bool at_step_cap) {
    check_block(pred, block, masked);
    if (static_cast<int>(reference.size()) < block.second) {
        throw ConfigError("reference does not cover the block");
    }
    UnmaskDecision d;
    d.commit.assign(block.second - block.first, 0);
    for (int j = block.first; j < block.second; ++j) {
        if (masked[j] && pred.predictions[j] == reference[j]) {
            d.commit[j - block.first] = 1;
        }
    }
    if (d.count() == 0 && at_step_cap) {
        force_commit(d, pred, block, masked);
    }
    return d;
}

std::vector<double> block_confidences(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                                      int block_size) {
    check_block(pred, block, masked);
    std::vector<double> conf(block_size, 1.0);
    for (int j = block.first; j < block.second && j - block.first < block_size; ++j) {
        if (masked[j]) {
            conf[j - block.first] = pred.confidences[j];
        }
    }
    return conf;
}

UnmaskDecision learn2pd_decision(const PredictionStep & pred, BlockRange block, const std::vector<bool> & masked,
                                 const FilterModel & filter, double tau, int block_size) {
    if (filter.width() != block_size || block.second - block.first > block_size) {
        throw ConfigError("filter width does not match the block size");
    }
    const std::vector<double> conf   = block_confidences(pred, block, masked, block_size);
    const std::vector<double> logits = filter.forward(conf);

    UnmaskDecision d;
    d.commit.assign(block.second - block.first, 0);
    for (int j = block.first; j < block.second; ++j) {
        if (masked[j] && sigmoid(logits[j - block.first]) > tau) {
            d.commit[j - block.first] = 1;
        }
    }
    if (d.count() == 0) {
        force_commit(d, pred, block, masked);
    }
    return d;
}

bool apply_eotp(DecodeState & state) {
    const auto        gen = state.generation();
    const std::size_t idx = first_eot(gen, state.vocab().eot_id());
    if (idx >= gen.size()) {
        return false;
    }
    state.truncate(static_cast<int>(idx) + 1);
    return true;
}

DecodeState eotp_truncate(DecodeState state) {
    apply_eotp(state);
    return state;
}

DecodeResult decode(DecodeState & state, const MaskPredictor & predictor, const StrategyConfig & cfg,
                    const BlockConfig & block_cfg, const StepObserver & observer) {
    block_cfg.validate();
    const BlockConfig & own = state.block_config();
    if (own.gen_length != block_cfg.gen_length || own.block_size != block_cfg.block_size ||
        own.step_cap() != block_cfg.step_cap()) {
        throw ConfigError("decode state was built with a different block configuration");
    }
    if (!predictor.vocabulary().same_ids(state.vocab())) {
        throw ConfigError("predictor vocabulary does not match the decode state");
    }
    cfg.validate(block_cfg);
    if (state.step() != 0 || state.active_len() != block_cfg.gen_length ||
        state.masked_in({0, block_cfg.gen_length}) != block_cfg.gen_length) {
        throw PreconditionError("decode requires a fresh state");
    }

    DecodeResult result;
    DecodeTrace & trace = result.trace;
    const int     cap   = block_cfg.step_cap();

    for (int b = 0; b < block_cfg.num_blocks(); ++b) {
        state.begin_block(b);
        BlockRange block       = state.block_bounds(b);
        int        block_steps = 0;

        while (state.masked_in(block) > 0) {
            PredictionStep pred = predictor.predict(state);
            if (static_cast<int>(pred.predictions.size()) < state.active_len()) {
                throw PreconditionError("predictor output does not cover the active region");
            }

            UnmaskDecision decision;
            switch (cfg.kind) {
                case StrategyKind::vanilla:
                    decision = vanilla_decision(pred, block, state.masked(), cfg.tokens_per_step);
                    break;
                case StrategyKind::egp:
                    decision = egp_decision(pred, block, state.masked(), *cfg.reference, block_steps + 1 >= cap);
                    break;
                case StrategyKind::learn2pd:
                    decision = learn2pd_decision(pred, block, state.masked(), *cfg.filter, cfg.tau,
                                                 block_cfg.block_size);
                    break;
            }
            if (observer) {
                observer(state, pred, block, decision);
            }

            StepRecord rec;
            rec.step_index  = state.step();
            rec.block_index = b;
            rec.block_step  = block_steps;
            rec.block_begin = block.first;
            rec.predictions.assign(pred.predictions.begin() + block.first, pred.predictions.begin() + block.second);
            rec.confidences.assign(pred.confidences.begin() + block.first, pred.confidences.begin() + block.second);
            rec.fallback = decision.fallback_used;
            for (int j = block.first; j < block.second; ++j) {
                if (decision.commit[j - block.first]) {
                    state.commit(j, pred.predictions[j]);
                    rec.committed.push_back(j);
                    rec.committed_tokens.push_back(pred.predictions[j]);
                    rec.committed_confidences.push_back(pred.confidences[j]);
                }
            }
            trace.steps.push_back(std::move(rec));
            trace.forward_calls += 1;
            trace.fallback_events += decision.fallback_used ? 1 : 0;
            state.advance_step();
            ++block_steps;

            if (cfg.eotp && cfg.eotp_per_step && apply_eotp(state)) {
                block = state.block_bounds(b);
            }
        }
        trace.per_block_steps.push_back(block_steps);

        if (cfg.eotp && (apply_eotp(state) || state.active_len() < block_cfg.gen_length)) {
            break;
        }
    }

    result.output      = Tokens(state.generation().begin(), state.generation().end());
    trace.final_output = result.output;
    return result;
}

}  // namespace pardec
