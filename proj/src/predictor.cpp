#include "pardec/predictor.hpp"

#include "pardec/errors.hpp"

#include <algorithm>
#include <string>

namespace pardec {

// ---------------------------------------------------------------------------
// ScriptedPredictor

ScriptedPredictor::ScriptedPredictor(Vocabulary vocab, Script script, ConfidenceSchedule confidence,
                                     WrongTokenPolicy wrong)
    : vocab_(std::move(vocab)),
      default_script_(std::move(script)),
      confidence_(confidence ? std::move(confidence) : default_confidence()),
      wrong_(wrong ? std::move(wrong) : default_wrong_tokens()) {
    validate(default_script_);
}

void ScriptedPredictor::add_script(Tokens prompt, Script script) {
    validate(script);
    scripts_.insert_or_assign(std::move(prompt), std::move(script));
}

void ScriptedPredictor::validate(const Script & script) const {
    if (script.reference.size() != script.first_correct_step.size()) {
        throw ConfigError("script reference and first_correct_step lengths differ");
    }
    for (TokenId t : script.reference) {
        if (!vocab_.contains(t) || t == vocab_.mask_id()) {
            throw ConfigError("script reference holds an invalid token");
        }
    }
}

const ScriptedPredictor::Script & ScriptedPredictor::script_for(std::span<const TokenId> prompt) const {
    auto it = scripts_.find(Tokens(prompt.begin(), prompt.end()));
    return it == scripts_.end() ? default_script_ : it->second;
}

ScriptedPredictor::ConfidenceSchedule ScriptedPredictor::default_confidence() {
    return [](int, int, bool correct) { return correct ? 0.9 : 0.4; };
}

ScriptedPredictor::WrongTokenPolicy ScriptedPredictor::default_wrong_tokens() const {
    std::vector<TokenId> pool;
    for (TokenId t = 0; t < vocab_.size(); ++t) {
        if (t != vocab_.mask_id() && t != vocab_.eot_id()) {
            pool.push_back(t);
        }
    }
    if (pool.size() < 2) {
        throw ConfigError("scripted predictor needs at least two ordinary tokens");
    }
    return [pool](int position, TokenId reference) {
        const std::size_t n    = pool.size();
        std::size_t       pick = static_cast<std::size_t>(position) % n;
        if (pool[pick] == reference) {
            pick = (pick + 1) % n;
        }
        return pool[pick];
    };
}

PredictionStep ScriptedPredictor::predict(const DecodeState & state) const {
    const Script & script = script_for(state.prompt());
    if (static_cast<int>(script.reference.size()) < state.active_len()) {
        throw ConfigError("script shorter than the active generation region");
    }
    const int block_size = state.block_config().block_size;

    PredictionStep out;
    out.step_index  = state.step();
    out.block_index = state.current_block();
    out.predictions.resize(state.active_len());
    out.confidences.resize(state.active_len());
    for (int j = 0; j < state.active_len(); ++j) {
        if (!state.is_masked(j)) {
            out.predictions[j] = state.gen_token(j);
            out.confidences[j] = 1.0;
            continue;
        }
        const int  step    = (j / block_size == state.current_block()) ? state.block_step() : -1;
        const bool correct = step >= 0 && step >= script.first_correct_step[j];
        const TokenId ref  = script.reference[j];
        TokenId       tok  = correct ? ref : wrong_(j, ref);
        if (!correct && (tok == ref || tok == vocab_.mask_id() || !vocab_.contains(tok))) {
            throw ConfigError("wrong-token policy returned an invalid token");
        }
        out.predictions[j] = tok;
        out.confidences[j] = std::clamp(confidence_(j, step, correct), 0.0, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// NGramPredictor

namespace {

constexpr int kMaxOrder = 4;
constexpr int kMaxGap   = 255;
constexpr int kMaxVocab = 1 << 16;

}  // namespace

std::uint32_t NGramPredictor::CountTable::count(TokenId t) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), t,
                               [](const auto & e, TokenId v) { return e.first < v; });
    return (it != entries.end() && it->first == t) ? it->second : 0;
}

std::uint64_t NGramPredictor::key(std::span<const TokenId> context, int gap) {
    std::uint64_t k = static_cast<std::uint64_t>(context.size()) | (static_cast<std::uint64_t>(gap) << 2);
    for (std::size_t i = 0; i < context.size(); ++i) {
        k |= static_cast<std::uint64_t>(context[i]) << (10 + 16 * i);
    }
    return k;
}

const NGramPredictor::CountTable * NGramPredictor::table(std::span<const TokenId> context, int gap) const {
    if (context.empty()) {
        return &unigram_;
    }
    if (gap < 0 || gap > opts_.max_gap || static_cast<int>(context.size()) >= opts_.order) {
        return nullptr;
    }
    auto it = tables_.find(key(context, gap));
    return it == tables_.end() ? nullptr : &it->second;
}

double NGramPredictor::probability(const CountTable & t, TokenId token) const {
    if (token == vocab_.mask_id()) {
        return 0.0;
    }
    const double k = opts_.smoothing;
    return (static_cast<double>(t.count(token)) + k) / (static_cast<double>(t.total) + k * support_);
}

const NGramPredictor::CountTable & NGramPredictor::lookup(const DecodeState & state, int j) const {
    const auto & toks   = state.tokens();
    const int    target = state.prompt_len() + j;

    // The prompt is never masked, so an anchor always exists.
    int anchor = target - 1;
    while (anchor >= state.prompt_len() && state.is_masked(anchor - state.prompt_len())) {
        --anchor;
    }
    const int gap = target - anchor - 1;
    if (gap > opts_.max_gap) {
        return unigram_;
    }

    int run = 1;
    while (run < opts_.order - 1 && anchor - run >= 0) {
        const int p = anchor - run;
        if (p >= state.prompt_len() && state.is_masked(p - state.prompt_len())) {
            break;
        }
        ++run;
    }
    for (int c = std::min(run, opts_.order - 1); c >= 1; --c) {
        std::span<const TokenId> ctx(toks.data() + anchor - c + 1, static_cast<std::size_t>(c));
        if (const CountTable * t = table(ctx, gap)) {
            return *t;
        }
    }
    return unigram_;
}

std::vector<double> NGramPredictor::distribution(const DecodeState & state, int j) const {
    if (j < 0 || j >= state.active_len() || !state.is_masked(j)) {
        throw PreconditionError("distribution is defined for masked active positions only");
    }
    const CountTable &  t = lookup(state, j);
    std::vector<double> p(vocab_.size());
    for (TokenId v = 0; v < vocab_.size(); ++v) {
        p[v] = probability(t, v);
    }
    return p;
}

PredictionStep NGramPredictor::predict(const DecodeState & state) const {
    PredictionStep out;
    out.step_index  = state.step();
    out.block_index = state.current_block();
    out.predictions.resize(state.active_len());
    out.confidences.resize(state.active_len());
    for (int j = 0; j < state.active_len(); ++j) {
        if (!state.is_masked(j)) {
            out.predictions[j] = state.gen_token(j);
            out.confidences[j] = 1.0;
            continue;
        }
        // Every stored table has at least one count, so argmax is always set.
        const CountTable & t = lookup(state, j);
        out.predictions[j]   = t.argmax;
        out.confidences[j]   = probability(t, t.argmax);
    }
    return out;
}

NGramPredictor train_ngram(std::span<const Tokens> corpus, const Vocabulary & vocab, const NGramOptions & opts) {
    if (corpus.empty()) {
        throw TrainingError("empty corpus");
    }
    if (opts.order < 1 || opts.order > kMaxOrder) {
        throw TrainingError("n-gram order must lie in [1, " + std::to_string(kMaxOrder) + "]");
    }
    if (opts.max_gap < 0 || opts.max_gap > kMaxGap) {
        throw TrainingError("max_gap must lie in [0, " + std::to_string(kMaxGap) + "]");
    }
    if (!(opts.smoothing >= 0.0)) {
        throw TrainingError("smoothing must be non-negative");
    }
    if (vocab.size() > kMaxVocab) {
        throw TrainingError("vocabulary too large for the n-gram key layout");
    }

    NGramPredictor model(vocab, opts);
    model.support_ = vocab.size() - 1;

    using RawCounts = std::unordered_map<TokenId, std::uint32_t>;
    std::unordered_map<std::uint64_t, RawCounts> raw;
    RawCounts                                    uni;
    bool                                         any = false;

    for (const Tokens & seq : corpus) {
        const int  len       = static_cast<int>(seq.size());
        const bool absorbing = len > 0 && seq.back() == vocab.eot_id();
        for (TokenId t : seq) {
            if (!vocab.contains(t) || t == vocab.mask_id()) {
                throw TrainingError("corpus token " + std::to_string(t) + " is not an ordinary vocabulary id");
            }
            ++uni[t];
            any = true;
        }
        if (opts.order < 2) {
            continue;
        }
        for (int anchor = 0; anchor < len; ++anchor) {
            for (int gap = 0; gap <= opts.max_gap; ++gap) {
                const int target = anchor + 1 + gap;
                TokenId   y;
                if (target < len) {
                    y = seq[target];
                } else if (absorbing) {
                    y = vocab.eot_id();
                } else {
                    break;
                }
                for (int c = 1; c <= opts.order - 1 && anchor - c + 1 >= 0; ++c) {
                    std::span<const TokenId> ctx(seq.data() + anchor - c + 1, static_cast<std::size_t>(c));
                    ++raw[NGramPredictor::key(ctx, gap)][y];
                }
            }
        }
    }
    if (!any) {
        throw TrainingError("empty corpus");
    }

    auto finalize = [](const RawCounts & counts) {
        NGramPredictor::CountTable t;
        t.entries.assign(counts.begin(), counts.end());
        std::sort(t.entries.begin(), t.entries.end());
        for (const auto & [tok, n] : t.entries) {
            t.total += n;
            if (n > t.max_count) {
                t.max_count = n;
                t.argmax    = tok;
            }
        }
        return t;
    };
    model.unigram_ = finalize(uni);
    model.tables_.reserve(raw.size());
    for (const auto & [k, counts] : raw) {
        model.tables_.emplace(k, finalize(counts));
    }
    return model;
}

}  // namespace pardec
