#pragma once

#include "pardec/core.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace pardec {

// A mask predictor returns, for every active generation position, its greedy
// prediction and the probability it assigns to that prediction. Committed
// positions report their committed token with confidence 1.0.
class MaskPredictor {
  public:
    virtual ~MaskPredictor() = default;

    virtual PredictionStep     predict(const DecodeState & state) const = 0;
    virtual const Vocabulary & vocabulary() const                       = 0;
};

// Test oracle with a scripted convergence schedule. Position j of the current
// block predicts reference[j] from block step first_correct_step[j] onward and a
// wrong token before that. Positions in blocks not yet started count as "before".
class ScriptedPredictor : public MaskPredictor {
  public:
    struct Script {
        Tokens           reference;           // generation region, one token per position
        std::vector<int> first_correct_step;  // block-local step; same length as reference
    };

    // (generation index, reference token) -> a token that differs from it.
    using WrongTokenPolicy = std::function<TokenId(int position, TokenId reference)>;
    // (generation index, block step, prediction is correct) -> confidence in [0, 1].
    using ConfidenceSchedule = std::function<double(int position, int step, bool correct)>;

    ScriptedPredictor(Vocabulary vocab, Script script, ConfidenceSchedule confidence = {},
                      WrongTokenPolicy wrong = {});

    // Per-prompt scripts; prompts without an entry use the default script.
    void add_script(Tokens prompt, Script script);

    PredictionStep     predict(const DecodeState & state) const override;
    const Vocabulary & vocabulary() const override { return vocab_; }

    const Script & script_for(std::span<const TokenId> prompt) const;

    static ConfidenceSchedule default_confidence();
    // Rotates through the non-reserved ids, skipping the reference token.
    WrongTokenPolicy default_wrong_tokens() const;

  private:
    void validate(const Script & script) const;

    Vocabulary                 vocab_;
    Script                     default_script_;
    std::map<Tokens, Script>   scripts_;
    ConfidenceSchedule         confidence_;
    WrongTokenPolicy           wrong_;
};

struct NGramOptions {
    int    order     = 3;     // context length order - 1
    double smoothing = 0.01;  // add-k constant
    int    max_gap   = 64;    // largest masked run bridged between context and target
};

// Count-based stand-in for a masked language model.
//
// A masked target at generation index j is predicted from its left context: the
// nearest unmasked token to its left (the anchor) plus the contiguous unmasked
// run ending there, up to order - 1 tokens. The number of masked positions
// between the anchor and the target is the gap. Counts are kept per
// (context, gap), so a model trained on "a b c d" learns that "a" predicts "c"
// two positions ahead. Lookups back off to shorter contexts and finally to the
// unigram table. Sequences in the training corpus that end in EoT are treated
// as padded with EoT indefinitely.
class NGramPredictor : public MaskPredictor {
  public:
    // Finalized counts for one (context, gap) key.
    struct CountTable {
        std::vector<std::pair<TokenId, std::uint32_t>> entries;  // ascending token id
        std::uint64_t                                  total  = 0;
        TokenId                                        argmax = -1;  // most frequent, lowest id on ties
        std::uint32_t                                  max_count = 0;

        std::uint32_t count(TokenId t) const;
    };

    PredictionStep     predict(const DecodeState & state) const override;
    const Vocabulary & vocabulary() const override { return vocab_; }

    const NGramOptions & options() const { return opts_; }

    // Full smoothed distribution (vocab.size() entries, zero at mask_id) for a
    // masked generation position.
    std::vector<double> distribution(const DecodeState & state, int j) const;

    // Direct table access. context may be empty (unigram; gap ignored).
    // Returns nullptr when the key was never observed.
    const CountTable * table(std::span<const TokenId> context, int gap) const;

    // Probability under add-k smoothing for a given table.
    double probability(const CountTable & table, TokenId token) const;

    std::size_t num_tables() const { return tables_.size(); }

  private:
    friend NGramPredictor train_ngram(std::span<const Tokens> corpus, const Vocabulary & vocab,
                                      const NGramOptions & opts);

    NGramPredictor(Vocabulary vocab, NGramOptions opts) : vocab_(std::move(vocab)), opts_(opts) {}

    // Table used for a masked position: the longest observed context.
    const CountTable & lookup(const DecodeState & state, int j) const;

    static std::uint64_t key(std::span<const TokenId> context, int gap);

    Vocabulary                                   vocab_;
    NGramOptions                                 opts_;
    std::unordered_map<std::uint64_t, CountTable> tables_;
    CountTable                                   unigram_;
    int                                          support_ = 0;  // tokens that may be emitted
};

// Throws TrainingError on an empty corpus or unsupported options.
NGramPredictor train_ngram(std::span<const Tokens> corpus, const Vocabulary & vocab, const NGramOptions & opts = {});

}  // namespace pardec
