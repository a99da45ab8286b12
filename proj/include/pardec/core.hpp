#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pardec {

using TokenId = std::int32_t;
using Tokens  = std::vector<TokenId>;

// Token alphabet. Ids 0..size-1; mask_id and eot_id are reserved. The optional
// text table is shared between copies, so a Vocabulary is cheap to pass by value.
class Vocabulary {
  public:
    static constexpr TokenId kDefaultMask = 0;
    static constexpr TokenId kDefaultEot  = 1;

    Vocabulary(std::int32_t size, TokenId mask_id = kDefaultMask, TokenId eot_id = kDefaultEot);
    // size = texts.size(); texts[mask_id] and texts[eot_id] name the reserved tokens.
    Vocabulary(std::vector<std::string> texts, TokenId mask_id = kDefaultMask, TokenId eot_id = kDefaultEot);

    std::int32_t size() const { return size_; }
    TokenId      mask_id() const { return mask_id_; }
    TokenId      eot_id() const { return eot_id_; }

    bool contains(TokenId id) const { return id >= 0 && id < size_; }
    bool has_text() const { return texts_ != nullptr; }

    // "[MASK]", "[EoT]", the table entry, or "<id>" when no table is attached.
    std::string text(TokenId id) const;
    std::string render(std::span<const TokenId> tokens) const;

    bool same_ids(const Vocabulary & other) const {
        return size_ == other.size_ && mask_id_ == other.mask_id_ && eot_id_ == other.eot_id_;
    }

  private:
    void validate() const;

    std::int32_t                                    size_;
    TokenId                                         mask_id_;
    TokenId                                         eot_id_;
    std::shared_ptr<const std::vector<std::string>> texts_;
};

struct BlockConfig {
    int gen_length          = 128;
    int block_size          = 32;
    int max_steps_per_block = 0;  // 0 selects 4 * block_size

    BlockConfig() = default;
    BlockConfig(int gen_length, int block_size, int max_steps_per_block = 0);

    int num_blocks() const { return gen_length / block_size; }
    int step_cap() const { return max_steps_per_block > 0 ? max_steps_per_block : 4 * block_size; }

    // Throws ConfigError when gen_length is not a positive multiple of block_size
    // or the step cap is smaller than the block.
    void validate() const;
};

// Prompt followed by the generation region. Positions in the generation region
// are addressed 0..gen_length-1 throughout; the absolute index into tokens() is
// prompt_len() + j.
class DecodeState {
  public:
    DecodeState(std::span<const TokenId> prompt, const BlockConfig & cfg, Vocabulary vocab);

    const Tokens &            tokens() const { return tokens_; }
    const std::vector<bool> & masked() const { return masked_; }
    const Vocabulary &        vocab() const { return vocab_; }
    const BlockConfig &       block_config() const { return cfg_; }

    int prompt_len() const { return prompt_len_; }
    int gen_length() const { return cfg_.gen_length; }
    int active_len() const { return active_len_; }
    int current_block() const { return current_block_; }

    // Decode-loop counters: total predictor calls so far, and calls made since
    // the current block began. Predictors may read them (ScriptedPredictor does).
    int step() const { return step_; }
    int block_step() const { return block_step_; }

    std::span<const TokenId> prompt() const { return {tokens_.data(), static_cast<std::size_t>(prompt_len_)}; }
    std::span<const TokenId> generation() const {
        return {tokens_.data() + prompt_len_, static_cast<std::size_t>(active_len_)};
    }

    TokenId gen_token(int j) const { return tokens_[prompt_len_ + j]; }
    bool    is_masked(int j) const { return masked_[j]; }

    // Half-open generation-region interval of block b, clipped to active_len.
    std::pair<int, int> block_bounds(int b) const;
    int                 masked_in(std::pair<int, int> range) const;

    // Write a prediction into a masked position. Throws PreconditionError when j
    // is already committed, outside the active region, or token is mask_id.
    void commit(int j, TokenId token);

    // Drop every position at or after new_active_len. Only shrinks.
    void truncate(int new_active_len);

    void begin_block(int b);
    void advance_step() {
        ++step_;
        ++block_step_;
    }

    // Throws PreconditionError describing the first violated invariant.
    void check_invariants() const;

  private:
    Tokens            tokens_;
    std::vector<bool> masked_;
    Vocabulary        vocab_;
    BlockConfig       cfg_;
    int               prompt_len_;
    int               active_len_;
    int               current_block_ = 0;
    int               step_          = 0;
    int               block_step_    = 0;
};

DecodeState new_decode_state(std::span<const TokenId> prompt, const BlockConfig & cfg, const Vocabulary & vocab);

// Free-function form of DecodeState::block_bounds; throws IndexError when b is
// not below gen_length / block_size.
std::pair<int, int> block_bounds(const DecodeState & state, int b);

// Greedy prediction and its confidence for every active generation position.
struct PredictionStep {
    Tokens              predictions;
    std::vector<double> confidences;
    int                 step_index  = 0;
    int                 block_index = 0;
};

// One decode step as recorded in a trace. predictions/confidences cover the
// block window [block_begin, block_begin + predictions.size()).
struct StepRecord {
    int                 step_index  = 0;
    int                 block_index = 0;
    int                 block_step  = 0;
    int                 block_begin = 0;
    Tokens              predictions;
    std::vector<double> confidences;
    std::vector<int>    committed;  // generation indices, ascending
    Tokens              committed_tokens;
    std::vector<double> committed_confidences;
    bool                fallback = false;
};

struct DecodeTrace {
    std::vector<StepRecord> steps;
    int                     forward_calls   = 0;
    int                     fallback_events = 0;
    Tokens                  final_output;  // generation region, first active_len positions
    std::vector<int>        per_block_steps;
};

// Index of the first eot_id in tokens, or tokens.size() when absent.
std::size_t first_eot(std::span<const TokenId> tokens, TokenId eot_id);

// Prefix up to and including the first EoT.
Tokens truncate_at_eot(std::span<const TokenId> tokens, TokenId eot_id);

}  // namespace pardec
