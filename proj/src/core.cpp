#include "pardec/core.hpp"

#include "pardec/errors.hpp"

#include <algorithm>

namespace pardec {

Vocabulary::Vocabulary(std::int32_t size, TokenId mask_id, TokenId eot_id)
    : size_(size), mask_id_(mask_id), eot_id_(eot_id) {
    validate();
}

Vocabulary::Vocabulary(std::vector<std::string> texts, TokenId mask_id, TokenId eot_id)
    : size_(static_cast<std::int32_t>(texts.size())),
      mask_id_(mask_id),
      eot_id_(eot_id),
      texts_(std::make_shared<const std::vector<std::string>>(std::move(texts))) {
    validate();
}

void Vocabulary::validate() const {
    if (size_ <= 0) {
        throw ConfigError("vocabulary size must be positive");
    }
    if (!contains(mask_id_) || !contains(eot_id_)) {
        throw ConfigError("reserved token ids must lie inside the vocabulary");
    }
    if (mask_id_ == eot_id_) {
        throw ConfigError("mask_id and eot_id must differ");
    }
}

std::string Vocabulary::text(TokenId id) const {
    if (id == mask_id_) {
        return "[MASK]";
    }
    if (id == eot_id_) {
        return "[EoT]";
    }
    if (texts_ && contains(id)) {
        return (*texts_)[id];
    }
    return "<" + std::to_string(id) + ">";
}

std::string Vocabulary::render(std::span<const TokenId> tokens) const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) {
            out += ' ';
        }
        out += text(tokens[i]);
    }
    return out;
}

BlockConfig::BlockConfig(int gen_length, int block_size, int max_steps_per_block)
    : gen_length(gen_length), block_size(block_size), max_steps_per_block(max_steps_per_block) {
    validate();
}

void BlockConfig::validate() const {
    if (gen_length <= 0 || block_size <= 0) {
        throw ConfigError("gen_length and block_size must be positive");
    }
    if (gen_length % block_size != 0) {
        throw ConfigError("block_size " + std::to_string(block_size) + " does not divide gen_length " +
                          std::to_string(gen_length));
    }
    if (max_steps_per_block < 0 || step_cap() < block_size) {
        throw ConfigError("max_steps_per_block must be at least block_size");
    }
}

DecodeState::DecodeState(std::span<const TokenId> prompt, const BlockConfig & cfg, Vocabulary vocab)
    : vocab_(std::move(vocab)), cfg_(cfg), prompt_len_(static_cast<int>(prompt.size())) {
    cfg_.validate();
    if (prompt.empty()) {
        throw ConstructionError("prompt must be non-empty");
    }
    for (TokenId t : prompt) {
        if (!vocab_.contains(t)) {
            throw ConstructionError("prompt token " + std::to_string(t) + " outside vocabulary");
        }
        if (t == vocab_.mask_id()) {
            throw ConstructionError("prompt contains the mask token");
        }
    }
    tokens_.reserve(prompt.size() + cfg_.gen_length);
    tokens_.assign(prompt.begin(), prompt.end());
    tokens_.resize(prompt.size() + cfg_.gen_length, vocab_.mask_id());
    masked_.assign(cfg_.gen_length, true);
    active_len_ = cfg_.gen_length;
}

std::pair<int, int> DecodeState::block_bounds(int b) const {
    if (b < 0 || b >= cfg_.num_blocks()) {
        throw IndexError("block " + std::to_string(b) + " out of range [0, " + std::to_string(cfg_.num_blocks()) +
                         ")");
    }
    const int start = b * cfg_.block_size;
    const int end   = std::min((b + 1) * cfg_.block_size, active_len_);
    return {start, std::max(start, end)};
}

int DecodeState::masked_in(std::pair<int, int> range) const {
    int n = 0;
    for (int j = range.first; j < range.second; ++j) {
        n += masked_[j] ? 1 : 0;
    }
    return n;
}

void DecodeState::commit(int j, TokenId token) {
    if (j < 0 || j >= active_len_) {
        throw PreconditionError("commit outside the active generation region");
    }
    if (!masked_[j]) {
        throw PreconditionError("position " + std::to_string(j) + " already committed");
    }
    if (token == vocab_.mask_id() || !vocab_.contains(token)) {
        throw PreconditionError("cannot commit token " + std::to_string(token));
    }
    tokens_[prompt_len_ + j] = token;
    masked_[j]               = false;
}

void DecodeState::truncate(int new_active_len) {
    if (new_active_len < 0 || new_active_len > active_len_) {
        throw PreconditionError("truncate can only shrink the active region");
    }
    active_len_ = new_active_len;
}

void DecodeState::begin_block(int b) {
    if (b < 0 || b >= cfg_.num_blocks()) {
        throw IndexError("block index out of range");
    }
    current_block_ = b;
    block_step_    = 0;
}

void DecodeState::check_invariants() const {
    if (active_len_ > cfg_.gen_length) {
        throw PreconditionError("active_len exceeds gen_length");
    }
    for (int j = 0; j < active_len_; ++j) {
        if (masked_[j] != (gen_token(j) == vocab_.mask_id())) {
            throw PreconditionError("mask flag disagrees with token at generation index " + std::to_string(j));
        }
    }
}

DecodeState new_decode_state(std::span<const TokenId> prompt, const BlockConfig & cfg, const Vocabulary & vocab) {
    return DecodeState(prompt, cfg, vocab);
}

std::pair<int, int> block_bounds(const DecodeState & state, int b) {
    return state.block_bounds(b);
}

std::size_t first_eot(std::span<const TokenId> tokens, TokenId eot_id) {
    return static_cast<std::size_t>(std::find(tokens.begin(), tokens.end(), eot_id) - tokens.begin());
}

Tokens truncate_at_eot(std::span<const TokenId> tokens, TokenId eot_id) {
    const std::size_t n = std::min(first_eot(tokens, eot_id) + 1, tokens.size());
    return Tokens(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace pardec
