#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pardec {

// Synthetic prompt/continuation pairs from parameterized template families
// (counting, repetition, slot-filled phrases, noisy fills, noun-list successors). Each
// family ends its prompt with a family tag so a short left context identifies
// the task. Continuations are deterministic given the prompt except for the
// noisy-fill families.
struct ToyPair {
    std::string prompt;
    std::string continuation;
    int         family = 0;
};

struct ToyCorpusOptions {
    int           families   = 66;
    int           per_family = 40;
    std::uint64_t seed       = 1;
};

// families * per_family pairs, grouped by family.
std::vector<ToyPair> make_toy_corpus(const ToyCorpusOptions & opts = {});

// `count` pairs with families drawn uniformly; use a seed distinct from the
// training corpus for held-out prompts.
std::vector<ToyPair> make_toy_prompts(int count, int families, std::uint64_t seed);

// One "prompt<TAB>continuation" line per pair.
void write_toy_corpus(std::ostream & out, const std::vector<ToyPair> & pairs);

}  // namespace pardec
