#include "pardec/toy_corpus.hpp"

#include "pardec/errors.hpp"
#include "pardec/rng.hpp"

#include <array>
#include <string_view>

namespace pardec {

namespace {

constexpr std::array<std::string_view, 40> kNouns = {
    "apple", "river", "stone", "cloud", "horse", "lamp",   "bread",  "garden", "window", "bridge",
    "candle", "forest", "rabbit", "mirror", "tower", "violin", "pepper", "harbor", "meadow", "castle",
    "button", "dragon", "feather", "glacier", "hammer", "island", "jacket", "kettle", "ladder", "marble",
    "needle", "orchard", "parrot", "quartz", "rocket", "saddle", "tunnel", "umbrella", "valley", "wagon"};

constexpr std::array<std::string_view, 24> kFillers = {
    "the",    "a",     "is",    "was",   "very",  "quite", "and",   "then",
    "near",   "under", "over",  "with",  "bright", "quiet", "old",  "new",
    "red",    "blue",  "green", "small", "large", "warm",  "cold",  "slow"};

constexpr std::array<std::string_view, 3> kOrdinals = {"once", "twice", "thrice"};

enum class FamilyKind { count_up, repeat, phrase, noisy_fill, successor, count_down };

struct Family {
    int        id;
    FamilyKind kind;
    int        variant;  // f / 6

    std::string tag() const { return "q" + std::to_string(id); }
    int         step() const { return 1 + variant % 3; }
    // Filler word k of this family's private phrase lexicon, e.g. "warm.17".
    std::string filler(int k) const {
        return std::string(kFillers[static_cast<std::size_t>(id * 7 + k * 5) % kFillers.size()]) + "." +
               std::to_string(id);
    }
    // Argument noun k of this family (10 per family).
    std::string_view noun(int k) const {
        return kNouns[static_cast<std::size_t>(id * 3 + k) % kNouns.size()];
    }
};

Family family(int f) {
    return Family{f, static_cast<FamilyKind>(f % 6), f / 6};
}

void append(std::string & s, std::string_view w) {
    if (!s.empty()) {
        s += ' ';
    }
    s += w;
}

// Each continuation token is determined by the two tokens to its left (the
// prompt supplies the first context), except the random draws of noisy_fill.
ToyPair make_pair(const Family & fam, Rng & rng) {
    ToyPair p;
    p.family = fam.id;
    switch (fam.kind) {
        case FamilyKind::count_up: {
            // Count up by the family step until the value reaches 20.
            int v = static_cast<int>(rng.below(10));
            append(p.prompt, "count");
            append(p.prompt, std::to_string(v));
            while (v < 20) {
                v += fam.step();
                append(p.continuation, std::to_string(v));
            }
            break;
        }
        case FamilyKind::count_down: {
            // Count down by the family step until the value drops below 10.
            int v = 20 + static_cast<int>(rng.below(10));
            append(p.prompt, "down");
            append(p.prompt, std::to_string(v));
            while (v >= 10) {
                v -= fam.step();
                append(p.continuation, std::to_string(v));
            }
            break;
        }
        case FamilyKind::repeat: {
            const auto w = fam.noun(static_cast<int>(rng.below(10)));
            append(p.prompt, "say");
            append(p.prompt, w);
            for (auto ord : kOrdinals) {
                append(p.continuation, w);
                append(p.continuation, ord);
            }
            break;
        }
        case FamilyKind::phrase: {
            const auto w = fam.noun(static_cast<int>(rng.below(10)));
            append(p.prompt, "describe");
            append(p.prompt, w);
            append(p.continuation, fam.filler(0));
            append(p.continuation, fam.filler(1));
            for (int k = 0; k < fam.variant % 3; ++k) {
                append(p.continuation, fam.filler(2 + k));
            }
            append(p.continuation, fam.filler(5));
            append(p.continuation, fam.filler(6));
            break;
        }
        case FamilyKind::noisy_fill: {
            const auto w = fam.noun(static_cast<int>(rng.below(10)));
            append(p.prompt, "story");
            append(p.prompt, w);
            append(p.continuation, fam.filler(0));
            append(p.continuation, kNouns[rng.below(kNouns.size())]);
            append(p.continuation, fam.filler(1));
            append(p.continuation, fam.filler(2));
            append(p.continuation, kFillers[rng.below(kFillers.size())]);
            append(p.continuation, fam.filler(3));
            append(p.continuation, fam.filler(4));
            break;
        }
        case FamilyKind::successor: {
            // Walk the noun list from the argument until a stop noun (every
            // fifth entry) has been emitted.
            const int start = fam.id * 3 + static_cast<int>(rng.below(10));
            append(p.prompt, "after");
            append(p.prompt, kNouns[static_cast<std::size_t>(start) % kNouns.size()]);
            for (int k = start + 1;; ++k) {
                append(p.continuation, kNouns[static_cast<std::size_t>(k) % kNouns.size()]);
                if (k % 5 == 0) {
                    break;
                }
            }
            break;
        }
    }
    append(p.prompt, fam.tag());
    return p;
}

}  // namespace

std::vector<ToyPair> make_toy_corpus(const ToyCorpusOptions & opts) {
    if (opts.families < 1 || opts.per_family < 1) {
        throw ConfigError("toy corpus needs at least one family and one sample per family");
    }
    Rng                  rng(opts.seed);
    std::vector<ToyPair> out;
    out.reserve(static_cast<std::size_t>(opts.families) * opts.per_family);
    for (int f = 0; f < opts.families; ++f) {
        const Family fam = family(f);
        for (int i = 0; i < opts.per_family; ++i) {
            out.push_back(make_pair(fam, rng));
        }
    }
    return out;
}

std::vector<ToyPair> make_toy_prompts(int count, int families, std::uint64_t seed) {
    if (count < 0 || families < 1) {
        throw ConfigError("invalid toy prompt request");
    }
    Rng                  rng(seed);
    std::vector<ToyPair> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const Family fam = family(static_cast<int>(rng.below(static_cast<std::uint64_t>(families))));
        out.push_back(make_pair(fam, rng));
    }
    return out;
}

void write_toy_corpus(std::ostream & out, const std::vector<ToyPair> & pairs) {
    for (const auto & p : pairs) {
        out << p.prompt << '\t' << p.continuation << '\n';
    }
}

}  // namespace pardec
