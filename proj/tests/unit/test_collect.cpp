#include "pardec/collect.hpp"
#include "pardec/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace pardec;
using pardec::testing::all_correct;
using pardec::testing::make_script;
using pardec::testing::random_tokens;
using pardec::testing::small_vocab;

namespace {

std::vector<int> alternating(int n) {
    std::vector<int> fcs(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        fcs[j] = j % 2;
    }
    return fcs;
}

}  // namespace

TEST_CASE("pad reference") {
    CHECK(pad_reference(Tokens{4, 5}, 4, 1) == Tokens{4, 5, 1, 1});
    CHECK(pad_reference(Tokens{}, 2, 1) == Tokens{1, 1});
    CHECK_THROWS_AS(pad_reference(Tokens{4, 5, 6}, 2, 1), AlignmentError);
}

TEST_CASE("alternating schedule yields two labelled samples per block") {
    const Vocabulary  v = small_vocab();
    Rng               rng(1);
    const Tokens      ref = random_tokens(rng, 64, v);
    ScriptedPredictor p(v, make_script(ref, alternating(64)));
    const BlockConfig bc(64, 32);

    const std::vector<Tokens> prompts{{7, 8}};
    const std::vector<Tokens> refs{ref};
    const CollectionRun       run = collect_samples(prompts, refs, p, bc);
    REQUIRE(run.samples.size() == 4);
    CHECK(run.forward_calls == 4);
    CHECK(run.traces[0].per_block_steps == std::vector<int>{2, 2});
    CHECK(run.references[0] == ref);

    for (int b = 0; b < 2; ++b) {
        const TrainingSample & first  = run.samples[2 * b];
        const TrainingSample & second = run.samples[2 * b + 1];
        CHECK(run.provenance[2 * b].block == b);
        CHECK(run.provenance[2 * b].step == 2 * b);
        CHECK(run.provenance[2 * b + 1].step == 2 * b + 1);
        for (int i = 0; i < 32; ++i) {
            // Step 0: everything masked, even positions correct.
            CHECK(first.mask_active[i] == 1);
            CHECK(first.labels[i] == (i % 2 == 0 ? 1 : 0));
            // Step 1: only odd positions remain, and they are correct now.
            CHECK(second.mask_active[i] == (i % 2 == 1 ? 1 : 0));
            CHECK(second.labels[i] == 1);
            if (i % 2 == 0) {
                CHECK(second.conf[i] == 1.0);
            }
        }
    }
}

TEST_CASE("sample count equals forward calls") {
    const Vocabulary    v = small_vocab();
    Rng                 rng(2);
    const BlockConfig   bc(64, 16);
    std::vector<Tokens> prompts, refs;
    ScriptedPredictor   p(v, all_correct(Tokens(64, v.eot_id())));
    for (int i = 0; i < 12; ++i) {
        prompts.push_back(random_tokens(rng, 1 + i % 3, v));
        refs.push_back(random_tokens(rng, 64, v));
        std::vector<int> fcs(64);
        for (auto & f : fcs) {
            f = static_cast<int>(rng.below(6));
        }
        p.add_script(prompts.back(), make_script(refs.back(), fcs));
    }
    const CollectionRun run = collect_samples(prompts, refs, p, bc);
    CHECK(static_cast<int>(run.samples.size()) == run.forward_calls);
    CHECK(run.provenance.size() == run.samples.size());
    CHECK(run.traces.size() == prompts.size());
    for (const auto & s : run.samples) {
        CHECK(s.conf.size() == 16);
        CHECK(s.labels.size() == 16);
    }
    // The parallel path produces the same samples in the same order.
    const CollectionRun par = collect_samples(prompts, refs, p, bc, 4);
    REQUIRE(par.samples.size() == run.samples.size());
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
        CHECK(par.samples[i].conf == run.samples[i].conf);
        CHECK(par.samples[i].labels == run.samples[i].labels);
        CHECK(par.provenance[i].prompt == run.provenance[i].prompt);
    }
}

TEST_CASE("collection edge cases") {
    const Vocabulary  v = small_vocab();
    ScriptedPredictor p(v, all_correct(Tokens(32, 5)));
    const BlockConfig bc(32, 32);
    const CollectionRun none = collect_samples(std::vector<Tokens>{}, std::vector<Tokens>{}, p, bc);
    CHECK(none.samples.empty());
    CHECK(none.forward_calls == 0);
    CHECK_THROWS_AS(collect_samples(std::vector<Tokens>{{3}}, std::vector<Tokens>{}, p, bc), AlignmentError);

    CHECK_THROWS_AS(collect_samples(std::vector<Tokens>{{}}, std::vector<Tokens>{Tokens(32, 5)}, p, bc),
                    ConstructionError);
}

TEST_CASE("vanilla references reproduce vanilla decoding") {
    const Vocabulary  v = small_vocab();
    Rng               rng(3);
    const Tokens      ref = random_tokens(rng, 32, v);
    ScriptedPredictor p(v, make_script(ref, alternating(32)));
    const BlockConfig bc(32, 8);
    const auto        out = vanilla_references(std::vector<Tokens>{{4}, {5, 6}}, p, bc);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == ref);
    CHECK(out[1] == ref);
}

TEST_CASE("online training takes one optimizer step per decode step") {
    const Vocabulary  v = small_vocab();
    Rng               rng(4);
    const Tokens      ref = random_tokens(rng, 64, v);
    ScriptedPredictor p(v, all_correct(ref));
    const BlockConfig bc(64, 16);
    const std::vector<Tokens> prompts{{3}, {4}};
    const std::vector<Tokens> refs{ref, ref};

    const FilterModel start = FilterModel::random(16, 16, 2, Activation::relu, rng);
    AdamWConfig       opt;
    const auto        r = online_train(prompts, refs, p, start, opt, bc);
    // All-correct: one step per block.
    CHECK(r.optimizer_steps == 2 * 4);
    CHECK(r.traces.size() == 2);
    CHECK(r.model.layers()[0].weight != start.layers()[0].weight);

    opt.lr           = 0.0;
    const auto still = online_train(prompts, refs, p, start, opt, bc);
    CHECK(still.model.layers()[0].weight == start.layers()[0].weight);
    CHECK(still.model.layers()[1].bias == start.layers()[1].bias);

    CHECK_THROWS_AS(online_train(prompts, refs, p, FilterModel(8, 8), opt, bc), ConfigError);
}
