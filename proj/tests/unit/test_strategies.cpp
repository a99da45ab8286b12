#include "pardec/errors.hpp"
#include "pardec/strategies.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace pardec;
using pardec::testing::all_correct;
using pardec::testing::make_script;
using pardec::testing::random_tokens;
using pardec::testing::small_vocab;

namespace {

PredictionStep step_with(std::vector<double> conf, Tokens preds = {}) {
    PredictionStep p;
    if (preds.empty()) {
        preds.assign(conf.size(), 5);
    }
    p.predictions = std::move(preds);
    p.confidences = std::move(conf);
    return p;
}

DecodeResult run(const MaskPredictor & p, const StrategyConfig & cfg, const BlockConfig & bc, Tokens prompt = {3}) {
    DecodeState s(prompt, bc, p.vocabulary());
    return decode(s, p, cfg, bc);
}

StrategyConfig egp_with(Tokens reference) {
    StrategyConfig c;
    c.kind      = StrategyKind::egp;
    c.reference = std::move(reference);
    return c;
}

StrategyConfig learn2pd_with(std::shared_ptr<const FilterModel> f, double tau) {
    StrategyConfig c;
    c.kind   = StrategyKind::learn2pd;
    c.filter = std::move(f);
    c.tau    = tau;
    return c;
}

// One dense layer: logit_j = scale * conf_j + shift.
std::shared_ptr<const FilterModel> diagonal_filter(int s, double scale, double shift) {
    FilterModel f(s, s, 1, Activation::identity);
    f.layers()[0].weight = scale * Eigen::MatrixXd::Identity(s, s);
    f.layers()[0].bias   = Eigen::VectorXd::Constant(s, shift);
    return std::make_shared<const FilterModel>(std::move(f));
}

void check_trace_invariants(const DecodeTrace & t) {
    CHECK(t.forward_calls == static_cast<int>(t.steps.size()));
    CHECK(std::accumulate(t.per_block_steps.begin(), t.per_block_steps.end(), 0) == t.forward_calls);
}

}  // namespace

TEST_CASE("vanilla decision commits the k most confident masked positions") {
    const std::vector<bool> masked(4, true);
    auto                    d = vanilla_decision(step_with({0.1, 0.9, 0.5, 0.2}), {0, 4}, masked, 1);
    CHECK(d.commit == std::vector<std::uint8_t>{0, 1, 0, 0});
    CHECK_FALSE(d.fallback_used);
    d = vanilla_decision(step_with({0.1, 0.9, 0.5, 0.2}), {0, 4}, masked, 4);
    CHECK(d.count() == 4);
    d = vanilla_decision(step_with({0.1, 0.9, 0.5, 0.2}), {0, 4}, masked, 2);
    CHECK(d.commit == std::vector<std::uint8_t>{0, 1, 1, 0});
    // Ties go to the leftmost position; committed positions are skipped.
    d = vanilla_decision(step_with({0.7, 0.7, 1.0, 0.7}), {0, 4}, {true, true, false, true}, 1);
    CHECK(d.commit == std::vector<std::uint8_t>{1, 0, 0, 0});
    d = vanilla_decision(step_with({0.2, 0.3, 0.4, 0.5, 0.6, 0.1}), {2, 6}, std::vector<bool>(6, true), 9);
    CHECK(d.commit == std::vector<std::uint8_t>{1, 1, 1, 1});
}

TEST_CASE("egp decision commits exactly the matches") {
    const std::vector<bool> masked{true, true, false, true};
    const Tokens            ref{4, 5, 6, 7};
    auto d = egp_decision(step_with({0.1, 0.2, 1.0, 0.3}, {4, 9, 6, 7}), {0, 4}, masked, ref);
    CHECK(d.commit == std::vector<std::uint8_t>{1, 0, 0, 1});
    d = egp_decision(step_with({0.1, 0.2, 1.0, 0.3}, {8, 9, 6, 8}), {0, 4}, masked, ref);
    CHECK(d.count() == 0);
    d = egp_decision(step_with({0.1, 0.2, 1.0, 0.3}, {8, 9, 6, 8}), {0, 4}, masked, ref, true);
    CHECK(d.commit == std::vector<std::uint8_t>{0, 0, 0, 1});
    CHECK(d.fallback_used);
}

TEST_CASE("learn2pd decision thresholds sigmoid outputs and falls back") {
    const std::vector<bool> masked{true, true, false, true};
    const auto              zero = std::make_shared<const FilterModel>(4, 4);
    auto d = learn2pd_decision(step_with({0.1, 0.8, 1.0, 0.3}), {0, 4}, masked, *zero, 0.0, 4);
    CHECK(d.commit == std::vector<std::uint8_t>{1, 1, 0, 1});
    d = learn2pd_decision(step_with({0.1, 0.8, 1.0, 0.3}), {0, 4}, masked, *zero, 0.96, 4);
    CHECK(d.commit == std::vector<std::uint8_t>{0, 1, 0, 0});
    CHECK(d.fallback_used);

    // logit = 10 * conf - 7: commit conf > 0.7 + ln(tau/(1-tau))/10.
    const auto diag = diagonal_filter(4, 10.0, -7.0);
    d = learn2pd_decision(step_with({0.95, 0.8, 1.0, 0.99}), {0, 4}, masked, *diag, 0.9, 4);
    CHECK(d.commit == std::vector<std::uint8_t>{1, 0, 0, 1});
    CHECK_FALSE(d.fallback_used);

    CHECK_THROWS_AS(learn2pd_decision(step_with({0.1, 0.8, 1.0, 0.3}), {0, 4}, masked, FilterModel(8, 8), 0.5, 4),
                    ConfigError);
}

TEST_CASE("block confidences read committed and out-of-range positions as 1") {
    const auto c = block_confidences(step_with({0.2, 0.3, 0.4}), {0, 3}, {true, false, true}, 4);
    CHECK(c == std::vector<double>{0.2, 1.0, 0.4, 1.0});
}

TEST_CASE("decode: all-correct predictor") {
    const Vocabulary v = small_vocab();
    Rng              rng(1);
    const Tokens     ref = random_tokens(rng, 128, v);
    ScriptedPredictor p(v, all_correct(ref));
    const BlockConfig bc(128, 32);

    const DecodeResult e = run(p, egp_with(ref), bc);
    CHECK(e.trace.forward_calls == 4);
    CHECK(e.trace.per_block_steps == std::vector<int>{1, 1, 1, 1});
    CHECK(e.output == ref);
    check_trace_invariants(e.trace);

    const DecodeResult van = run(p, StrategyConfig{}, bc);
    CHECK(van.trace.forward_calls == 128);
    CHECK(van.trace.per_block_steps == std::vector<int>{32, 32, 32, 32});
    CHECK(van.output == ref);
    check_trace_invariants(van.trace);
}

TEST_CASE("decode: early end-of-text with EoTP stops after block 0") {
    const Vocabulary v = small_vocab();
    Rng              rng(2);
    Tokens           ref = random_tokens(rng, 1024, v);
    ref[20]              = v.eot_id();
    ScriptedPredictor p(v, all_correct(ref));
    const BlockConfig bc(1024, 32);

    StrategyConfig c = egp_with(ref);
    c.eotp           = true;
    const DecodeResult e = run(p, c, bc);
    CHECK(e.trace.forward_calls == 1);
    CHECK(e.trace.per_block_steps.size() == 1);
    CHECK(e.output == Tokens(ref.begin(), ref.begin() + 21));

    StrategyConfig vc;
    vc.eotp                = true;
    const DecodeResult van = run(p, vc, bc);
    CHECK(van.trace.forward_calls == 32);
    CHECK(van.output == e.output);
}

TEST_CASE("decode: EGP steps equal the latest first-correct step plus one") {
    const Vocabulary v = small_vocab();
    Rng              rng(3);
    const int        s = 8;
    for (int trial = 0; trial < 50; ++trial) {
        const Tokens     ref = random_tokens(rng, 32, v);
        std::vector<int> fcs(32);
        for (auto & f : fcs) {
            f = static_cast<int>(rng.below(s));
        }
        ScriptedPredictor  p(v, make_script(ref, fcs));
        const DecodeResult e = run(p, egp_with(ref), BlockConfig(32, s));
        for (int b = 0; b < 4; ++b) {
            const int latest = *std::max_element(fcs.begin() + b * s, fcs.begin() + (b + 1) * s);
            CHECK(e.trace.per_block_steps[b] == latest + 1);
        }
        CHECK(e.output == ref);
        CHECK(e.trace.fallback_events == 0);
    }
}

TEST_CASE("decode: alternating schedule takes two EGP steps per block") {
    const Vocabulary v = small_vocab();
    Rng              rng(4);
    const Tokens     ref = random_tokens(rng, 64, v);
    std::vector<int> fcs(64);
    for (int j = 0; j < 64; ++j) {
        fcs[j] = j % 2;
    }
    ScriptedPredictor p(v, make_script(ref, fcs));
    CHECK(run(p, egp_with(ref), BlockConfig(64, 32)).trace.per_block_steps == std::vector<int>{2, 2});
}

TEST_CASE("decode: a never-correct position is forced at the step cap") {
    const Vocabulary v = small_vocab();
    const Tokens     ref{4, 5, 6, 7};
    ScriptedPredictor p(v, make_script(ref, {0, 0, 1000, 0}));
    const BlockConfig bc(4, 4, 8);
    const DecodeResult e = run(p, egp_with(ref), bc);
    CHECK(e.trace.per_block_steps == std::vector<int>{8});
    CHECK(e.trace.fallback_events == 1);
    CHECK(e.trace.steps.back().fallback);
    CHECK(e.output[2] != 6);
    // Steps between the first and the cap commit nothing.
    for (int k = 1; k < 7; ++k) {
        CHECK(e.trace.steps[k].committed.empty());
    }
}

TEST_CASE("decode: learn2pd limiting thresholds") {
    const Vocabulary v = small_vocab();
    Rng              rng(5);
    const Tokens     ref = random_tokens(rng, 64, v);
    ScriptedPredictor p(v, all_correct(ref));
    const BlockConfig bc(64, 32);
    const auto        zero = std::make_shared<const FilterModel>(32, 32);

    const DecodeResult all = run(p, learn2pd_with(zero, 0.0), bc);
    CHECK(all.trace.per_block_steps == std::vector<int>{1, 1});
    CHECK(all.trace.fallback_events == 0);

    const DecodeResult sat = run(p, learn2pd_with(zero, 1.0 - 1e-12), bc);
    CHECK(sat.trace.forward_calls == run(p, StrategyConfig{}, bc).trace.forward_calls);
    CHECK(sat.trace.fallback_events == sat.trace.forward_calls);

    const DecodeResult def = run(p, learn2pd_with(zero, 0.96), bc);
    CHECK(def.trace.fallback_events == def.trace.forward_calls);
    for (const auto & st : def.trace.steps) {
        CHECK(st.committed.size() == 1);
    }
}

TEST_CASE("decode: configuration errors") {
    const Vocabulary  v = small_vocab();
    ScriptedPredictor p(v, all_correct(Tokens(8, 4)));
    const BlockConfig bc(8, 4);

    StrategyConfig missing_ref;
    missing_ref.kind = StrategyKind::egp;
    CHECK_THROWS_AS(run(p, missing_ref, bc), ConfigError);
    StrategyConfig short_ref = egp_with(Tokens(4, 4));
    CHECK_THROWS_AS(run(p, short_ref, bc), ConfigError);

    StrategyConfig no_filter;
    no_filter.kind = StrategyKind::learn2pd;
    CHECK_THROWS_AS(run(p, no_filter, bc), ConfigError);
    CHECK_THROWS_AS(run(p, learn2pd_with(std::make_shared<const FilterModel>(8, 8), 0.5), bc), ConfigError);

    StrategyConfig bad_k;
    bad_k.tokens_per_step = 0;
    CHECK_THROWS_AS(run(p, bad_k, bc), ConfigError);

    DecodeState other(Tokens{3}, bc, small_vocab(32));
    CHECK_THROWS_AS(decode(other, p, StrategyConfig{}, bc), ConfigError);

    DecodeState used(Tokens{3}, bc, v);
    used.commit(0, 4);
    CHECK_THROWS_AS(decode(used, p, StrategyConfig{}, bc), PreconditionError);
}

TEST_CASE("decode leaves the prompt untouched and every vanilla/learn2pd step makes progress") {
    const Vocabulary v = small_vocab();
    Rng              rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Tokens     ref = random_tokens(rng, 32, v);
        std::vector<int> fcs(32);
        for (auto & f : fcs) {
            f = static_cast<int>(rng.below(10));
        }
        ScriptedPredictor p(v, make_script(ref, fcs));
        const Tokens      prompt = random_tokens(rng, 5, v);
        for (const StrategyConfig & c :
             {StrategyConfig{}, learn2pd_with(diagonal_filter(8, 20.0, -15.0), 0.9)}) {
            DecodeState        s(prompt, BlockConfig(32, 8), v);
            const DecodeResult r = decode(s, p, c, BlockConfig(32, 8));
            CHECK(Tokens(s.prompt().begin(), s.prompt().end()) == prompt);
            CHECK_NOTHROW(s.check_invariants());
            for (const auto & st : r.trace.steps) {
                CHECK_FALSE(st.committed.empty());
            }
            check_trace_invariants(r.trace);
        }
    }
}

TEST_CASE("EGP dominates vanilla k=1 per block and reproduces its reference") {
    const Vocabulary v = small_vocab();
    Rng              rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int        s  = 1 << (1 + rng.below(5));
        const int        nb = 1 + static_cast<int>(rng.below(4));
        const Tokens     ref = random_tokens(rng, s * nb, v);
        std::vector<int> fcs(ref.size());
        for (auto & f : fcs) {
            f = static_cast<int>(rng.below(static_cast<std::uint64_t>(s)));
        }
        ScriptedPredictor  p(v, make_script(ref, fcs));
        const BlockConfig  bc(s * nb, s);
        const DecodeResult e   = run(p, egp_with(ref), bc);
        const DecodeResult van = run(p, StrategyConfig{}, bc);
        REQUIRE(e.trace.per_block_steps.size() == van.trace.per_block_steps.size());
        for (std::size_t b = 0; b < e.trace.per_block_steps.size(); ++b) {
            CHECK(e.trace.per_block_steps[b] <= van.trace.per_block_steps[b]);
        }
        CHECK(e.output == ref);
    }
}

TEST_CASE("eotp truncate") {
    const Vocabulary v = small_vocab();
    DecodeState      s(Tokens{3}, BlockConfig(16, 4), v);
    CHECK(eotp_truncate(s).active_len() == 16);  // nothing committed
    s.commit(9, v.eot_id());
    s.commit(3, v.eot_id());
    CHECK(eotp_truncate(s).active_len() == 4);

    DecodeState one(Tokens{3}, BlockConfig(16, 4), v);
    one.commit(5, v.eot_id());
    DecodeState cut = eotp_truncate(one);
    CHECK(cut.active_len() == 6);
    CHECK(cut.generation().size() == 6);
    CHECK(one.active_len() == 16);  // value semantics
    CHECK(apply_eotp(one));
    CHECK(one.active_len() == 6);
}

TEST_CASE("EoTP on equals truncated EoTP off and never costs more calls") {
    const Vocabulary v = small_vocab();
    Rng              rng(8);
    for (int trial = 0; trial < 60; ++trial) {
        const int        s   = 8;
        const int        nb  = 4;
        Tokens           ref = random_tokens(rng, s * nb, v);
        const int        eot = static_cast<int>(rng.below(static_cast<std::uint64_t>(s * nb)));
        std::fill(ref.begin() + eot, ref.end(), v.eot_id());
        std::vector<int> fcs(ref.size());
        for (auto & f : fcs) {
            f = static_cast<int>(rng.below(6));
        }
        ScriptedPredictor p(v, make_script(ref, fcs));
        const BlockConfig bc(s * nb, s);

        for (StrategyConfig c : {StrategyConfig{}, egp_with(ref)}) {
            c.eotp                 = false;
            const DecodeResult off = run(p, c, bc);
            c.eotp                 = true;
            const DecodeResult on  = run(p, c, bc);
            CHECK(on.output == truncate_at_eot(off.output, v.eot_id()));
            CHECK(on.trace.forward_calls <= off.trace.forward_calls);
            const std::size_t first = first_eot(off.output, v.eot_id());
            if (first < off.output.size() && static_cast<int>(first) / s < nb - 1) {
                CHECK(on.trace.forward_calls < off.trace.forward_calls);
            }
        }

        // Per-step truncation gives the same text for the oracle policy.
        StrategyConfig step = egp_with(ref);
        step.eotp           = true;
        step.eotp_per_step  = true;
        const DecodeResult per_step = run(p, step, bc);
        CHECK(per_step.output == Tokens(ref.begin(), ref.begin() + eot + 1));
    }
}

TEST_CASE("lowering tau never increases calls on fallback-free runs") {
    const Vocabulary v = small_vocab();
    Rng              rng(9);
    // Correct predictions grow more confident with position and block step, so
    // every tau in the sweep eventually admits every position.
    auto confidence = [](int position, int step, bool correct) {
        return correct ? std::min(1.0, 0.9 + 0.0125 * (position % 8) + 0.02 * step) : 0.3;
    };
    // logit = 60 * (conf - 0.9) + 2.2, so sigmoid(logit) > 0.9 for every correct prediction.
    const auto filter   = diagonal_filter(8, 60.0, 2.2 - 54.0);
    int        compared = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Tokens     ref = random_tokens(rng, 32, v);
        std::vector<int> fcs(32, 0);
        if (trial > 0) {
            for (auto & f : fcs) {
                f = static_cast<int>(rng.below(2));
            }
        }
        ScriptedPredictor p(v, make_script(ref, fcs), confidence);
        int               prev_calls = -1;
        bool              prev_clean = false;
        std::vector<int>  calls;
        for (double tau : {0.99, 0.96, 0.93, 0.90}) {
            const DecodeResult r     = run(p, learn2pd_with(filter, tau), BlockConfig(32, 8));
            const bool         clean = r.trace.fallback_events == 0;
            if (prev_clean && clean) {
                CHECK(r.trace.forward_calls <= prev_calls);
                ++compared;
            }
            prev_calls = r.trace.forward_calls;
            prev_clean = clean;
            calls.push_back(r.trace.forward_calls);
        }
        if (trial == 0) {
            CHECK(calls == std::vector<int>{12, 8, 8, 4});
        }
    }
    CHECK(compared > 0);
}

TEST_CASE("decode is deterministic") {
    const Vocabulary v = small_vocab();
    Rng              rng(10);
    const Tokens     ref = random_tokens(rng, 32, v);
    std::vector<int> fcs(32, 2);
    ScriptedPredictor p(v, make_script(ref, fcs));
    const auto        a = run(p, learn2pd_with(diagonal_filter(8, 10.0, -5.0), 0.9), BlockConfig(32, 8));
    const auto        b = run(p, learn2pd_with(diagonal_filter(8, 10.0, -5.0), 0.9), BlockConfig(32, 8));
    CHECK(a.output == b.output);
    CHECK(a.trace.forward_calls == b.trace.forward_calls);
}
