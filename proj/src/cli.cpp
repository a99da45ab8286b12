#include "pardec/cli.hpp"

#include "pardec/collect.hpp"
#include "pardec/corpus.hpp"
#include "pardec/errors.hpp"
#include "pardec/filter.hpp"
#include "pardec/io.hpp"
#include "pardec/metrics.hpp"
#include "pardec/pipeline.hpp"
#include "pardec/predictor.hpp"
#include "pardec/rng.hpp"
#include "pardec/strategies.hpp"
#include "pardec/toy_corpus.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

namespace pardec {

namespace {

// --- shared option groups -----------------------------------------------------

struct BlockOpts {
    int gen_length = 128;
    int block_size = 32;
    int max_steps  = 0;

    void add(CLI::App * app) {
        app->add_option("--gen-length", gen_length, "Generation length")->capture_default_str();
        app->add_option("--block-size", block_size, "Block size")->capture_default_str();
        app->add_option("--max-steps-per-block", max_steps, "Per-block step cap (0 = 4 * block size)")
            ->capture_default_str();
    }
    BlockConfig config() const { return BlockConfig(gen_length, block_size, max_steps); }
    Json        json() const {
        return Json{{"gen_length", gen_length}, {"block_size", block_size}, {"max_steps_per_block", max_steps}};
    }
};

struct PredictorOpts {
    std::string kind      = "ngram";
    int         order     = 3;
    double      smoothing = 0.01;
    int         max_gap   = 64;

    void add(CLI::App * app) {
        app->add_option("--predictor", kind, "Mask predictor")
            ->check(CLI::IsMember({"ngram", "scripted"}))
            ->capture_default_str();
        app->add_option("--order", order, "n-gram order")->capture_default_str();
        app->add_option("--smoothing", smoothing, "n-gram add-k constant")->capture_default_str();
        app->add_option("--max-gap", max_gap, "Largest masked run bridged by the n-gram")->capture_default_str();
    }
    Json json() const {
        if (kind == "scripted") {
            return Json{{"kind", kind}};
        }
        return Json{{"kind", kind}, {"order", order}, {"smoothing", smoothing}, {"max_gap", max_gap}};
    }
};

struct StrategyOpts {
    std::string strategy      = "vanilla";
    int         k             = 1;
    double      tau           = 0.96;
    bool        eotp          = false;
    bool        eotp_per_step = false;
    std::string weights;

    void add(CLI::App * app, bool with_strategy) {
        if (with_strategy) {
            app->add_option("--strategy", strategy, "Unmask policy")
                ->check(CLI::IsMember({"vanilla", "egp", "learn2pd"}))
                ->capture_default_str();
        }
        app->add_option("--k", k, "Tokens committed per step (vanilla)")->capture_default_str();
        app->add_option("--tau", tau, "Commit threshold (learn2pd)")->capture_default_str();
        app->add_flag("--eotp", eotp, "Stop after the block that commits an end-of-text token");
        app->add_flag("--eotp-per-step", eotp_per_step, "Check for end-of-text after every step");
        app->add_option("--weights", weights, "Filter weights file (learn2pd)");
    }
};

// --- file helpers ---------------------------------------------------------------

std::ofstream open_out(const std::string & path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open " + path + " for writing");
    }
    return f;
}

std::ifstream open_in(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + path);
    }
    return f;
}

void finish(std::ofstream & f, const std::string & path) {
    f.flush();
    if (!f) {
        throw IoError("write failure on " + path);
    }
}

Corpus read_corpus(CorpusReader & reader, const std::string & path) {
    Corpus c = reader.read_file(path);
    if (c.entries.empty()) {
        throw ParseError(path + ": empty corpus");
    }
    return c;
}

// Reference continuation terminated by EoT and padded to gen_length.
Tokens padded_reference(Tokens ref, int gen_length, TokenId eot) {
    if (first_eot(ref, eot) == ref.size() && static_cast<int>(ref.size()) < gen_length) {
        ref.push_back(eot);
    }
    return pad_reference(ref, gen_length, eot);
}

ScriptedPredictor::Script all_correct_script(Tokens reference) {
    ScriptedPredictor::Script s;
    s.first_correct_step.assign(reference.size(), 0);
    s.reference = std::move(reference);
    return s;
}

// ngram: trained on the corpus. scripted: correct from the first step on the
// given per-prompt references; other prompts see an all-EoT script.
std::unique_ptr<MaskPredictor> make_predictor(const PredictorOpts & opts, const Corpus & train, const Vocabulary & vocab,
                                              const std::vector<std::pair<Tokens, Tokens>> & scripts,
                                              int gen_length) {
    if (opts.kind == "ngram") {
        NGramOptions no;
        no.order     = opts.order;
        no.smoothing = opts.smoothing;
        no.max_gap   = opts.max_gap;
        return std::make_unique<NGramPredictor>(train_ngram(train.training_sequences(vocab.eot_id()), vocab, no));
    }
    auto p = std::make_unique<ScriptedPredictor>(
        vocab, all_correct_script(Tokens(static_cast<std::size_t>(gen_length), vocab.eot_id())));
    for (const auto & [prompt, ref] : scripts) {
        p->add_script(prompt, all_correct_script(ref));
    }
    return p;
}

std::vector<std::pair<Tokens, Tokens>> gold_scripts(const Corpus & corpus, int gen_length, TokenId eot) {
    std::vector<std::pair<Tokens, Tokens>> out;
    for (const auto & e : corpus.entries) {
        if (e.paired) {
            out.emplace_back(e.prompt, padded_reference(e.continuation, gen_length, eot));
        }
    }
    return out;
}

std::shared_ptr<const FilterModel> load_filter(const std::string & path) {
    if (path.empty()) {
        throw ConfigError("learn2pd needs --weights");
    }
    return std::make_shared<const FilterModel>(load_weights_file(path));
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string pad_right(std::string s, std::size_t width) {
    if (s.size() < width) {
        s.append(width - s.size(), ' ');
    }
    return s;
}

std::string pad_left(const std::string & s, std::size_t width) {
    return s.size() < width ? std::string(width - s.size(), ' ') + s : s;
}

// "0.99,0.96" or "lo:hi[:step]" (step 0.01), returned in descending order.
std::vector<double> parse_tau_sweep(const std::string & text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream   ss(text);
        std::string         item;
        while (std::getline(ss, item, ':')) {
            try {
                parts.push_back(std::stod(item));
            } catch (const std::exception &) {
                throw ConfigError("bad --tau-sweep value '" + item + "'");
            }
        }
        if (parts.size() < 2 || parts.size() > 3) {
            throw ConfigError("--tau-sweep range must be lo:hi or lo:hi:step");
        }
        const double lo = parts[0], hi = parts[1], step = parts.size() == 3 ? parts[2] : 0.01;
        if (!(step > 0.0) || lo > hi) {
            throw ConfigError("--tau-sweep range needs lo <= hi and a positive step");
        }
        const long long n = std::llround(std::floor((hi - lo) / step + 1e-9));
        for (long long i = 0; i <= n; ++i) {
            out.push_back(std::round((hi - static_cast<double>(i) * step) * 1e9) / 1e9);
        }
    } else {
        std::stringstream ss(text);
        std::string       item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception &) {
                throw ConfigError("bad --tau-sweep value '" + item + "'");
            }
        }
    }
    if (out.empty()) {
        throw ConfigError("empty --tau-sweep");
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

// --- make-corpus ------------------------------------------------------------------

struct MakeCorpusOpts {
    std::string   out;
    int           families   = 66;
    int           per_family = 40;
    int           heldout    = 0;
    std::uint64_t seed       = 1;
};

void cmd_make_corpus(const MakeCorpusOpts & o, std::ostream & log) {
    const auto pairs = o.heldout > 0 ? make_toy_prompts(o.heldout, o.families, o.seed)
                                     : make_toy_corpus({o.families, o.per_family, o.seed});
    auto f = open_out(o.out);
    write_toy_corpus(f, pairs);
    finish(f, o.out);
    log << "wrote " << pairs.size() << " pairs to " << o.out << "\n";
}

// --- collect ------------------------------------------------------------------

struct CollectOpts {
    std::string   corpus;
    std::string   out;
    int           jobs = 1;
    BlockOpts     block;
    PredictorOpts predictor;
};

void cmd_collect(const CollectOpts & o, std::ostream & log) {
    CorpusReader reader;
    const Corpus corpus = read_corpus(reader, o.corpus);
    const Vocabulary vocab = reader.vocabulary();
    const BlockConfig bc = o.block.config();
    auto pred = make_predictor(o.predictor, corpus, vocab, gold_scripts(corpus, bc.gen_length, vocab.eot_id()),
                               bc.gen_length);

    const auto prompts = corpus.prompts();
    const auto refs    = vanilla_references(prompts, *pred, bc, o.jobs);
    const auto run     = collect_samples(prompts, refs, *pred, bc, o.jobs);

    const Json cfg = {{"command", "collect"}, {"corpus", o.corpus}, {"block", o.block.json()},
                      {"predictor", o.predictor.json()}, {"prompts", prompts.size()},
                      {"forward_calls", run.forward_calls}};
    auto f = open_out(o.out);
    write_dataset(f, run.samples, run.provenance, cfg);
    finish(f, o.out);
    log << "prompts " << prompts.size() << "\nsamples " << run.samples.size() << "\nforward_calls "
        << run.forward_calls << "\n";
}

// --- train-filter -----------------------------------------------------------------

struct TrainOpts {
    std::string   dataset;
    std::string   out;
    std::string   loss_curve;
    int           epochs       = 5000;
    double        lr           = 1e-3;
    double        weight_decay = 0.01;
    int           layers       = 2;
    int           hidden       = 0;
    int           batch_size   = 64;
    double        val_fraction = 0.1;
    std::string   activation   = "relu";
    std::uint64_t seed         = 0;
};

void cmd_train_filter(const TrainOpts & o, std::ostream & log) {
    auto          in = open_in(o.dataset);
    const Dataset ds = read_dataset(in, o.dataset);

    TrainConfig tc;
    tc.optimizer.lr           = o.lr;
    tc.optimizer.weight_decay = o.weight_decay;
    tc.epochs                 = o.epochs;
    tc.batch_size             = o.batch_size;
    tc.val_fraction           = o.val_fraction;
    tc.seed                   = o.seed;
    tc.hidden                 = o.hidden;
    tc.depth                  = o.layers;
    tc.activation             = parse_activation(o.activation);

    const int   every  = std::max(1, o.epochs / 10);
    TrainResult result = train_filter(ds.samples, tc, [&](const EpochLoss & e) {
        if (e.epoch == 1 || e.epoch % every == 0) {
            log << "epoch " << e.epoch << " train " << format_double(e.train_loss) << " val "
                << format_double(e.val_loss) << "\n";
        }
    });

    save_weights_file(o.out, result.model);
    const std::string curve_path = o.loss_curve.empty() ? o.out + ".loss.csv" : o.loss_curve;
    const Json        cfg = {{"command", "train-filter"},  {"dataset", o.dataset},        {"epochs", o.epochs},
                             {"lr", o.lr},                 {"weight_decay", o.weight_decay}, {"layers", o.layers},
                             {"hidden", o.hidden},         {"batch_size", o.batch_size},
                             {"val_fraction", o.val_fraction}, {"activation", o.activation}, {"seed", o.seed},
                             {"parameters", result.model.parameter_count()}, {"dataset_config", ds.config}};
    auto f = open_out(curve_path);
    write_loss_curve(f, result.history, cfg);
    finish(f, curve_path);
    log << "parameters " << result.model.parameter_count() << "\nweights " << o.out << "\nloss_curve " << curve_path
        << "\n";
}

// --- decode -------------------------------------------------------------------

struct DecodeOpts {
    std::string   corpus;
    std::string   prompt;
    std::string   reference;
    std::string   trace;
    BlockOpts     block;
    PredictorOpts predictor;
    StrategyOpts  strategy;
};

void cmd_decode(const DecodeOpts & o, std::ostream & log) {
    CorpusReader reader;
    const Corpus corpus = read_corpus(reader, o.corpus);
    const Vocabulary vocab = reader.vocabulary();
    const BlockConfig bc = o.block.config();
    const Tokens prompt = reader.encode(o.prompt);
    if (prompt.empty()) {
        throw ConfigError("empty --prompt");
    }

    std::optional<Tokens> reference;
    if (!o.reference.empty()) {
        reference = padded_reference(reader.encode(o.reference), bc.gen_length, vocab.eot_id());
    }
    const StrategyKind kind = parse_strategy(o.strategy.strategy);
    if (kind == StrategyKind::egp && !reference) {
        throw ConfigError("egp needs --reference");
    }
    if (o.predictor.kind == "scripted" && !reference) {
        throw ConfigError("the scripted predictor needs --reference");
    }

    std::vector<std::pair<Tokens, Tokens>> scripts;
    if (reference) {
        scripts.emplace_back(prompt, *reference);
    }
    auto pred = make_predictor(o.predictor, corpus, vocab, scripts, bc.gen_length);

    StrategyConfig sc;
    sc.kind            = kind;
    sc.tokens_per_step = o.strategy.k;
    sc.tau             = o.strategy.tau;
    sc.eotp            = o.strategy.eotp || o.strategy.eotp_per_step;
    sc.eotp_per_step   = o.strategy.eotp_per_step;
    if (kind == StrategyKind::learn2pd) {
        sc.filter = load_filter(o.strategy.weights);
    }
    if (kind == StrategyKind::egp) {
        sc.reference = reference;
    }

    DecodeState        state(prompt, bc, vocab);
    const DecodeResult r = decode(state, *pred, sc, bc);

    log << vocab.render(truncate_at_eot(r.output, vocab.eot_id())) << "\n";
    log << "forward_calls " << r.trace.forward_calls << "\nfallback_events " << r.trace.fallback_events << "\n";

    if (!o.trace.empty()) {
        Json cfg = {{"command", "decode"},        {"corpus", o.corpus},
                    {"prompt", o.prompt},         {"reference", o.reference},
                    {"block", o.block.json()},    {"predictor", o.predictor.json()},
                    {"strategy", o.strategy.strategy}, {"k", o.strategy.k},
                    {"tau", o.strategy.tau},      {"eotp", sc.eotp},
                    {"eotp_per_step", sc.eotp_per_step}, {"weights", o.strategy.weights}};
        if (sc.filter) {
            cfg["filter_fingerprint"] = sc.filter->fingerprint;
        }
        auto f = open_out(o.trace);
        write_trace(f, r.trace, cfg);
        finish(f, o.trace);
    }
}

// --- bench --------------------------------------------------------------------

struct BenchOpts {
    std::string                corpus;
    std::string                prompts;
    std::string                out;
    std::vector<std::string>   strategies{"vanilla", "egp", "learn2pd"};
    std::string                tau_sweep;
    std::vector<std::uint64_t> seeds{0};
    int                        limit = 0;
    int                        jobs  = 1;
    BlockOpts                  block;
    PredictorOpts              predictor;
    StrategyOpts               strategy;
};

struct MethodSpec {
    std::string    label;
    StrategyConfig cfg;
};

Json histogram_json(const std::map<int, int> & h) {
    Json out = Json::object();
    for (const auto & [gap, count] : h) {
        out[std::to_string(gap)] = count;
    }
    return out;
}

void cmd_bench(const BenchOpts & o, std::ostream & log) {
    CorpusReader reader;
    const Corpus train = read_corpus(reader, o.corpus);
    const Corpus eval  = o.prompts.empty() ? train : read_corpus(reader, o.prompts);
    const Vocabulary vocab = reader.vocabulary();
    const TokenId eot = vocab.eot_id();
    const BlockConfig bc = o.block.config();
    auto pred = make_predictor(o.predictor, train, vocab, gold_scripts(eval, bc.gen_length, eot), bc.gen_length);

    std::vector<MethodSpec> methods;
    std::shared_ptr<const FilterModel> filter;
    const std::string eotp_suffix =
        o.strategy.eotp_per_step ? "+eotp-step" : (o.strategy.eotp ? "+eotp" : "");
    for (const auto & name : o.strategies) {
        StrategyConfig sc;
        sc.kind            = parse_strategy(name);
        sc.tokens_per_step = o.strategy.k;
        sc.eotp            = o.strategy.eotp || o.strategy.eotp_per_step;
        sc.eotp_per_step   = o.strategy.eotp_per_step;
        switch (sc.kind) {
            case StrategyKind::vanilla:
                if (o.strategy.k == 1 && !sc.eotp) {
                    break;  // identical to the baseline row
                }
                methods.push_back({"vanilla(k=" + std::to_string(o.strategy.k) + ")" + eotp_suffix, sc});
                break;
            case StrategyKind::egp:
                methods.push_back({"egp" + eotp_suffix, sc});
                break;
            case StrategyKind::learn2pd: {
                if (!filter) {
                    filter = load_filter(o.strategy.weights);
                }
                sc.filter = filter;
                const auto taus = o.tau_sweep.empty() ? std::vector<double>{o.strategy.tau}
                                                      : parse_tau_sweep(o.tau_sweep);
                for (double tau : taus) {
                    sc.tau = tau;
                    methods.push_back({"learn2pd(tau=" + format_double(tau) + ")" + eotp_suffix, sc});
                }
                break;
            }
        }
    }

    const bool gold = std::all_of(eval.entries.begin(), eval.entries.end(), [](const CorpusEntry & e) {
        return e.paired;
    });
    const auto all_prompts = eval.prompts();
    const auto all_gold    = gold ? eval.references(eot) : std::vector<Tokens>{};

    Json config = {{"command", "bench"},
                   {"corpus", o.corpus},
                   {"prompts", o.prompts.empty() ? o.corpus : o.prompts},
                   {"strategies", o.strategies},
                   {"tau_sweep", o.tau_sweep},
                   {"seeds", o.seeds},
                   {"limit", o.limit},
                   {"block", o.block.json()},
                   {"predictor", o.predictor.json()},
                   {"k", o.strategy.k},
                   {"tau", o.strategy.tau},
                   {"eotp", o.strategy.eotp},
                   {"eotp_per_step", o.strategy.eotp_per_step},
                   {"weights", o.strategy.weights},
                   {"baseline", "vanilla(k=1)"},
                   {"exact_match_reference", gold ? "gold" : "baseline"}};
    if (filter) {
        config["filter_fingerprint"] = filter->fingerprint;
    }

    std::ostringstream text;
    text << "# format " << kReportFormat << " version " << format_version() << "\n";
    text << "# config " << config.dump() << "\n";
    Json runs = Json::array();

    for (std::uint64_t seed : o.seeds) {
        std::vector<std::size_t> pick(all_prompts.size());
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        if (o.limit > 0 && static_cast<std::size_t>(o.limit) < pick.size()) {
            Rng rng(seed);
            shuffle(pick, rng);
            pick.resize(static_cast<std::size_t>(o.limit));
            std::sort(pick.begin(), pick.end());
        }
        std::vector<Tokens> prompts, gold_refs;
        for (auto i : pick) {
            prompts.push_back(all_prompts[i]);
            if (gold) {
                gold_refs.push_back(all_gold[i]);
            }
        }

        StrategyConfig base_cfg;
        const RunSummary baseline = run_strategy("vanilla(k=1)", prompts, *pred, base_cfg, bc, o.jobs);
        const std::vector<Tokens> & em_refs = gold ? gold_refs : baseline.outputs;

        std::vector<SpeedupRow> rows{speedup_report(baseline, baseline, em_refs, eot)};
        std::vector<RunSummary> summaries{baseline};
        for (const auto & m : methods) {
            RunSummary run = run_strategy(m.label, prompts, *pred, m.cfg, bc, o.jobs, baseline.outputs);
            rows.push_back(speedup_report(baseline, run, em_refs, eot));
            summaries.push_back(std::move(run));
        }

        text << "\n[seed " << seed << "] prompts " << prompts.size() << "\n";
        text << pad_right("strategy", 28) << pad_left("calls", 9) << pad_left("speedup", 10)
             << pad_left("tok/call", 10) << pad_left("exact", 8) << pad_left("fallbacks", 11)
             << pad_left("med.steps", 11) << "\n";
        Json run_json = {{"seed", seed}, {"prompt_indices", pick}, {"rows", Json::array()}};
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const SpeedupRow & row = rows[r];
            std::vector<int>   block_steps;
            std::map<int, int> gaps;
            for (const auto & trace : summaries[r].traces) {
                const auto s = steps_per_block(trace);
                block_steps.insert(block_steps.end(), s.steps.begin(), s.steps.end());
                for (const auto & [gap, count] : step_gap_analysis(trace, trace.final_output).histogram) {
                    gaps[gap] += count;
                }
            }
            DecodeTrace pooled;
            pooled.per_block_steps = block_steps;
            const BlockStepSummary bs = steps_per_block(pooled);

            text << pad_right(row.label, 28) << pad_left(std::to_string(row.forward_calls), 9)
                 << pad_left(fixed(row.speedup, 2) + "x", 10) << pad_left(fixed(row.tokens_per_call, 3), 10)
                 << pad_left(fixed(row.exact_match_rate, 3), 8) << pad_left(std::to_string(row.fallback_events), 11)
                 << pad_left(fixed(bs.median, 1), 11) << "\n";
            run_json["rows"].push_back({{"label", row.label},
                                        {"forward_calls", row.forward_calls},
                                        {"speedup", row.speedup},
                                        {"emitted_tokens", row.emitted_tokens},
                                        {"tokens_per_call", row.tokens_per_call},
                                        {"exact_match_rate", row.exact_match_rate},
                                        {"fallback_events", row.fallback_events},
                                        {"steps_per_block", block_steps},
                                        {"steps_per_block_median", bs.median},
                                        {"steps_per_block_mean", bs.mean},
                                        {"step_gap_histogram", histogram_json(gaps)}});

            const double tps = summaries[r].wall_seconds > 0.0
                                   ? static_cast<double>(row.emitted_tokens) / summaries[r].wall_seconds
                                   : 0.0;
            log << "seed " << seed << "  " << pad_right(row.label, 28) << " speedup " << fixed(row.speedup, 2)
                << "x  exact " << fixed(row.exact_match_rate, 3) << "  wall " << fixed(summaries[r].wall_seconds, 3)
                << "s  tok/s " << fixed(tps, 1) << "\n";
        }
        runs.push_back(std::move(run_json));
    }

    if (!o.out.empty()) {
        const std::string txt_path = o.out + ".txt", json_path = o.out + ".json";
        auto t = open_out(txt_path);
        t << text.str();
        finish(t, txt_path);
        Json doc = make_header(kReportFormat, config);
        doc["runs"] = std::move(runs);
        auto j = open_out(json_path);
        j << doc.dump(1) << "\n";
        finish(j, json_path);
        log << "report " << txt_path << " " << json_path << "\n";
    } else {
        log << text.str();
    }
}

// --- analyze ------------------------------------------------------------------

struct AnalyzeOpts {
    std::string trace;
    std::string out;
};

void cmd_analyze(const AnalyzeOpts & o, std::ostream & log) {
    auto              in    = open_in(o.trace);
    const DecodeTrace trace = read_trace(in, o.trace);
    const auto        gaps  = step_gap_analysis(trace, trace.final_output);
    const auto        bs    = steps_per_block(trace);

    std::ostringstream text;
    text << "# format " << kReportFormat << " version " << format_version() << "\n";
    const Json config = {{"command", "analyze"}, {"trace", o.trace}};
    text << "# config " << config.dump() << "\n";
    text << "forward_calls " << trace.forward_calls << "\nfallback_events " << trace.fallback_events << "\n";
    text << "steps_per_block";
    for (int s : bs.steps) {
        text << " " << s;
    }
    text << "\nsteps_per_block_median " << format_double(bs.median) << "\nsteps_per_block_mean "
         << format_double(bs.mean) << "\nstep_gap_histogram\n";
    for (const auto & [gap, count] : gaps.histogram) {
        text << "  " << gap << " " << count << "\n";
    }

    if (!o.out.empty()) {
        const std::string txt_path = o.out + ".txt", json_path = o.out + ".json";
        auto t = open_out(txt_path);
        t << text.str();
        finish(t, txt_path);
        Json doc = make_header(kReportFormat, config);
        doc["forward_calls"]          = trace.forward_calls;
        doc["fallback_events"]        = trace.fallback_events;
        doc["steps_per_block"]        = bs.steps;
        doc["steps_per_block_median"] = bs.median;
        doc["steps_per_block_mean"]   = bs.mean;
        doc["positions"]              = gaps.positions;
        doc["gaps"]                   = gaps.gaps;
        doc["step_gap_histogram"]     = histogram_json(gaps.histogram);
        auto j = open_out(json_path);
        j << doc.dump(1) << "\n";
        finish(j, json_path);
    }
    log << text.str();
}

}  // namespace

int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err) {
    CLI::App app{"Parallel decoding for masked-diffusion text generation", "pardec"};
    app.set_version_flag("--version", "pardec 1.0.0");
    app.set_config("--config", "", "TOML/INI file with option values (flags take precedence)");
    app.require_subcommand(1);

    MakeCorpusOpts mk;
    auto *         mk_cmd = app.add_subcommand("make-corpus", "Write the synthetic toy corpus");
    mk_cmd->add_option("--out", mk.out, "Output corpus file")->required();
    mk_cmd->add_option("--families", mk.families, "Template families")->capture_default_str();
    mk_cmd->add_option("--per-family", mk.per_family, "Pairs per family")->capture_default_str();
    mk_cmd->add_option("--heldout", mk.heldout, "Write this many held-out pairs instead")->capture_default_str();
    mk_cmd->add_option("--seed", mk.seed, "Generator seed")->capture_default_str();

    CollectOpts co;
    auto *      co_cmd = app.add_subcommand("collect", "Harvest filter training samples along EGP decodes");
    co_cmd->add_option("--corpus", co.corpus, "Corpus file")->required();
    co_cmd->add_option("--out", co.out, "Output dataset file")->required();
    co_cmd->add_option("--jobs", co.jobs, "Worker threads")->capture_default_str();
    co.block.add(co_cmd);
    co.predictor.add(co_cmd);

    TrainOpts tr;
    auto *    tr_cmd = app.add_subcommand("train-filter", "Train the commit filter on a dataset");
    tr_cmd->add_option("--dataset", tr.dataset, "Dataset file")->required();
    tr_cmd->add_option("--out", tr.out, "Output weights file")->required();
    tr_cmd->add_option("--loss-curve", tr.loss_curve, "Loss curve CSV (default: <out>.loss.csv)");
    tr_cmd->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
    tr_cmd->add_option("--lr", tr.lr, "AdamW learning rate")->capture_default_str();
    tr_cmd->add_option("--weight-decay", tr.weight_decay, "AdamW weight decay")->capture_default_str();
    tr_cmd->add_option("--layers", tr.layers, "Dense layers")->capture_default_str();
    tr_cmd->add_option("--hidden", tr.hidden, "Hidden width (0 = block size)")->capture_default_str();
    tr_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size")->capture_default_str();
    tr_cmd->add_option("--val-fraction", tr.val_fraction, "Validation split")->capture_default_str();
    tr_cmd->add_option("--activation", tr.activation, "Hidden activation")
        ->check(CLI::IsMember({"relu", "tanh", "identity"}))
        ->capture_default_str();
    tr_cmd->add_option("--seed", tr.seed, "Shuffle seed")->capture_default_str();

    DecodeOpts de;
    auto *     de_cmd = app.add_subcommand("decode", "Decode one prompt");
    de_cmd->add_option("--corpus", de.corpus, "Corpus file (vocabulary and n-gram counts)")->required();
    de_cmd->add_option("--prompt", de.prompt, "Prompt text")->required();
    de_cmd->add_option("--reference", de.reference, "Reference continuation (egp, scripted predictor)");
    de_cmd->add_option("--trace", de.trace, "Output trace file");
    de.block.add(de_cmd);
    de.predictor.add(de_cmd);
    de.strategy.add(de_cmd, true);

    BenchOpts be;
    auto *    be_cmd = app.add_subcommand("bench", "Compare strategies against vanilla k=1");
    be_cmd->add_option("--corpus", be.corpus, "Training corpus file")->required();
    be_cmd->add_option("--prompts", be.prompts, "Evaluation prompts (default: the corpus)");
    be_cmd->add_option("--out", be.out, "Report prefix; writes <out>.txt and <out>.json");
    be_cmd->add_option("--strategies", be.strategies, "Strategies to compare")
        ->delimiter(',')
        ->check(CLI::IsMember({"vanilla", "egp", "learn2pd"}))
        ->capture_default_str();
    be_cmd->add_option("--tau-sweep", be.tau_sweep, "learn2pd thresholds: list or lo:hi[:step]");
    be_cmd->add_option("--seeds", be.seeds, "Seeds (select prompts when --limit is set)")
        ->delimiter(',')
        ->capture_default_str();
    be_cmd->add_option("--limit", be.limit, "Prompts per seed (0 = all)")->capture_default_str();
    be_cmd->add_option("--jobs", be.jobs, "Worker threads")->capture_default_str();
    be.block.add(be_cmd);
    be.predictor.add(be_cmd);
    be.strategy.add(be_cmd, false);

    AnalyzeOpts an;
    auto *      an_cmd = app.add_subcommand("analyze", "Step-gap and steps-per-block analysis of a trace");
    an_cmd->add_option("--trace", an.trace, "Trace file")->required();
    an_cmd->add_option("--out", an.out, "Report prefix; writes <out>.txt and <out>.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        return app.exit(e, out, err);
    }

    try {
        if (co.jobs < 1 || be.jobs < 1) {
            throw ConfigError("--jobs must be positive");
        }
        if (*mk_cmd) {
            cmd_make_corpus(mk, out);
        } else if (*co_cmd) {
            cmd_collect(co, out);
        } else if (*tr_cmd) {
            cmd_train_filter(tr, out);
        } else if (*de_cmd) {
            cmd_decode(de, out);
        } else if (*be_cmd) {
            cmd_bench(be, out);
        } else if (*an_cmd) {
            cmd_analyze(an, out);
        }
    } catch (const Error & e) {
        err << "pardec: " << e.what() << "\n";
        return 1;
    } catch (const std::exception & e) {
        err << "pardec: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int run_cli(const std::vector<std::string> & args, std::ostream & out, std::ostream & err) {
    std::vector<const char *> argv{"pardec"};
    for (const auto & a : args) {
        argv.push_back(a.c_str());
    }
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace pardec
