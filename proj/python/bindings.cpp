#include "pardec/cli.hpp"
#include "pardec/corpus.hpp"
#include "pardec/errors.hpp"
#include "pardec/filter.hpp"
#include "pardec/io.hpp"
#include "pardec/predictor.hpp"
#include "pardec/strategies.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace pardec;

PYBIND11_MODULE(_pardec, m) {
    m.doc() = "Semi-autoregressive parallel decoding with a learned commit filter";

    py::register_exception<Error>(m, "PardecError", PyExc_RuntimeError);

    py::class_<Vocabulary>(m, "Vocabulary")
        .def(py::init<std::int32_t, TokenId, TokenId>(), py::arg("size"), py::arg("mask_id") = Vocabulary::kDefaultMask,
             py::arg("eot_id") = Vocabulary::kDefaultEot)
        .def_property_readonly("size", &Vocabulary::size)
        .def_property_readonly("mask_id", &Vocabulary::mask_id)
        .def_property_readonly("eot_id", &Vocabulary::eot_id)
        .def("text", &Vocabulary::text)
        .def("render", [](const Vocabulary & v, const Tokens & t) { return v.render(t); });

    py::class_<BlockConfig>(m, "BlockConfig")
        .def(py::init<int, int, int>(), py::arg("gen_length") = 128, py::arg("block_size") = 32,
             py::arg("max_steps_per_block") = 0)
        .def_readwrite("gen_length", &BlockConfig::gen_length)
        .def_readwrite("block_size", &BlockConfig::block_size)
        .def_readwrite("max_steps_per_block", &BlockConfig::max_steps_per_block)
        .def_property_readonly("num_blocks", &BlockConfig::num_blocks);

    py::enum_<Activation>(m, "Activation")
        .value("relu", Activation::relu)
        .value("tanh", Activation::tanh)
        .value("identity", Activation::identity);

    py::class_<FilterModel, std::shared_ptr<FilterModel>>(m, "FilterModel")
        .def(py::init<int, int, int, Activation>(), py::arg("width"), py::arg("hidden"), py::arg("depth") = 2,
             py::arg("activation") = Activation::relu)
        .def_property_readonly("width", &FilterModel::width)
        .def_property_readonly("widths", &FilterModel::widths)
        .def_property_readonly("activation", &FilterModel::activation)
        .def_readonly("fingerprint", &FilterModel::fingerprint)
        .def("parameter_count", &FilterModel::parameter_count)
        .def("forward", [](const FilterModel & f, const std::vector<double> & x) { return f.forward(x); });

    m.def("sigmoid", &sigmoid);
    m.def(
        "bce_loss",
        [](const std::vector<double> & z, const std::vector<std::uint8_t> & y, const std::vector<std::uint8_t> & a) {
            return bce_loss(z, y, a);
        },
        py::arg("logits"), py::arg("labels"), py::arg("active"));
    m.def(
        "load_weights", [](const std::filesystem::path & p) { return std::make_shared<FilterModel>(load_weights_file(p)); },
        py::arg("path"));
    m.def("save_weights", [](const std::filesystem::path & p, const FilterModel & f) { save_weights_file(p, f); },
          py::arg("path"), py::arg("model"));

    py::class_<CorpusReader>(m, "CorpusReader")
        .def(py::init<>())
        .def(
            "read_file",
            [](CorpusReader & r, const std::filesystem::path & p) {
                const Corpus  c   = r.read_file(p);
                const TokenId eot = r.vocabulary().eot_id();
                return py::make_tuple(c.prompts(), c.references(eot), c.training_sequences(eot));
            },
            "Returns (prompts, gold references, n-gram training sequences).")
        .def("encode", &CorpusReader::encode)
        .def("vocabulary", &CorpusReader::vocabulary);

    py::class_<MaskPredictor>(m, "MaskPredictor").def_property_readonly("vocabulary", &MaskPredictor::vocabulary);

    py::class_<NGramPredictor, MaskPredictor>(m, "NGramPredictor")
        .def_property_readonly("num_tables", &NGramPredictor::num_tables);
    m.def(
        "train_ngram",
        [](const std::vector<Tokens> & corpus, const Vocabulary & vocab, int order, double smoothing, int max_gap) {
            return train_ngram(corpus, vocab, NGramOptions{order, smoothing, max_gap});
        },
        py::arg("corpus"), py::arg("vocab"), py::arg("order") = 3, py::arg("smoothing") = 0.01,
        py::arg("max_gap") = 64);

    py::class_<ScriptedPredictor, MaskPredictor>(m, "ScriptedPredictor")
        .def(py::init([](const Vocabulary & v, Tokens reference, std::vector<int> first_correct_step) {
                 return ScriptedPredictor(v, {std::move(reference), std::move(first_correct_step)});
             }),
             py::arg("vocab"), py::arg("reference"), py::arg("first_correct_step"));

    py::class_<StrategyConfig>(m, "StrategyConfig")
        .def(py::init([](const std::string & kind, int k, double tau, bool eotp, bool eotp_per_step,
                         std::shared_ptr<FilterModel> filter, std::optional<Tokens> reference) {
                 StrategyConfig c;
                 c.kind            = parse_strategy(kind);
                 c.tokens_per_step = k;
                 c.tau             = tau;
                 c.eotp            = eotp;
                 c.eotp_per_step   = eotp_per_step;
                 c.filter          = std::move(filter);
                 c.reference       = std::move(reference);
                 return c;
             }),
             py::arg("kind") = "vanilla", py::arg("k") = 1, py::arg("tau") = 0.96, py::arg("eotp") = false,
             py::arg("eotp_per_step") = false, py::arg("filter") = nullptr, py::arg("reference") = py::none())
        .def_property_readonly("kind", [](const StrategyConfig & c) { return strategy_name(c.kind); })
        .def_readwrite("k", &StrategyConfig::tokens_per_step)
        .def_readwrite("tau", &StrategyConfig::tau)
        .def_readwrite("eotp", &StrategyConfig::eotp)
        .def_readwrite("eotp_per_step", &StrategyConfig::eotp_per_step);

    m.def(
        "decode",
        [](const Tokens & prompt, const MaskPredictor & predictor, const StrategyConfig & cfg,
           const BlockConfig & block) {
            DecodeState        state(prompt, block, predictor.vocabulary());
            const DecodeResult r = decode(state, predictor, cfg, block);
            py::dict           out;
            out["output"]          = r.output;
            out["forward_calls"]   = r.trace.forward_calls;
            out["fallback_events"] = r.trace.fallback_events;
            out["per_block_steps"] = r.trace.per_block_steps;
            return out;
        },
        py::arg("prompt"), py::arg("predictor"), py::arg("strategy"), py::arg("block"));

    m.def(
        "run_cli",
        [](const std::vector<std::string> & args) {
            std::ostringstream out, err;
            const int          code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the pardec tool in-process; returns (exit code, stdout, stderr).");
}
