#include "pardec/pipeline.hpp"

#include "pardec/errors.hpp"
#include "pardec/parallel.hpp"

#include <chrono>

namespace pardec {

RunSummary run_strategy(const std::string & label, std::span<const Tokens> prompts, const MaskPredictor & predictor,
                        const StrategyConfig & cfg, const BlockConfig & block_cfg, int jobs,
                        std::span<const Tokens> references) {
    if (cfg.kind == StrategyKind::egp && references.size() != prompts.size()) {
        throw AlignmentError("egp needs one reference per prompt");
    }
    RunSummary run;
    run.label = label;
    run.prompts.assign(prompts.begin(), prompts.end());
    run.outputs.resize(prompts.size());
    run.traces.resize(prompts.size());

    const auto start = std::chrono::steady_clock::now();
    parallel_for(prompts.size(), jobs, [&](std::size_t i) {
        StrategyConfig local = cfg;
        if (cfg.kind == StrategyKind::egp) {
            local.reference = pad_reference(references[i], block_cfg.gen_length, predictor.vocabulary().eot_id());
        }
        DecodeState  state(prompts[i], block_cfg, predictor.vocabulary());
        DecodeResult r = decode(state, predictor, local, block_cfg);
        run.outputs[i] = std::move(r.output);
        run.traces[i]  = std::move(r.trace);
    });
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

}  // namespace pardec
