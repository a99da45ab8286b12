#include "pardec/metrics.hpp"

#include "pardec/errors.hpp"

#include <algorithm>
#include <numeric>

namespace pardec {

StepGapReport step_gap_analysis(const DecodeTrace & trace, std::span<const TokenId> final_output) {
    const int        n = static_cast<int>(final_output.size());
    std::vector<int> first_match(n, -1);
    std::vector<int> committed_at(n, -1);

    for (const StepRecord & rec : trace.steps) {
        for (std::size_t i = 0; i < rec.predictions.size(); ++i) {
            const int pos = rec.block_begin + static_cast<int>(i);
            if (pos < n && first_match[pos] < 0 && rec.predictions[i] == final_output[pos]) {
                first_match[pos] = rec.step_index;
            }
        }
        for (int pos : rec.committed) {
            if (pos < n && committed_at[pos] < 0) {
                committed_at[pos] = rec.step_index;
            }
        }
    }

    StepGapReport report;
    for (int pos = 0; pos < n; ++pos) {
        if (committed_at[pos] < 0) {
            throw AnalysisError("generation position " + std::to_string(pos) + " was never committed");
        }
        if (first_match[pos] < 0 || first_match[pos] > committed_at[pos]) {
            throw AnalysisError("trace is inconsistent with the final output at position " + std::to_string(pos));
        }
        const int gap = committed_at[pos] - first_match[pos];
        report.positions.push_back(pos);
        report.gaps.push_back(gap);
        report.histogram[gap] += 1;
    }
    return report;
}

BlockStepSummary steps_per_block(const DecodeTrace & trace) {
    BlockStepSummary s;
    s.steps = trace.per_block_steps;
    if (s.steps.empty()) {
        return s;
    }
    s.mean = std::accumulate(s.steps.begin(), s.steps.end(), 0.0) / static_cast<double>(s.steps.size());
    std::vector<int> sorted = s.steps;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return s;
}

bool exact_match(std::span<const TokenId> output, std::span<const TokenId> reference, TokenId eot_id) {
    return truncate_at_eot(output, eot_id) == truncate_at_eot(reference, eot_id);
}

double exact_match_rate(std::span<const Tokens> outputs, std::span<const Tokens> references, TokenId eot_id) {
    if (outputs.size() != references.size()) {
        throw AlignmentError("outputs and references differ in count");
    }
    if (outputs.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        hits += exact_match(outputs[i], references[i], eot_id) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

SpeedupRow speedup_report(const RunSummary & baseline, const RunSummary & method, std::span<const Tokens> references,
                          TokenId eot_id) {
    if (baseline.prompts != method.prompts || method.outputs.size() != method.prompts.size() ||
        method.traces.size() != method.prompts.size() || baseline.traces.size() != baseline.prompts.size() ||
        references.size() != method.prompts.size()) {
        throw AlignmentError("speedup report needs matching prompt sets on both sides");
    }
    auto calls = [](const RunSummary & r) {
        long long c = 0;
        for (const auto & t : r.traces) {
            c += t.forward_calls;
        }
        return c;
    };

    SpeedupRow row;
    row.label                 = method.label;
    row.forward_calls         = calls(method);
    const long long base_calls = calls(baseline);
    row.speedup = row.forward_calls > 0 ? static_cast<double>(base_calls) / static_cast<double>(row.forward_calls) : 0.0;
    for (std::size_t i = 0; i < method.outputs.size(); ++i) {
        row.emitted_tokens += static_cast<long long>(truncate_at_eot(method.outputs[i], eot_id).size());
        row.fallback_events += method.traces[i].fallback_events;
    }
    row.tokens_per_call =
        row.forward_calls > 0 ? static_cast<double>(row.emitted_tokens) / static_cast<double>(row.forward_calls) : 0.0;
    row.tokens_per_second =
        method.wall_seconds > 0.0 ? static_cast<double>(row.emitted_tokens) / method.wall_seconds : 0.0;
    row.exact_match_rate = exact_match_rate(method.outputs, references, eot_id);
    return row;
}

}  // namespace pardec
