#pragma once

#include "pardec/core.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace pardec {

// Per committed position: steps between the first step whose prediction equals
// the final token and the step that committed it. Only steps during which the
// position's block was active are considered.
struct StepGapReport {
    std::vector<int>   positions;  // generation indices, ascending
    std::vector<int>   gaps;
    std::map<int, int> histogram;  // gap -> count
};

// Throws AnalysisError when a position of final_output was never committed.
StepGapReport step_gap_analysis(const DecodeTrace & trace, std::span<const TokenId> final_output);

struct BlockStepSummary {
    std::vector<int> steps;
    double           median = 0.0;
    double           mean   = 0.0;
};

BlockStepSummary steps_per_block(const DecodeTrace & trace);

// EoT-truncated equality of two token sequences.
bool   exact_match(std::span<const TokenId> output, std::span<const TokenId> reference, TokenId eot_id);
double exact_match_rate(std::span<const Tokens> outputs, std::span<const Tokens> references, TokenId eot_id);

// Decode results of one strategy over a prompt set.
struct RunSummary {
    std::string              label;
    std::vector<Tokens>      prompts;
    std::vector<Tokens>      outputs;
    std::vector<DecodeTrace> traces;
    double                   wall_seconds = 0.0;
};

struct SpeedupRow {
    std::string label;
    long long   forward_calls     = 0;
    double      speedup           = 0.0;  // baseline calls / method calls
    long long   emitted_tokens    = 0;    // output tokens up to and including the first EoT
    double      tokens_per_call   = 0.0;
    double      tokens_per_second = 0.0;  // informational, wall-clock dependent
    double      exact_match_rate  = 0.0;
    long long   fallback_events   = 0;
};

// Throws AlignmentError when the two runs (or the references) cover different
// prompt sets.
SpeedupRow speedup_report(const RunSummary & baseline, const RunSummary & method, std::span<const Tokens> references,
                          TokenId eot_id);

}  // namespace pardec
