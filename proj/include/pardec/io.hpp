#pragma once

#include "pardec/collect.hpp"
#include "pardec/core.hpp"
#include "pardec/filter.hpp"

#include <json.hpp>

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace pardec {

using Json = nlohmann::json;

// Line-delimited files (trace, dataset) open with a header record:
//   {"format": "...", "version": "MAJOR.MINOR", "config": {...}}
// Readers reject a different format name or an unknown major version.
inline constexpr int kFormatMajor = 1;
inline constexpr int kFormatMinor = 0;

inline constexpr const char * kTraceFormat   = "pardec-trace";
inline constexpr const char * kDatasetFormat = "pardec-dataset";
inline constexpr const char * kLossFormat    = "pardec-loss-curve";
inline constexpr const char * kReportFormat  = "pardec-report";

std::string format_version();
Json        make_header(const char * format, const Json & config);

// --- trace -----------------------------------------------------------------
// One record per step, then a summary record.
void        write_trace(std::ostream & out, const DecodeTrace & trace, const Json & config);
DecodeTrace read_trace(std::istream & in, const std::string & name = "<trace>");

// --- dataset ---------------------------------------------------------------
struct Dataset {
    Json                          config;
    std::vector<TrainingSample>   samples;
    std::vector<SampleProvenance> provenance;
};

void    write_dataset(std::ostream & out, std::span<const TrainingSample> samples,
                      std::span<const SampleProvenance> provenance, const Json & config);
Dataset read_dataset(std::istream & in, const std::string & name = "<dataset>");

// --- weights ---------------------------------------------------------------
// Little-endian binary container:
//   magic "PDFILTER", u16 major, u16 minor, u32 depth, u32 widths[depth + 1],
//   u32 + bytes activation name, u32 + bytes fingerprint,
//   then per layer: weight (in x out, row-major f32), bias (out, f32).
void        save_weights(std::ostream & out, const FilterModel & model);
FilterModel load_weights(std::istream & in);
void        save_weights_file(const std::filesystem::path & path, const FilterModel & model);
FilterModel load_weights_file(const std::filesystem::path & path);

// --- loss curve ------------------------------------------------------------
// '#'-prefixed header lines, then CSV rows "epoch,train_loss,val_loss".
void write_loss_curve(std::ostream & out, const std::vector<EpochLoss> & history, const Json & config);

// Shortest round-trip decimal form of a double ("nan" for NaN).
std::string format_double(double v);

}  // namespace pardec
