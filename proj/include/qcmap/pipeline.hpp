#pragma once

// File-level workflows behind the command line: each call reads its inputs,
// runs one of synth / train / report / ablate, and writes outputs plus a
// manifest into an output directory.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "qcmap/config.hpp"
#include "qcmap/trainer.hpp"

namespace qcmap {

const char* version_string();

struct SynthOptions {
    int n = 0;  // 0 selects the generator default
    std::uint64_t seed = 0;
    int image_dims = 64;
    int grid_n = 8;
};

// kind: twisted | sphere | disk | appendix
std::vector<std::filesystem::path> run_synth(const std::string& kind, const std::filesystem::path& out_dir,
                                             const SynthOptions& options);

struct LoadedData {
    LandmarkSet landmarks;
    Volume3 source;
    Volume3 target;
    bool has_landmarks = false;
    bool has_volumes = false;

    TrainData view() const;
};

// Loads what the formulation needs; a missing required path is a config error
// naming the data.* field.
LoadedData load_run_data(const RunSpec& spec);

struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path history;
    std::filesystem::path timing;
    std::filesystem::path manifest;
    TrainResult result;
};

using ProgressFn = std::function<void(const std::string& run, const HistoryRow& row)>;

TrainOutputs run_train(const RunSpec& spec, const std::filesystem::path& out_dir, const ProgressFn& progress = {});

struct ReportOptions {
    int hist_samples = 0;  // 0 skips the histogram
    int bins = 100;
    std::vector<std::string> slices;  // e.g. "x=0.2"
    int grid_n = 32;
    std::string warp_source;
    int warp_dims = 0;  // 0 uses the source dims
    std::string history;  // history CSV for the loss table
    std::uint64_t seed = 0;
    BoundaryMode boundary = BoundaryMode::hard;
};

std::vector<std::filesystem::path> run_report(const std::filesystem::path& checkpoint, const ReportOptions& options,
                                              const std::filesystem::path& out_dir);

// Writes three run directories and comparison.json; returns the comparison path.
std::filesystem::path run_ablate(const RunSpec& spec, const std::filesystem::path& out_dir,
                                 const ProgressFn& progress = {});

std::string file_digest(const std::filesystem::path& path);

} // namespace qcmap
