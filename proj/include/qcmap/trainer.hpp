#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcmap/losses.hpp"
#include "qcmap/network.hpp"

namespace qcmap {

struct AdamSettings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::int64_t t = 0;

    static AdamState zeros(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0}; }
};

// Bias-corrected Adam update in place. Throws NumericError on a non-finite gradient.
void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state, const AdamSettings& opt);

struct TrainConfig {
    LossWeights weights;
    Formulation formulation = Formulation::hybrid;
    BoundaryMode boundary = BoundaryMode::hard;
    int epochs = 8000;
    int interior_batch = 1000;  // <= 0 selects the full interior pool every step
    int image_batch = 8192;
    AdamSettings adam;
    int n_int = 10000;
    std::uint64_t seed = 0;

    int width = 20;
    int blocks = 3;
    Activation activation = Activation::tanh;

    int checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
    std::filesystem::path checkpoint_path;  // empty disables checkpointing

    // Per-field ranges only; validate() adds the checks that combine fields.
    void validate_fields() const;
    void validate() const;
    int steps_per_epoch() const;
};

struct TrainData {
    const LandmarkSet* landmarks = nullptr;
    const Volume3* source = nullptr;
    const Volume3* target = nullptr;
};

struct HistoryRow {
    int epoch = 0;
    LossBreakdown losses;
    double wall_ms = 0.0;
};

struct TrainResult {
    NetParams params;
    std::vector<HistoryRow> history;
    std::uint64_t pool_hash = 0;
    std::int64_t steps = 0;
};

using EpochCallback = std::function<void(const HistoryRow&, const NetParams&)>;

TrainResult train(const TrainConfig& config, const TrainData& data, const EpochCallback& on_epoch = {});

// Columns: epoch, the seven loss terms, total, omega_plus_fraction. Timing goes
// to a separate file so identical runs give identical history files.
void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);
void write_timing_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);
std::string history_csv(const std::vector<HistoryRow>& history);

struct AblationRun {
    std::string name;
    TrainConfig config;
    TrainResult result;
    double boundary_error = 0.0;  // max |f_a(q) - q_a| over boundary samples, a the pinned axis
    double final_landmark = 0.0;
    double final_conformality = 0.0;
    double final_soft_boundary = 0.0;
};

inline constexpr int kBoundaryErrorSamples = 10000;

// Soft boundary with a7 = 50 and 500, then the hard constraint, on one shared pool.
std::vector<AblationRun> ablate_boundary(const TrainConfig& base, const LandmarkSet& landmarks,
                                         const std::function<void(const std::string&, const HistoryRow&)>& progress = {});

} // namespace qcmap
