#pragma once

// Post-training diagnostics. Everything here is a read-only pass over a trained
// map; exports are plain CSV / JSON / volume files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qcmap/network.hpp"
#include "qcmap/trainer.hpp"
#include "qcmap/volume.hpp"

namespace qcmap {

struct DetHistogram {
    std::size_t sample_count = 0;
    std::vector<double> bin_edges;  // bins + 1
    std::vector<std::size_t> counts;
    double min_det = 0.0;
    double max_det = 0.0;
    double negative_fraction = 0.0;  // det <= 0
    double mean = 0.0;
    double stddev = 0.0;
};

inline constexpr int kHistogramBins = 100;
inline constexpr int kHistogramSamples = 100000;

DetHistogram histogram_of(std::span<const double> dets, int bins = kHistogramBins);

// det grad f at n uniform points of the cube, evaluated in fixed-size chunks.
std::vector<double> sample_dets(const NetParams& params, int n_samples, std::uint64_t seed,
                                BoundaryMode mode = BoundaryMode::hard);
DetHistogram det_histogram(const NetParams& params, int n_samples = kHistogramSamples, int bins = kHistogramBins,
                           std::uint64_t seed = 0, BoundaryMode mode = BoundaryMode::hard);

// tanh(ln(3)/2 * det); 0.5 at det = 1.
double jacobian_color(double det);

// Output voxel at center q holds sample(source, f(q)).
Volume3 warp_image(const NetParams& params, const Volume3& source, Volume3::Dims out_dims,
                   BoundaryMode mode = BoundaryMode::hard);

struct SectionRow {
    Point3 in;
    Point3 out;
    double det;
    double color;
};

// grid_n x grid_n lattice (endpoints included) on each plane x_axis = level.
std::vector<SectionRow> cross_sections(const NetParams& params, int axis, std::span<const double> levels, int grid_n,
                                       BoundaryMode mode = BoundaryMode::hard);

// Largest displacement of a pinned coordinate over points sampled on the six faces.
double boundary_error(const NetParams& params, BoundaryMode mode, int n_samples = kBoundaryErrorSamples,
                      std::uint64_t seed = 0);

struct LossTable {
    int epoch = 0;
    double landmark = 0.0;
    double intensity = 0.0;
    double conformality = 0.0;
    double smoothness = 0.0;

    std::string to_json() const;
};

LossTable loss_table(const std::vector<HistoryRow>& history);

void write_histogram_csv(const DetHistogram& h, const std::filesystem::path& path);
void write_sections_csv(const std::vector<SectionRow>& rows, const std::filesystem::path& path);

// Chunked value-only evaluation of f over many points.
std::vector<Point3> map_points(const NetParams& params, std::span<const Point3> xs,
                               BoundaryMode mode = BoundaryMode::hard);
// Chunked second-order evaluation.
std::vector<MapEval> map_evals(const NetParams& params, std::span<const Point3> xs,
                               BoundaryMode mode = BoundaryMode::hard);

} // namespace qcmap
