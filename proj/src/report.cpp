#include "qcmap/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "qcmap/errors.hpp"
#include "qcmap/random.hpp"
#include "qcmap/sampling.hpp"

namespace qcmap {

namespace {

constexpr std::size_t kChunk = 4096;

std::shared_ptr<const NetParams> borrow(const NetParams& p) {
    return std::shared_ptr<const NetParams>(std::shared_ptr<const NetParams>(), &p);
}

} // namespace

std::vector<Point3> map_points(const NetParams& params, std::span<const Point3> xs, BoundaryMode mode) {
    std::vector<Point3> out;
    out.reserve(xs.size());
    for (std::size_t start = 0; start < xs.size(); start += kChunk) {
        const auto len = std::min(kChunk, xs.size() - start);
        NetworkPass pass(borrow(params), std::vector<Point3>(xs.begin() + start, xs.begin() + start + len),
                         JetOrder::value_only, mode);
        for (Eigen::Index i = 0; i < pass.points(); ++i) out.push_back(pass.value_at(i));
    }
    return out;
}

std::vector<MapEval> map_evals(const NetParams& params, std::span<const Point3> xs, BoundaryMode mode) {
    std::vector<MapEval> out;
    out.reserve(xs.size());
    for (std::size_t start = 0; start < xs.size(); start += kChunk) {
        const auto len = std::min(kChunk, xs.size() - start);
        NetworkPass pass(borrow(params), std::vector<Point3>(xs.begin() + start, xs.begin() + start + len),
                         JetOrder::second, mode);
        for (Eigen::Index i = 0; i < pass.points(); ++i) out.push_back(pass.eval_at(i));
    }
    return out;
}

DetHistogram histogram_of(std::span<const double> dets, int bins) {
    if (dets.empty()) throw ContractError("histogram needs at least one sample");
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    DetHistogram h;
    h.sample_count = dets.size();
    const auto [lo, hi] = std::minmax_element(dets.begin(), dets.end());
    h.min_det = *lo;
    h.max_det = *hi;
    double a = h.min_det, b = h.max_det;
    if (!(b > a)) {
        a -= 0.5;
        b += 0.5;
    }
    h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) h.bin_edges[static_cast<std::size_t>(i)] = a + (b - a) * i / bins;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    std::size_t nonpos = 0;
    double sum = 0.0;
    for (double d : dets) {
        auto k = static_cast<long>(std::floor((d - a) / (b - a) * bins));
        k = std::clamp<long>(k, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(k)];
        if (d <= 0.0) ++nonpos;
        sum += d;
    }
    const double n = static_cast<double>(dets.size());
    h.negative_fraction = static_cast<double>(nonpos) / n;
    h.mean = sum / n;
    double ss = 0.0;
    for (double d : dets) ss += (d - h.mean) * (d - h.mean);
    h.stddev = std::sqrt(ss / n);
    return h;
}

std::vector<double> sample_dets(const NetParams& params, int n_samples, std::uint64_t seed, BoundaryMode mode) {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    Rng rng(derive_seed(seed, 0x68697374ULL));
    std::vector<Point3> xs;
    xs.reserve(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        const double x = rng.uniform01();
        const double y = rng.uniform01();
        const double z = rng.uniform01();
        xs.emplace_back(x, y, z);
    }
    std::vector<double> dets;
    dets.reserve(xs.size());
    for (const auto& e : map_evals(params, xs, mode)) dets.push_back(e.det);
    return dets;
}

DetHistogram det_histogram(const NetParams& params, int n_samples, int bins, std::uint64_t seed, BoundaryMode mode) {
    const auto dets = sample_dets(params, n_samples, seed, mode);
    return histogram_of(dets, bins);
}

double jacobian_color(double det) { return std::tanh(std::log(3.0) / 2.0 * det); }

Volume3 warp_image(const NetParams& params, const Volume3& source, Volume3::Dims out_dims, BoundaryMode mode) {
    Volume3 out(out_dims);
    const auto centers = voxel_centers(out_dims);
    const auto mapped = map_points(params, centers, mode);
    // voxel_centers enumerates in storage order.
    std::vector<double> data(mapped.size());
    for (std::size_t i = 0; i < mapped.size(); ++i) data[i] = sample(source, mapped[i].cwiseMax(0.0).cwiseMin(1.0));
    return Volume3(out_dims, std::move(data));
}

std::vector<SectionRow> cross_sections(const NetParams& params, int axis, std::span<const double> levels, int grid_n,
                                       BoundaryMode mode) {
    if (axis < 0 || axis > 2) throw ConfigError("cross-section axis must be 0, 1 or 2");
    if (grid_n < 1) throw ConfigError("cross-section grid_n must be >= 1");
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    std::vector<Point3> xs;
    xs.reserve(levels.size() * static_cast<std::size_t>(grid_n) * grid_n);
    for (double level : levels) {
        if (!(level >= 0.0 && level <= 1.0)) throw ConfigError("cross-section level outside [0,1]");
        for (int j = 0; j < grid_n; ++j)
            for (int i = 0; i < grid_n; ++i) {
                Point3 x;
                x[axis] = level;
                x[a1] = grid_n == 1 ? 0.5 : static_cast<double>(i) / (grid_n - 1);
                x[a2] = grid_n == 1 ? 0.5 : static_cast<double>(j) / (grid_n - 1);
                xs.push_back(x);
            }
    }
    const auto evals = map_evals(params, xs, mode);
    std::vector<SectionRow> rows;
    rows.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        rows.push_back({xs[i], evals[i].f, evals[i].det, jacobian_color(evals[i].det)});
    }
    return rows;
}

double boundary_error(const NetParams& params, BoundaryMode mode, int n_samples, std::uint64_t seed) {
    const int per_face = (n_samples + 5) / 6;
    const auto xs = boundary_faces(per_face, seed);
    const auto fs = map_points(params, xs, mode);
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const int axis = static_cast<int>(i / static_cast<std::size_t>(per_face)) / 2;
        worst = std::max(worst, std::abs(fs[i][axis] - xs[i][axis]));
    }
    return worst;
}

std::string LossTable::to_json() const {
    nlohmann::json j = {{"epoch", epoch},
                        {"Landmark loss", landmark},
                        {"Intensity loss", intensity},
                        {"Conformality loss", conformality},
                        {"Smoothness loss", smoothness}};
    return j.dump(2);
}

LossTable loss_table(const std::vector<HistoryRow>& history) {
    if (history.empty()) throw ContractError("loss_table needs a nonempty history");
    const auto& last = history.back();
    return {last.epoch, last.losses.landmark, last.losses.intensity, last.losses.conformality,
            last.losses.smoothness};
}

void write_histogram_csv(const DetHistogram& h, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open histogram file: " + path.string());
    out << "bin_lo,bin_hi,count\n";
    char line[128];
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%zu\n", h.bin_edges[i], h.bin_edges[i + 1], h.counts[i]);
        out << line;
    }
    if (!out) throw IoError("failed writing histogram file: " + path.string());
}

void write_sections_csv(const std::vector<SectionRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open point-cloud file: " + path.string());
    out << "in_x,in_y,in_z,out_x,out_y,out_z,det,color\n";
    char line[512];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.in[0], r.in[1],
                      r.in[2], r.out[0], r.out[1], r.out[2], r.det, r.color);
        out << line;
    }
    if (!out) throw IoError("failed writing point-cloud file: " + path.string());
}

} // namespace qcmap
