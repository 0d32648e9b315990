#include "qcmap/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qcmap/errors.hpp"
#include "qcmap/random.hpp"

namespace qcmap {

namespace {

// Frequencies of the interior distortion terms, one row per output coordinate.
constexpr double kFreq[3][3] = {{5.0, 6.0, -4.0}, {-5.0, 4.0, 5.0}, {3.0, 5.0, -6.0}};

const Point3 kCenter(0.5, 0.5, 0.5);

bool in_unit_cube(const Point3& x) {
    return (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
}

} // namespace

void write_landmarks(const LandmarkSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open landmark file for writing: " + path.string());
    char line[512];
    for (const auto& pr : set.pairs) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", pr.q[0], pr.q[1], pr.q[2], pr.p[0],
                      pr.p[1], pr.p[2]);
        out << line;
    }
    if (!out) throw IoError("failed writing landmark file: " + path.string());
}

LandmarkSet read_landmarks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open landmark file: " + path.string());
    LandmarkSet set;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        double v[6];
        char tail = 0;
        const int got = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf%c", &v[0], &v[1], &v[2], &v[3], &v[4],
                                    &v[5], &tail);
        if (got < 6 || (got == 7 && tail != '\r' && tail != '\n')) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected qx,qy,qz,px,py,pz");
        }
        LandmarkPair pr{Point3(v[0], v[1], v[2]), Point3(v[3], v[4], v[5])};
        if (!in_unit_cube(pr.q) || !in_unit_cube(pr.p)) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": landmark outside [0,1]^3");
        }
        set.pairs.push_back(pr);
    }
    if (set.empty()) throw IoError(path.string() + ": no landmark pairs");
    return set;
}

Point3 AnalyticMap::operator()(const Point3& x) const {
    Point3 g;
    for (int i = 0; i < 3; ++i) {
        const double arg = kFreq[i][0] * x[0] + kFreq[i][1] * x[1] + kFreq[i][2] * x[2];
        g[i] = x[i] + x[i] * (1.0 - x[i]) * std::cos(arg) / 2.0;
    }
    return g;
}

Mat3 AnalyticMap::jacobian(const Point3& x) const {
    Mat3 j;
    for (int i = 0; i < 3; ++i) {
        const double arg = kFreq[i][0] * x[0] + kFreq[i][1] * x[1] + kFreq[i][2] * x[2];
        const double d = x[i] * (1.0 - x[i]);
        const double s = std::sin(arg);
        for (int k = 0; k < 3; ++k) j(i, k) = -d * s * kFreq[i][k] / 2.0;
        j(i, i) += 1.0 + (1.0 - 2.0 * x[i]) * std::cos(arg) / 2.0;
    }
    return j;
}

double appendix_source(const Point3& x) {
    return 0.5 * std::cos(2.0 * 2.0 * std::numbers::pi * x.squaredNorm()) + 0.5;
}

AppendixDataset appendix_dataset(int image_dim, int grid_n) {
    if (image_dim < 1) throw ConfigError("image_dims must be >= 1");
    if (grid_n < 1) throw ConfigError("grid_n must be >= 1");
    const AnalyticMap g;
    const Volume3::Dims dims{image_dim, image_dim, image_dim};
    AppendixDataset ds{Volume3(dims), Volume3(dims), {}};
    for (int k = 0; k < image_dim; ++k)
        for (int j = 0; j < image_dim; ++j)
            for (int i = 0; i < image_dim; ++i) {
                const Point3 c = ds.source.center(i, j, k);
                ds.source.at(i, j, k) = appendix_source(c);
                ds.target.at(i, j, k) = appendix_source(g(c));
            }
    ds.landmarks.pairs.reserve(static_cast<std::size_t>(grid_n) * grid_n * grid_n);
    for (int k = 0; k < grid_n; ++k)
        for (int j = 0; j < grid_n; ++j)
            for (int i = 0; i < grid_n; ++i) {
                const Point3 q((i + 0.5) / grid_n, (j + 0.5) / grid_n, (k + 0.5) / grid_n);
                ds.landmarks.pairs.push_back({q, g(q).cwiseMax(0.0).cwiseMin(1.0)});
            }
    return ds;
}

double appendix_nonpositive_fraction(int grid_n) {
    const AnalyticMap g;
    std::size_t bad = 0;
    for (int k = 0; k < grid_n; ++k)
        for (int j = 0; j < grid_n; ++j)
            for (int i = 0; i < grid_n; ++i) {
                const Point3 x((i + 0.5) / grid_n, (j + 0.5) / grid_n, (k + 0.5) / grid_n);
                if (g.det(x) <= 0.0) ++bad;
            }
    return static_cast<double>(bad) / (static_cast<double>(grid_n) * grid_n * grid_n);
}

LandmarkSet twisted_pairs() {
    // The square with corners at 0.25 / 0.75 on z = 0.3 and on z = 0.7, each
    // corner mapped one step anticlockwise (seen from +z) onto its neighbour.
    LandmarkSet set;
    const double xy[4][2] = {{0.75, 0.75}, {0.25, 0.75}, {0.25, 0.25}, {0.75, 0.25}};
    for (const double z : {0.3, 0.7}) {
        for (int k = 0; k < 4; ++k) {
            const int n = (k + 1) % 4;
            set.pairs.push_back({Point3(xy[k][0], xy[k][1], z), Point3(xy[n][0], xy[n][1], z)});
        }
    }
    return set;
}

LandmarkSet rotated_sphere(int n_points, std::uint64_t seed) {
    if (n_points < 1) throw ConfigError("rotated_sphere needs n_points >= 1");
    Rng rng(seed);
    LandmarkSet set;
    set.pairs.reserve(static_cast<std::size_t>(n_points));
    for (int s = 0; s < n_points; ++s) {
        Point3 dir;
        double norm = 0.0;
        do {
            dir = Point3(rng.normal(), rng.normal(), rng.normal());
            norm = dir.norm();
        } while (norm < 1e-12);
        const Point3 q = kCenter + 0.25 * dir / norm;
        const Point3 p(0.5 - (q[1] - 0.5), 0.5 + (q[0] - 0.5), q[2]);
        set.pairs.push_back({q, p});
    }
    return set;
}

LandmarkSet translating_disk(int n_points, std::uint64_t seed) {
    if (n_points < 1) throw ConfigError("translating_disk needs n_points >= 1");
    Rng rng(seed);
    LandmarkSet set;
    set.pairs.reserve(static_cast<std::size_t>(n_points));
    const Point3 center(0.5, 0.7, 0.5);
    const Point3 shift(0.0, -0.4, 0.0);
    for (int s = 0; s < n_points; ++s) {
        const double rad = 0.25 * std::sqrt(rng.uniform01());
        const double ang = 2.0 * std::numbers::pi * rng.uniform01();
        const Point3 q = center + Point3(rad * std::cos(ang), 0.0, rad * std::sin(ang));
        set.pairs.push_back({q, q + shift});
    }
    return set;
}

} // namespace qcmap
