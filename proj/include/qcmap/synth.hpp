#pragma once

// Synthetic registration problems: landmark sets and the analytic large
// distortion map with its source/target image pair.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qcmap/jet.hpp"
#include "qcmap/volume.hpp"

namespace qcmap {

struct LandmarkPair {
    Point3 q;  // target domain
    Point3 p;  // source domain
};

struct LandmarkSet {
    std::vector<LandmarkPair> pairs;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

void write_landmarks(const LandmarkSet& set, const std::filesystem::path& path);
LandmarkSet read_landmarks(const std::filesystem::path& path);

// g(x) = x + D(x) * h(x) with D(t) = t(1-t) per coordinate and
// h = (cos(5x+6y-4z), cos(-5x+4y+5z), cos(3x+5y-6z)) / 2.
struct AnalyticMap {
    Point3 operator()(const Point3& x) const;
    Mat3 jacobian(const Point3& x) const;
    double det(const Point3& x) const { return det3(jacobian(x)); }
};

inline AnalyticMap appendix_map() { return {}; }

// S(x) = cos(4 pi |x|^2) / 2 + 1/2.
double appendix_source(const Point3& x);

struct AppendixDataset {
    Volume3 source;
    Volume3 target;
    LandmarkSet landmarks;
};

AppendixDataset appendix_dataset(int image_dim, int grid_n = 8);

// Fraction of a grid_n^3 lattice of cell centers where det grad g <= 0.
double appendix_nonpositive_fraction(int grid_n);

LandmarkSet twisted_pairs();
LandmarkSet rotated_sphere(int n_points = 200, std::uint64_t seed = 0);
LandmarkSet translating_disk(int n_points = 400, std::uint64_t seed = 0);

} // namespace qcmap
