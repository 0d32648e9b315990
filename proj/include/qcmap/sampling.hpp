#pragma once

// Monte Carlo sample sets. The pool is built once per run and never resampled;
// per-step minibatches are subsampled from it deterministically.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qcmap/jet.hpp"

namespace qcmap {

inline constexpr int kFaceSamples = 400;
inline constexpr int kEdgeSamples = 20;

// Face f: axis f/2 pinned to (f%2). Edge e: the two axes other than free_axis
// pinned to the corner values given by the low two bits of e%4.
struct FaceSet {
    int axis;
    double level;
    std::vector<Point3> points;
};

struct EdgeSet {
    int free_axis;
    std::array<int, 2> pinned_axes;
    std::array<double, 2> levels;
    std::vector<Point3> points;
};

struct SamplePool {
    std::vector<Point3> interior;
    std::vector<Point3> image_grid;
    std::array<int, 3> image_dims{0, 0, 0};
    std::array<FaceSet, 6> faces;
    std::array<EdgeSet, 12> edges;
    std::uint64_t seed = 0;

    // FNV-1a over the interior coordinates' bit patterns.
    std::uint64_t interior_hash() const;
};

SamplePool build_pool(int n_int, std::array<int, 3> image_dims, std::uint64_t seed,
                      int face_samples = kFaceSamples, int edge_samples = kEdgeSamples);

std::vector<Point3> boundary_faces(int per_face, std::uint64_t seed);
std::vector<Point3> voxel_centers(std::array<int, 3> dims);

enum class Stream { interior, image };

// Uniform subsample without replacement, seeded by (run seed, epoch, step).
std::vector<Point3> draw_batch(const SamplePool& pool, Stream which, std::size_t batch_size, std::uint64_t epoch,
                               std::uint64_t step);
// Same selection, as indices into the stream.
std::vector<std::size_t> draw_indices(std::size_t pool_size, std::size_t batch_size, std::uint64_t seed);

// Mean with left-to-right summation.
double mc_estimate(std::span<const double> values);

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

} // namespace qcmap
