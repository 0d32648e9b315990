#include "qcmap/sampling.hpp"

#include <numeric>

#include "qcmap/errors.hpp"
#include "qcmap/random.hpp"

namespace qcmap {

namespace {

constexpr std::uint64_t kInteriorStream = 1;
constexpr std::uint64_t kFaceStream = 2;
constexpr std::uint64_t kEdgeStream = 3;
constexpr std::uint64_t kBatchStream = 4;

} // namespace

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t SamplePool::interior_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& x : interior) h = fnv1a(x.data(), 3 * sizeof(double), h);
    return h;
}

std::vector<Point3> voxel_centers(std::array<int, 3> dims) {
    std::vector<Point3> pts;
    if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) return pts;
    pts.reserve(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i)
                pts.emplace_back((i + 0.5) / dims[0], (j + 0.5) / dims[1], (k + 0.5) / dims[2]);
    return pts;
}

SamplePool build_pool(int n_int, std::array<int, 3> image_dims, std::uint64_t seed, int face_samples,
                      int edge_samples) {
    if (n_int < 1) throw ConfigError("n_int must be >= 1, got " + std::to_string(n_int));
    SamplePool pool;
    pool.seed = seed;
    pool.image_dims = image_dims;

    Rng rng(derive_seed(seed, kInteriorStream));
    pool.interior.reserve(static_cast<std::size_t>(n_int));
    for (int m = 0; m < n_int; ++m) {
        const double x = rng.open01();
        const double y = rng.open01();
        const double z = rng.open01();
        pool.interior.emplace_back(x, y, z);
    }

    pool.image_grid = voxel_centers(image_dims);

    Rng frng(derive_seed(seed, kFaceStream));
    for (int f = 0; f < 6; ++f) {
        auto& face = pool.faces[static_cast<std::size_t>(f)];
        face.axis = f / 2;
        face.level = static_cast<double>(f % 2);
        face.points.reserve(static_cast<std::size_t>(face_samples));
        for (int s = 0; s < face_samples; ++s) {
            Point3 q(frng.uniform01(), frng.uniform01(), frng.uniform01());
            q[face.axis] = face.level;
            face.points.push_back(q);
        }
    }

    Rng erng(derive_seed(seed, kEdgeStream));
    for (int e = 0; e < 12; ++e) {
        auto& edge = pool.edges[static_cast<std::size_t>(e)];
        edge.free_axis = e / 4;
        edge.pinned_axes = {(edge.free_axis + 1) % 3, (edge.free_axis + 2) % 3};
        edge.levels = {static_cast<double>(e & 1), static_cast<double>((e >> 1) & 1)};
        edge.points.reserve(static_cast<std::size_t>(edge_samples));
        for (int s = 0; s < edge_samples; ++s) {
            Point3 q = Point3::Zero();
            q[edge.free_axis] = erng.uniform01();
            q[edge.pinned_axes[0]] = edge.levels[0];
            q[edge.pinned_axes[1]] = edge.levels[1];
            edge.points.push_back(q);
        }
    }
    return pool;
}

std::vector<Point3> boundary_faces(int per_face, std::uint64_t seed) {
    Rng rng(derive_seed(seed, kFaceStream, 1));
    std::vector<Point3> pts;
    pts.reserve(static_cast<std::size_t>(per_face) * 6);
    for (int f = 0; f < 6; ++f) {
        for (int s = 0; s < per_face; ++s) {
            Point3 q(rng.uniform01(), rng.uniform01(), rng.uniform01());
            q[f / 2] = static_cast<double>(f % 2);
            pts.push_back(q);
        }
    }
    return pts;
}

std::vector<std::size_t> draw_indices(std::size_t pool_size, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size > pool_size) {
        throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds pool size " +
                          std::to_string(pool_size));
    }
    std::vector<std::size_t> idx(pool_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    // Partial Fisher-Yates: the first batch_size slots are the sample.
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool_size - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(batch_size);
    return idx;
}

std::vector<Point3> draw_batch(const SamplePool& pool, Stream which, std::size_t batch_size, std::uint64_t epoch,
                               std::uint64_t step) {
    const auto& src = which == Stream::interior ? pool.interior : pool.image_grid;
    const std::uint64_t tag = which == Stream::interior ? 0 : 1;
    const auto idx = draw_indices(src.size(), batch_size, derive_seed(pool.seed, kBatchStream ^ (tag << 8), epoch, step));
    std::vector<Point3> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(src[i]);
    return out;
}

double mc_estimate(std::span<const double> values) {
    if (values.empty()) throw ContractError("mc_estimate needs at least one value");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

} // namespace qcmap
