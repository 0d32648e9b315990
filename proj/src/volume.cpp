#include "qcmap/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "qcmap/errors.hpp"

namespace qcmap {

namespace {

std::size_t checked_count(const Volume3::Dims& dims) {
    std::size_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw DimensionError("volume dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

struct AxisCell {
    int lo;
    int hi;
    double t;
    double slope;  // d t / d p, zero when clamped
};

AxisCell locate(double p, int dim) {
    if (dim == 1) return {0, 0, 0.0, 0.0};
    const double u = p * dim - 0.5;
    const double scale = static_cast<double>(dim);
    if (u < 0.0) return {0, 1, 0.0, 0.0};
    if (u > dim - 1) return {dim - 2, dim - 1, 1.0, 0.0};
    int lo = static_cast<int>(std::ceil(u)) - 1;
    lo = std::clamp(lo, 0, dim - 2);
    return {lo, lo + 1, u - lo, scale};
}

} // namespace

Volume3::Volume3(Dims dims, double fill) : dims_(dims), data_(checked_count(dims), fill) {}

Volume3::Volume3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != checked_count(dims_)) {
        throw DimensionError("volume data length " + std::to_string(data_.size()) + " does not match dims");
    }
}

Eigen::Vector3d Volume3::center(int i, int j, int k) const {
    return {(i + 0.5) / dims_[0], (j + 0.5) / dims_[1], (k + 0.5) / dims_[2]};
}

double sample(const Volume3& v, const Eigen::Vector3d& p) { return sample_grad(v, p).value; }

SampleGrad sample_grad(const Volume3& v, const Eigen::Vector3d& p) {
    const auto& d = v.dims();
    const AxisCell cx = locate(p[0], d[0]);
    const AxisCell cy = locate(p[1], d[1]);
    const AxisCell cz = locate(p[2], d[2]);

    const double c000 = v.at(cx.lo, cy.lo, cz.lo);
    const double c100 = v.at(cx.hi, cy.lo, cz.lo);
    const double c010 = v.at(cx.lo, cy.hi, cz.lo);
    const double c110 = v.at(cx.hi, cy.hi, cz.lo);
    const double c001 = v.at(cx.lo, cy.lo, cz.hi);
    const double c101 = v.at(cx.hi, cy.lo, cz.hi);
    const double c011 = v.at(cx.lo, cy.hi, cz.hi);
    const double c111 = v.at(cx.hi, cy.hi, cz.hi);

    const double tx = cx.t, ty = cy.t, tz = cz.t;
    const double c00 = c000 + tx * (c100 - c000);
    const double c10 = c010 + tx * (c110 - c010);
    const double c01 = c001 + tx * (c101 - c001);
    const double c11 = c011 + tx * (c111 - c011);
    const double c0 = c00 + ty * (c10 - c00);
    const double c1 = c01 + ty * (c11 - c01);

    SampleGrad out;
    out.value = c0 + tz * (c1 - c0);

    const double dx0 = (c100 - c000) + ty * ((c110 - c010) - (c100 - c000));
    const double dx1 = (c101 - c001) + ty * ((c111 - c011) - (c101 - c001));
    const double dy0 = c10 - c00;
    const double dy1 = c11 - c01;
    out.grad[0] = cx.slope * (dx0 + tz * (dx1 - dx0));
    out.grad[1] = cy.slope * (dy0 + tz * (dy1 - dy0));
    out.grad[2] = cz.slope * (c1 - c0);
    return out;
}

void write_volume(const Volume3& v, const std::filesystem::path& path) {
    const auto& d = v.dims();
    nlohmann::json header = {{"dims", {d[0], d[1], d[2]}}, {"dtype", "f32"}, {"order", "x-fastest"}};
    std::vector<char> payload(v.voxel_count() * 4);
    for (std::size_t i = 0; i < v.voxel_count(); ++i) {
        const double x = v.data()[i];
        if (!std::isfinite(x)) throw IoError("refusing to write non-finite voxel " + std::to_string(i));
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        std::memcpy(payload.data() + i * 4, &bits, 4);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open volume for writing: " + path.string());
    out << header.dump() << '\n';
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing volume: " + path.string());
}

Volume3 read_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open volume: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": malformed header at byte 0: empty file");
    const std::size_t payload_offset = line.size() + 1;

    Volume3::Dims dims{};
    try {
        const auto header = nlohmann::json::parse(line);
        const auto& jd = header.at("dims");
        if (!jd.is_array() || jd.size() != 3) throw IoError(path.string() + ": malformed header at byte 0: dims");
        for (int a = 0; a < 3; ++a) dims[a] = jd[a].get<int>();
        if (header.at("dtype").get<std::string>() != "f32") {
            throw IoError(path.string() + ": malformed header at byte 0: unsupported dtype");
        }
        if (header.at("order").get<std::string>() != "x-fastest") {
            throw IoError(path.string() + ": malformed header at byte 0: unsupported order");
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed header at byte 0: " + e.what());
    }
    for (int a = 0; a < 3; ++a) {
        if (dims[a] <= 0) throw IoError(path.string() + ": malformed header at byte 0: non-positive dims");
    }

    const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (payload.size() != count * 4) {
        throw IoError(path.string() + ": size mismatch: expected " + std::to_string(count * 4) +
                      " payload bytes at byte " + std::to_string(payload_offset) + ", found " +
                      std::to_string(payload.size()));
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, payload.data() + i * 4, 4);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        const float x = std::bit_cast<float>(bits);
        if (!std::isfinite(x)) {
            throw IoError(path.string() + ": non-finite value at byte " + std::to_string(payload_offset + i * 4));
        }
        data[i] = x;
    }
    return Volume3(dims, std::move(data));
}

Volume3 normalize_minmax(const Volume3& v) {
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    std::vector<double> out(v.voxel_count(), 0.0);
    if (lo != v.data().end() && *hi > *lo) {
        const double range = *hi - *lo;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (v.data()[i] - *lo) / range;
    }
    return Volume3(v.dims(), std::move(out));
}

} // namespace qcmap
