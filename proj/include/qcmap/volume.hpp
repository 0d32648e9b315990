#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace qcmap {

// Scalar image on [0,1]^3. Voxel (i,j,k) sits at ((i+0.5)/Dx, (j+0.5)/Dy, (k+0.5)/Dz)
// and is stored x-fastest.
class Volume3 {
public:
    using Dims = std::array<int, 3>;

    Volume3() = default;
    Volume3(Dims dims, double fill = 0.0);
    Volume3(Dims dims, std::vector<double> data);

    const Dims& dims() const { return dims_; }
    std::size_t voxel_count() const { return data_.size(); }
    const std::vector<double>& data() const { return data_; }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
    }
    double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
    double& at(int i, int j, int k) { return data_[index(i, j, k)]; }

    Eigen::Vector3d center(int i, int j, int k) const;

    bool same_domain(const Volume3& other) const { return dims_ == other.dims_; }

private:
    Dims dims_{0, 0, 0};
    std::vector<double> data_;
};

struct SampleGrad {
    double value;
    Eigen::Vector3d grad;
};

// Trilinear interpolation over voxel centers; constant extrapolation in the
// half-voxel margin.
double sample(const Volume3& v, const Eigen::Vector3d& p);
// Value plus the gradient of the interpolant in the containing cell (zero along
// clamped axes; cell-face ties resolve to the lower-index cell).
SampleGrad sample_grad(const Volume3& v, const Eigen::Vector3d& p);

void write_volume(const Volume3& v, const std::filesystem::path& path);
Volume3 read_volume(const std::filesystem::path& path);

// Min-max rescale to [0,1]; constant volumes map to 0.
Volume3 normalize_minmax(const Volume3& v);

} // namespace qcmap
