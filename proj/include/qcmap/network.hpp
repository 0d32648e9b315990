#pragma once

// The smooth map ansatz: an affine lift 3 -> width, residual blocks
// y = u + s(W2 s(W1 u + b1) + b2), an affine read-out width -> 3, and (in hard
// mode) the cube boundary wrap f = g * x * (1 - x) + x.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qcmap/jet.hpp"
#include "qcmap/tape.hpp"

namespace qcmap {

struct AffineLayer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    Eigen::Index param_count() const { return weight.size() + bias.size(); }
};

struct ResidualBlock {
    AffineLayer first;
    AffineLayer second;
};

struct NetParams {
    int width = 20;
    Activation activation = Activation::tanh;
    AffineLayer lift;
    std::vector<ResidualBlock> blocks;
    AffineLayer out;

    static NetParams zeros(int width, int blocks, Activation activation);

    int block_count() const { return static_cast<int>(blocks.size()); }
    Eigen::Index param_count() const;

    // Order: lift W (column-major), lift b, then per block W1, b1, W2, b2, then out W, b.
    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& theta);
};

NetParams init_params(int width, int blocks, Activation activation, std::uint64_t seed);

enum class BoundaryMode { hard, soft };

const char* boundary_mode_name(BoundaryMode m);
BoundaryMode parse_boundary_mode(const std::string& name);

struct MapEval {
    Point3 f;
    Mat3 jac;
    Eigen::Vector3d lap;
    double det = 0.0;
};

// Jet of the unconstrained network output at x.
Jet3 raw_forward(const NetParams& params, const Point3& x);
// Full map (hard wrap applied in hard mode) with determinant.
MapEval forward(const NetParams& params, const Point3& x, BoundaryMode mode = BoundaryMode::hard);
Point3 map_point(const NetParams& params, const Point3& x, BoundaryMode mode = BoundaryMode::hard);

MapEval map_eval_from_jet(const Jet3& jet);

// Cached forward pass of the map over a point stream; acts as a tape segment
// whose output is the map jet batch (3 x C*N).
class NetworkPass : public TapeSegment {
public:
    NetworkPass(std::shared_ptr<const NetParams> params, std::vector<Point3> xs, JetOrder order, BoundaryMode mode);

    const JetBatch& output() const { return output_; }
    const std::vector<Point3>& inputs() const { return xs_; }
    Eigen::Index points() const { return static_cast<Eigen::Index>(xs_.size()); }
    JetOrder order() const { return order_; }

    Point3 value_at(Eigen::Index p) const;
    MapEval eval_at(Eigen::Index p) const;

    void accumulate(const Eigen::MatrixXd& seed, Eigen::Ref<Eigen::VectorXd> grad) const override;
    Eigen::Index output_rows() const override { return output_.data.rows(); }
    Eigen::Index output_cols() const override { return output_.data.cols(); }

private:
    std::shared_ptr<const NetParams> params_;
    std::vector<Point3> xs_;
    JetOrder order_;
    BoundaryMode mode_;

    JetBatch input_;
    std::vector<JetBatch> trunk_;  // u_0 .. u_B
    std::vector<JetBatch> pre1_;
    std::vector<JetBatch> act1_;
    std::vector<JetBatch> pre2_;
    JetBatch raw_;
    JetBatch output_;
};

void write_checkpoint(const NetParams& params, const std::filesystem::path& path);
NetParams read_checkpoint(const std::filesystem::path& path);

} // namespace qcmap
