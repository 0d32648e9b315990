#pragma once

// Forward propagation of second-order spatial jets (value, Jacobian, Laplacian)
// through the layer types used by the map ansatz, together with the hand-derived
// adjoints needed for reverse accumulation over parameters.

#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace qcmap {

using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Activation { tanh, arctan };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

// sigma and its first three derivatives at u.
struct ActivationDerivs {
    double s0, s1, s2, s3;
};
ActivationDerivs activation_derivs(Activation a, double u);

// Single-point jet of a width-d map component bundle.
struct Jet3 {
    Eigen::VectorXd value;
    Eigen::Matrix<double, Eigen::Dynamic, 3> jac;
    Eigen::VectorXd lap;

    Eigen::Index width() const { return value.size(); }
};

Jet3 seed_jet(const Point3& x);
Jet3 affine_jet(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias, const Jet3& in);
Jet3 activation_jet(Activation act, const Jet3& in);
Jet3 hadamard_boundary_jet(const Jet3& raw, const Point3& x);

// Channels carried per point. value_only propagates plain activations, second
// propagates [value, d/dx0, d/dx1, d/dx2, laplacian].
enum class JetOrder : int { value_only = 1, second = 5 };

inline constexpr int channels(JetOrder o) { return static_cast<int>(o); }

// Batch of jets, width x (channels * points), column p*C + c.
struct JetBatch {
    JetOrder order = JetOrder::second;
    Eigen::MatrixXd data;

    JetBatch() = default;
    JetBatch(JetOrder o, Eigen::Index width, Eigen::Index points)
        : order(o), data(width, points * channels(o)) {}

    Eigen::Index width() const { return data.rows(); }
    Eigen::Index points() const { return data.cols() / channels(order); }
    int stride() const { return channels(order); }
};

JetBatch seed_batch(std::span<const Point3> xs, JetOrder order);
JetBatch to_batch(const Jet3& jet);
Jet3 jet_at(const JetBatch& batch, Eigen::Index point);

void affine_forward(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias, const JetBatch& in, JetBatch& out);
// Accumulates into dweight/dbias; writes din when non-null.
void affine_backward(const Eigen::MatrixXd& weight, const JetBatch& in, const Eigen::MatrixXd& dout,
                     Eigen::Ref<Eigen::MatrixXd> dweight, Eigen::Ref<Eigen::VectorXd> dbias, Eigen::MatrixXd* din);

void activation_forward(Activation act, const JetBatch& pre, JetBatch& out);
void activation_backward(Activation act, const JetBatch& pre, const Eigen::MatrixXd& dout, Eigen::MatrixXd& dpre);

// f = g * x * (1 - x) + x componentwise, with the matching jet terms. Width must be 3.
void boundary_forward(const JetBatch& raw, std::span<const Point3> xs, JetBatch& out);
void boundary_backward(const JetBatch& raw, std::span<const Point3> xs, const Eigen::MatrixXd& dout,
                       Eigen::MatrixXd& draw);

double det3(const Mat3& m);
// d det / d m, entrywise.
Mat3 cofactor3(const Mat3& m);

} // namespace qcmap
