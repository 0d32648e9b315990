#include "qcmap/jet.hpp"

#include <cmath>
#include <string>

#include "qcmap/errors.hpp"

namespace qcmap {

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::arctan: return "arctan";
    }
    return "?";
}

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "arctan") return Activation::arctan;
    throw ConfigError("unknown activation '" + name + "' (expected tanh or arctan)");
}

ActivationDerivs activation_derivs(Activation a, double u) {
    switch (a) {
    case Activation::tanh: {
        const double t = std::tanh(u);
        const double s = 1.0 - t * t;
        return {t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)};
    }
    case Activation::arctan: {
        const double q = 1.0 / (1.0 + u * u);
        return {std::atan(u), q, -2.0 * u * q * q, (6.0 * u * u - 2.0) * q * q * q};
    }
    }
    return {0, 0, 0, 0};
}

Jet3 seed_jet(const Point3& x) {
    Jet3 j;
    j.value = x;
    j.jac = Eigen::Matrix3d::Identity();
    j.lap = Eigen::VectorXd::Zero(3);
    return j;
}

JetBatch to_batch(const Jet3& jet) {
    JetBatch b(JetOrder::second, jet.width(), 1);
    b.data.col(0) = jet.value;
    b.data.middleCols(1, 3) = jet.jac;
    b.data.col(4) = jet.lap;
    return b;
}

Jet3 jet_at(const JetBatch& batch, Eigen::Index point) {
    if (batch.order != JetOrder::second) throw ContractError("jet_at requires a second-order batch");
    const Eigen::Index c = point * 5;
    Jet3 j;
    j.value = batch.data.col(c);
    j.jac = batch.data.middleCols(c + 1, 3);
    j.lap = batch.data.col(c + 4);
    return j;
}

Jet3 affine_jet(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias, const Jet3& in) {
    JetBatch out;
    affine_forward(weight, bias, to_batch(in), out);
    return jet_at(out, 0);
}

Jet3 activation_jet(Activation act, const Jet3& in) {
    JetBatch out;
    activation_forward(act, to_batch(in), out);
    return jet_at(out, 0);
}

Jet3 hadamard_boundary_jet(const Jet3& raw, const Point3& x) {
    JetBatch out;
    boundary_forward(to_batch(raw), std::span<const Point3>(&x, 1), out);
    return jet_at(out, 0);
}

JetBatch seed_batch(std::span<const Point3> xs, JetOrder order) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    JetBatch b(order, 3, n);
    const int c = b.stride();
    if (order == JetOrder::second) b.data.setZero();
    for (Eigen::Index p = 0; p < n; ++p) {
        b.data.col(p * c) = xs[static_cast<std::size_t>(p)];
        if (order == JetOrder::second) {
            b.data(0, p * c + 1) = 1.0;
            b.data(1, p * c + 2) = 1.0;
            b.data(2, p * c + 3) = 1.0;
        }
    }
    return b;
}

void affine_forward(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias, const JetBatch& in, JetBatch& out) {
    if (weight.cols() != in.width() || weight.rows() != bias.size()) {
        throw DimensionError("affine layer shape mismatch: weight " + std::to_string(weight.rows()) + "x" +
                             std::to_string(weight.cols()) + ", bias " + std::to_string(bias.size()) +
                             ", input width " + std::to_string(in.width()));
    }
    out.order = in.order;
    out.data.noalias() = weight * in.data;
    const int c = in.stride();
    const Eigen::Index n = in.points();
    for (Eigen::Index p = 0; p < n; ++p) out.data.col(p * c) += bias;
}

void affine_backward(const Eigen::MatrixXd& weight, const JetBatch& in, const Eigen::MatrixXd& dout,
                     Eigen::Ref<Eigen::MatrixXd> dweight, Eigen::Ref<Eigen::VectorXd> dbias, Eigen::MatrixXd* din) {
    dweight.noalias() += dout * in.data.transpose();
    const int c = in.stride();
    const Eigen::Index n = in.points();
    for (Eigen::Index p = 0; p < n; ++p) dbias += dout.col(p * c);
    if (din != nullptr) din->noalias() = weight.transpose() * dout;
}

void activation_forward(Activation act, const JetBatch& pre, JetBatch& out) {
    out.order = pre.order;
    out.data.resize(pre.data.rows(), pre.data.cols());
    const Eigen::Index w = pre.width();
    const Eigen::Index n = pre.points();
    if (pre.order == JetOrder::value_only) {
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index r = 0; r < w; ++r) out.data(r, p) = activation_derivs(act, pre.data(r, p)).s0;
        return;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
        const Eigen::Index c = p * 5;
        for (Eigen::Index r = 0; r < w; ++r) {
            const auto d = activation_derivs(act, pre.data(r, c));
            const double j0 = pre.data(r, c + 1);
            const double j1 = pre.data(r, c + 2);
            const double j2 = pre.data(r, c + 3);
            out.data(r, c) = d.s0;
            out.data(r, c + 1) = d.s1 * j0;
            out.data(r, c + 2) = d.s1 * j1;
            out.data(r, c + 3) = d.s1 * j2;
            out.data(r, c + 4) = d.s2 * (j0 * j0 + j1 * j1 + j2 * j2) + d.s1 * pre.data(r, c + 4);
        }
    }
}

void activation_backward(Activation act, const JetBatch& pre, const Eigen::MatrixXd& dout, Eigen::MatrixXd& dpre) {
    dpre.resize(pre.data.rows(), pre.data.cols());
    const Eigen::Index w = pre.width();
    const Eigen::Index n = pre.points();
    if (pre.order == JetOrder::value_only) {
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index r = 0; r < w; ++r) dpre(r, p) = dout(r, p) * activation_derivs(act, pre.data(r, p)).s1;
        return;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
        const Eigen::Index c = p * 5;
        for (Eigen::Index r = 0; r < w; ++r) {
            const auto d = activation_derivs(act, pre.data(r, c));
            const double j0 = pre.data(r, c + 1);
            const double j1 = pre.data(r, c + 2);
            const double j2 = pre.data(r, c + 3);
            const double lap = pre.data(r, c + 4);
            const double a0 = dout(r, c);
            const double a1 = dout(r, c + 1);
            const double a2 = dout(r, c + 2);
            const double a3 = dout(r, c + 3);
            const double al = dout(r, c + 4);
            const double sq = j0 * j0 + j1 * j1 + j2 * j2;
            dpre(r, c) = a0 * d.s1 + d.s2 * (a1 * j0 + a2 * j1 + a3 * j2) + al * (d.s3 * sq + d.s2 * lap);
            dpre(r, c + 1) = a1 * d.s1 + 2.0 * al * d.s2 * j0;
            dpre(r, c + 2) = a2 * d.s1 + 2.0 * al * d.s2 * j1;
            dpre(r, c + 3) = a3 * d.s1 + 2.0 * al * d.s2 * j2;
            dpre(r, c + 4) = al * d.s1;
        }
    }
}

void boundary_forward(const JetBatch& raw, std::span<const Point3> xs, JetBatch& out) {
    if (raw.width() != 3 || raw.points() != static_cast<Eigen::Index>(xs.size())) {
        throw DimensionError("boundary wrap expects a width-3 jet per input point");
    }
    out.order = raw.order;
    out.data.resize(raw.data.rows(), raw.data.cols());
    const int c = raw.stride();
    const Eigen::Index n = raw.points();
    for (Eigen::Index p = 0; p < n; ++p) {
        const Point3& x = xs[static_cast<std::size_t>(p)];
        const Eigen::Index base = p * c;
        for (int i = 0; i < 3; ++i) {
            const double w = x[i] * (1.0 - x[i]);
            const double g = raw.data(i, base);
            out.data(i, base) = g * w + x[i];
            if (raw.order == JetOrder::second) {
                const double slope = 1.0 - 2.0 * x[i];
                for (int j = 0; j < 3; ++j) out.data(i, base + 1 + j) = w * raw.data(i, base + 1 + j);
                out.data(i, base + 1 + i) += g * slope + 1.0;
                out.data(i, base + 4) = w * raw.data(i, base + 4) + 2.0 * slope * raw.data(i, base + 1 + i) - 2.0 * g;
            }
        }
    }
}

void boundary_backward(const JetBatch& raw, std::span<const Point3> xs, const Eigen::MatrixXd& dout,
                       Eigen::MatrixXd& draw) {
    draw.resize(raw.data.rows(), raw.data.cols());
    const int c = raw.stride();
    const Eigen::Index n = raw.points();
    for (Eigen::Index p = 0; p < n; ++p) {
        const Point3& x = xs[static_cast<std::size_t>(p)];
        const Eigen::Index base = p * c;
        for (int i = 0; i < 3; ++i) {
            const double w = x[i] * (1.0 - x[i]);
            if (raw.order == JetOrder::value_only) {
                draw(i, base) = w * dout(i, base);
                continue;
            }
            const double slope = 1.0 - 2.0 * x[i];
            const double dl = dout(i, base + 4);
            draw(i, base) = w * dout(i, base) + slope * dout(i, base + 1 + i) - 2.0 * dl;
            for (int j = 0; j < 3; ++j) draw(i, base + 1 + j) = w * dout(i, base + 1 + j);
            draw(i, base + 1 + i) += 2.0 * slope * dl;
            draw(i, base + 4) = w * dl;
        }
    }
}

double det3(const Mat3& m) {
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

Mat3 cofactor3(const Mat3& m) {
    Mat3 c;
    c(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    c(0, 1) = -(m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0));
    c(0, 2) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
    c(1, 0) = -(m(0, 1) * m(2, 2) - m(0, 2) * m(2, 1));
    c(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
    c(1, 2) = -(m(0, 0) * m(2, 1) - m(0, 1) * m(2, 0));
    c(2, 0) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
    c(2, 1) = -(m(0, 0) * m(1, 2) - m(0, 2) * m(1, 0));
    c(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return c;
}

} // namespace qcmap
