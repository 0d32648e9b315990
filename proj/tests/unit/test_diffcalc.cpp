#include <doctest.h>

#include <memory>

#include "qcmap/errors.hpp"
#include "qcmap/losses.hpp"
#include "qcmap/network.hpp"
#include "qcmap/sampling.hpp"
#include "qcmap/synth.hpp"
#include "support/oracles.hpp"

using namespace qcmap;
using namespace qcmap::testing;

namespace {

Jet3 random_affine_seed(Eigen::MatrixXd& w, Eigen::VectorXd& b, const Point3& x, int m, std::uint64_t seed) {
    Rng rng(seed);
    w.resize(m, 3);
    b.resize(m);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.5, 1.5);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.5, 0.5);
    return affine_jet(w, b, seed_jet(x));
}

} // namespace

TEST_CASE("seed jet is the identity") {
    const Point3 x(0.2, 0.5, 0.9);
    const Jet3 j = seed_jet(x);
    CHECK(j.value == x);
    CHECK(j.jac == Eigen::Matrix3d::Identity());
    CHECK(j.lap.isZero(0.0));
    CHECK(seed_jet(Point3::Zero()).jac == Eigen::Matrix3d::Identity());
}

TEST_CASE("affine jet") {
    const Point3 x(0.3, 0.1, 0.7);
    const Jet3 in = seed_jet(x);

    SUBCASE("identity weights reproduce the input") {
        const Jet3 out = affine_jet(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), in);
        CHECK(out.value == in.value);
        CHECK(out.jac == in.jac);
        CHECK(out.lap == in.lap);
    }
    SUBCASE("scaled identity scales the Jacobian") {
        const Jet3 out = affine_jet(2.0 * Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), in);
        CHECK(out.jac == 2.0 * Eigen::Matrix3d::Identity());
    }
    SUBCASE("random weights agree with finite differences") {
        Eigen::MatrixXd w;
        Eigen::VectorXd b;
        const Jet3 out = random_affine_seed(w, b, x, 5, 11);
        const VecField f = [&](const Point3& p) -> Eigen::VectorXd { return w * p + b; };
        CHECK(rel_err(out.jac, fd_jacobian(f, x, 1e-4)) <= 1e-6);
        CHECK(out.lap.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("activation jet") {
    for (const Activation act : {Activation::tanh, Activation::arctan}) {
        CAPTURE(activation_name(act));
        const Jet3 out = activation_jet(act, seed_jet(Point3::Zero()));
        CHECK(out.value.isZero(0.0));
        CHECK(out.jac.isApprox(Eigen::Matrix3d::Identity(), 1e-15));
        CHECK(out.lap.cwiseAbs().maxCoeff() <= 1e-15);

        const Point3 x(0.4, 0.6, 0.2);
        Eigen::MatrixXd w;
        Eigen::VectorXd b;
        const Jet3 pre = random_affine_seed(w, b, x, 4, 7);
        const Jet3 post = activation_jet(act, pre);
        const VecField f = [&](const Point3& p) -> Eigen::VectorXd {
            Eigen::VectorXd u = w * p + b;
            for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = activation_derivs(act, u[i]).s0;
            return u;
        };
        CHECK(rel_err(post.jac, fd_jacobian(f, x, 1e-4)) <= 1e-6);
        CHECK(rel_err(post.lap, fd_laplacian(f, x, 1e-4)) <= 1e-6);
    }
}

TEST_CASE("activation derivatives match finite differences") {
    for (const Activation act : {Activation::tanh, Activation::arctan}) {
        for (double u : {-1.7, -0.3, 0.0, 0.4, 2.1}) {
            const double h = 1e-5;
            const auto d = activation_derivs(act, u);
            const auto p = activation_derivs(act, u + h);
            const auto m = activation_derivs(act, u - h);
            CHECK(rel_err(d.s1, (p.s0 - m.s0) / (2 * h), 1.0) <= 1e-8);
            CHECK(rel_err(d.s2, (p.s1 - m.s1) / (2 * h), 1.0) <= 1e-8);
            CHECK(rel_err(d.s3, (p.s2 - m.s2) / (2 * h), 1.0) <= 1e-8);
        }
    }
}

TEST_CASE("hadamard boundary jet") {
    SUBCASE("zero network gives the identity") {
        for (const Point3& x : {Point3(0.1, 0.2, 0.3), Point3(0.0, 1.0, 0.5), Point3(0.9, 0.9, 0.0)}) {
            Jet3 g;
            g.value = Eigen::VectorXd::Zero(3);
            g.jac = Eigen::MatrixXd::Zero(3, 3);
            g.lap = Eigen::VectorXd::Zero(3);
            const Jet3 f = hadamard_boundary_jet(g, x);
            CHECK(f.value == x);
            CHECK(f.jac == Eigen::Matrix3d::Identity());
            CHECK(f.lap.isZero(0.0));
        }
    }
    SUBCASE("pinned face coordinate") {
        const Point3 x(0.0, 0.37, 0.81);
        Eigen::MatrixXd w;
        Eigen::VectorXd b;
        const Jet3 g = activation_jet(Activation::tanh, random_affine_seed(w, b, x, 3, 5));
        CHECK(hadamard_boundary_jet(g, x).value[0] == 0.0);
    }
    SUBCASE("random raw jet agrees with finite differences") {
        const Point3 x(0.35, 0.62, 0.18);
        Eigen::MatrixXd w;
        Eigen::VectorXd b;
        const Jet3 f = hadamard_boundary_jet(activation_jet(Activation::tanh, random_affine_seed(w, b, x, 3, 9)), x);
        const VecField fn = [&](const Point3& p) -> Eigen::VectorXd {
            Eigen::Vector3d g = w * p + b;
            for (int a = 0; a < 3; ++a) g[a] = std::tanh(g[a]) * p[a] * (1 - p[a]) + p[a];
            return g;
        };
        CHECK(rel_err(f.value, fn(x)) <= 1e-15);
        CHECK(rel_err(f.jac, fd_jacobian(fn, x, 1e-4)) <= 1e-6);
        CHECK(rel_err(f.lap, fd_laplacian(fn, x, 1e-4)) <= 1e-6);
    }
}

TEST_CASE("batch jets match single-point jets") {
    const NetParams params = random_params(6, 2, Activation::tanh, 3);
    auto shared = std::make_shared<const NetParams>(params);
    const auto xs = random_interior(9, 4);
    const NetworkPass pass(shared, xs, JetOrder::second, BoundaryMode::hard);
    const NetworkPass values(shared, xs, JetOrder::value_only, BoundaryMode::hard);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const MapEval single = forward(params, xs[i]);
        const MapEval batch = pass.eval_at(static_cast<Eigen::Index>(i));
        CHECK((single.f - batch.f).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((single.jac - batch.jac).cwiseAbs().maxCoeff() <= 1e-13);
        CHECK((single.lap - batch.lap).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((values.value_at(static_cast<Eigen::Index>(i)) - batch.f).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("determinant and cofactor") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.data()[i] = rng.uniform(-2, 2);
        CHECK(det3(m) == doctest::Approx(m.determinant()).epsilon(1e-12));
        const Mat3 cof = cofactor3(m);
        Mat3 fd;
        for (int i = 0; i < 9; ++i) {
            Mat3 p = m, q = m;
            p.data()[i] += 1e-6;
            q.data()[i] -= 1e-6;
            fd.data()[i] = (det3(p) - det3(q)) / 2e-6;
        }
        CHECK(rel_err(cof, fd) <= 1e-8);
    }
}

TEST_CASE("tape backward on a squared norm") {
    Eigen::VectorXd theta(5);
    theta << 1.0, -2.0, 0.5, 3.0, 0.0;
    const GradTape tape = record_squared_norm(theta);
    CHECK(tape.value(0) == doctest::Approx(14.25));
    CHECK(tape.backward(0) == 2.0 * theta);
    CHECK_THROWS_AS(tape.backward(99), ContractError);
}

TEST_CASE("tape combination sums weighted parts") {
    Eigen::VectorXd theta(3);
    theta << 1.0, 2.0, 3.0;
    GradTape tape(3);
    tape.set_value(0, 1.0);
    tape.add_direct(0, Eigen::Vector3d(1, 0, 0));
    tape.set_value(1, 2.0);
    tape.add_direct(1, Eigen::Vector3d(0, 1, 1));
    tape.set_combination(2, {{0, 2.0}, {1, -1.0}});
    CHECK(tape.backward(2) == Eigen::Vector3d(2, -1, -1));
}

TEST_CASE("landmark gradient matches finite differences") {
    const NetParams params = random_params(8, 2, Activation::tanh, 21);
    const LandmarkSet lm = twisted_pairs();
    const LossWeights w;
    LossSamples samples;
    samples.interior = random_interior(16, 22);
    LossData data;
    data.landmarks = &lm;
    const auto run = [&](const Eigen::VectorXd& theta) {
        NetParams p = params;
        p.assign(theta);
        return total_loss(std::make_shared<const NetParams>(p), w, Formulation::landmark, BoundaryMode::hard,
                          samples, data);
    };
    const Eigen::VectorXd theta = params.flatten();
    const auto ev = run(theta);
    const auto coords = random_coords(theta.size(), 20, 23);
    const Eigen::VectorXd g = ev.tape.backward(index_of(LossTerm::landmark));
    const Eigen::VectorXd fd = fd_param_gradient(
        [&](const Eigen::VectorXd& t) { return run(t).breakdown.landmark; }, theta, coords, 1e-5);
    Eigen::VectorXd gs(fd.size());
    for (std::size_t i = 0; i < coords.size(); ++i) gs[static_cast<Eigen::Index>(i)] = g[coords[i]];
    CHECK(rel_err(gs, fd) <= 1e-4);
    CHECK(ev.breakdown.landmark == doctest::Approx(landmark_loss(params, lm)).epsilon(1e-14));
}

TEST_CASE("replay reproduces the recorded value bit for bit") {
    const NetParams params = random_params(8, 2, Activation::tanh, 31);
    const LandmarkSet lm = twisted_pairs();
    LossSamples samples;
    samples.interior = random_interior(32, 32);
    LossData data;
    data.landmarks = &lm;
    const auto ev = total_loss(std::make_shared<const NetParams>(params), LossWeights{}, Formulation::landmark,
                               BoundaryMode::hard, samples, data);
    for (std::size_t t = 0; t < kLossTermCount; ++t) {
        if (!ev.tape.has_term(t)) continue;
        CHECK(ev.tape.replay(t) == ev.tape.value(t));
    }
}
