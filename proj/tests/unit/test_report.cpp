#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include <json.hpp>

#include "qcmap/errors.hpp"
#include "qcmap/losses.hpp"
#include "qcmap/report.hpp"
#include "qcmap/synth.hpp"
#include "support/oracles.hpp"

using namespace qcmap;
using namespace qcmap::testing;
namespace fs = std::filesystem;

namespace {

NetParams identity_net() { return NetParams::zeros(6, 1, Activation::tanh); }

NetParams some_net(std::uint64_t seed) { return random_params(6, 2, Activation::tanh, seed, 0.3); }

Volume3 ramp(Volume3::Dims d) {
    Volume3 v(d);
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) v.at(i, j, k) = std::sin(1.0 + i) + 0.3 * j - 0.1 * k * k;
    return v;
}

} // namespace

TEST_CASE("jacobian color") {
    CHECK(jacobian_color(1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(jacobian_color(0.0) == 0.0);
    CHECK(jacobian_color(-1.0) == doctest::Approx(-0.5).epsilon(1e-15));
    double prev = -1.0;
    for (double d = -5.0; d <= 5.0; d += 0.125) {
        const double c = jacobian_color(d);
        CHECK(c > prev);
        CHECK(jacobian_color(-d) == -c);
        CHECK(std::abs(c) < 1.0);
        prev = c;
    }
}

TEST_CASE("histogram binning") {
    const std::vector<double> dets = {-1.0, 0.0, 0.5, 1.0, 1.0, 2.0};
    const DetHistogram h = histogram_of(dets, 4);
    CHECK(h.sample_count == 6);
    REQUIRE(h.bin_edges.size() == 5);
    CHECK(h.bin_edges.front() == -1.0);
    CHECK(h.bin_edges.back() == 2.0);
    CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == 6);
    CHECK(h.negative_fraction == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
    CHECK(h.min_det == -1.0);
    CHECK(h.max_det == 2.0);
    CHECK(h.counts.back() == 1);
    CHECK_THROWS_AS(histogram_of(std::vector<double>{}, 4), ContractError);
}

TEST_CASE("identity histogram") {
    const DetHistogram h = det_histogram(identity_net(), 5000, 100, 3);
    CHECK(h.sample_count == 5000);
    CHECK(h.negative_fraction == 0.0);
    CHECK(h.min_det == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(h.max_det == doctest::Approx(1.0).epsilon(1e-14));
    std::size_t in_one = 0;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        if (h.bin_edges[b] <= 1.0 && 1.0 <= h.bin_edges[b + 1]) in_one += h.counts[b];
    }
    CHECK(in_one == 5000);
}

TEST_CASE("histogram is deterministic and matches single-point evaluation") {
    const NetParams net = some_net(4);
    const auto a = sample_dets(net, 300, 9);
    const auto b = sample_dets(net, 300, 9);
    CHECK(a == b);
    const auto pts = map_evals(net, random_interior(40, 2));
    const auto xs = random_interior(40, 2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const MapEval e = forward(net, xs[i], BoundaryMode::hard);
        CHECK(pts[i].det == doctest::Approx(e.det).epsilon(1e-12));
        CHECK((pts[i].f - e.f).norm() <= 1e-14);
    }
    const auto vals = map_points(net, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK((vals[i] - pts[i].f).norm() <= 1e-14);
}

TEST_CASE("cross sections") {
    const std::vector<double> levels = {0.0, 0.2, 1.0};
    SUBCASE("identity") {
        const auto rows = cross_sections(identity_net(), 0, levels, 5);
        CHECK(rows.size() == 75);
        for (const auto& r : rows) {
            CHECK(r.out[0] == r.in[0]);
            CHECK((r.out - r.in).norm() <= 1e-15);
            CHECK(r.det == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(r.color == doctest::Approx(0.5).epsilon(1e-14));
        }
    }
    SUBCASE("boundary planes are pinned") {
        const auto rows = cross_sections(some_net(7), 1, levels, 7);
        CHECK(rows.size() == 147);
        for (const auto& r : rows) {
            if (r.in[1] == 0.0 || r.in[1] == 1.0) CHECK(r.out[1] == r.in[1]);
            CHECK(r.color == jacobian_color(r.det));
        }
    }
    CHECK_THROWS_AS(cross_sections(identity_net(), 3, levels, 5), ConfigError);
    const std::vector<double> bad = {1.5};
    CHECK_THROWS_AS(cross_sections(identity_net(), 0, bad, 5), ConfigError);
}

TEST_CASE("warp image") {
    const Volume3 src = ramp({5, 6, 7});
    SUBCASE("identity resamples at shared centers") {
        const Volume3 out = warp_image(identity_net(), src, src.dims());
        REQUIRE(out.dims() == src.dims());
        for (std::size_t i = 0; i < out.voxel_count(); ++i) CHECK(std::abs(out.data()[i] - src.data()[i]) <= 1e-12);
    }
    SUBCASE("constant source") {
        const Volume3 out = warp_image(some_net(2), Volume3({4, 4, 4}, 0.625), {9, 3, 5});
        for (double v : out.data()) CHECK(v == doctest::Approx(0.625).epsilon(1e-15));
    }
    SUBCASE("matches the intensity loss on the voxel grid") {
        const Volume3 tgt = ramp({5, 6, 7});
        const NetParams net = some_net(11);
        const Volume3 warped = warp_image(net, src, tgt.dims());
        double mse = 0.0;
        std::vector<Point3> centers;
        for (int k = 0; k < 7; ++k)
            for (int j = 0; j < 6; ++j)
                for (int i = 0; i < 5; ++i) {
                    const double d = warped.at(i, j, k) - (tgt.at(i, j, k) + 0.01 * i);
                    mse += d * d;
                    centers.push_back(tgt.center(i, j, k));
                }
        mse /= 210.0;
        Volume3 tgt2 = tgt;
        for (int k = 0; k < 7; ++k)
            for (int j = 0; j < 6; ++j)
                for (int i = 0; i < 5; ++i) tgt2.at(i, j, k) += 0.01 * i;
        CHECK(intensity_loss(net, src, tgt2, centers) == doctest::Approx(mse).epsilon(1e-12));
    }
}

TEST_CASE("boundary error") {
    CHECK(boundary_error(some_net(5), BoundaryMode::hard, 2000, 1) == 0.0);
    CHECK(boundary_error(some_net(5), BoundaryMode::soft, 2000, 1) > 0.0);
}

TEST_CASE("loss table") {
    CHECK_THROWS_AS(loss_table({}), ContractError);
    HistoryRow a, b;
    a.epoch = 0;
    a.losses.landmark = 3.0;
    b.epoch = 1;
    b.losses.landmark = 0.25;
    b.losses.intensity = 0.5;
    b.losses.conformality = 1.125;
    b.losses.smoothness = 7.0;
    const LossTable one = loss_table({a});
    CHECK(one.epoch == 0);
    CHECK(one.landmark == 3.0);
    const LossTable t = loss_table({a, b});
    CHECK(t.epoch == 1);
    CHECK(t.landmark == 0.25);
    const auto j = nlohmann::json::parse(t.to_json());
    CHECK(j.at("Landmark loss").get<double>() == 0.25);
    CHECK(j.at("Intensity loss").get<double>() == 0.5);
    CHECK(j.at("Conformality loss").get<double>() == 1.125);
    CHECK(j.at("Smoothness loss").get<double>() == 7.0);

    const fs::path dir = fs::temp_directory_path() / "qcmap_unit_report";
    fs::create_directories(dir);
    write_history_csv({a, b}, dir / "h.csv");
    const LossTable back = loss_table(read_history_csv(dir / "h.csv"));
    CHECK(back.to_json() == t.to_json());
}
