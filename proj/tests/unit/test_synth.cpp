#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "qcmap/errors.hpp"
#include "qcmap/synth.hpp"
#include "support/oracles.hpp"

using namespace qcmap;
using namespace qcmap::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "qcmap_unit_synth";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("appendix map") {
    const AnalyticMap g = appendix_map();
    CHECK(g(Point3(0.0, 0.3, 0.8))[0] == 0.0);
    CHECK(g(Point3(0.5, 0.5, 0.5))[0] == doctest::Approx(0.5 + 0.25 * std::cos(3.5) / 2).epsilon(1e-15));
    CHECK(g(Point3(0.5, 0.5, 0.5))[0] == doctest::Approx(0.382944).epsilon(1e-6));

    const VecField f = [&](const Point3& x) -> Eigen::VectorXd { return g(x); };
    for (const Point3& x : random_interior(20, 3)) {
        CHECK(rel_err(g.jacobian(x), fd_jacobian(f, x, 1e-5)) <= 1e-8);
    }
    const double frac = appendix_nonpositive_fraction(50);
    CHECK(frac > 0.0);
    CHECK(frac < 0.5);
}

TEST_CASE("appendix dataset") {
    CHECK(appendix_source(Point3(0, 0, 0)) == 1.0);
    CHECK(appendix_source(Point3(0.5, 0, 0)) == doctest::Approx(0.0).epsilon(1e-15));
    const auto ds = appendix_dataset(8);
    CHECK(ds.landmarks.size() == 512);
    CHECK(ds.source.dims() == Volume3::Dims{8, 8, 8});
    CHECK(ds.target.dims() == Volume3::Dims{8, 8, 8});
    const AnalyticMap g;
    for (const auto& pr : ds.landmarks.pairs) CHECK((g(pr.q) - pr.p).norm() == 0.0);
    const Point3 c = ds.target.center(2, 5, 3);
    CHECK(ds.target.at(2, 5, 3) == doctest::Approx(appendix_source(g(c))).epsilon(1e-15));
    CHECK_THROWS_AS(appendix_dataset(0), ConfigError);
}

TEST_CASE("twisted pairs") {
    const LandmarkSet lm = twisted_pairs();
    REQUIRE(lm.size() == 8);
    for (int quartet = 0; quartet < 2; ++quartet) {
        for (int i = 0; i < 4; ++i) {
            const Point3& p = lm.pairs[static_cast<std::size_t>(quartet * 4 + i)].p;
            bool found = false;
            for (int j = 0; j < 4; ++j) {
                if ((lm.pairs[static_cast<std::size_t>(quartet * 4 + j)].q - p).norm() < 1e-15) found = true;
            }
            CHECK(found);
        }
    }
    for (const auto& pr : lm.pairs) {
        CHECK(pr.q[2] == pr.p[2]);
        CHECK((pr.q[2] == 0.3 || pr.q[2] == 0.7));
        // quarter turn anticlockwise about the z axis through the center
        CHECK(pr.p[0] - 0.5 == doctest::Approx(-(pr.q[1] - 0.5)).epsilon(1e-15));
        CHECK(pr.p[1] - 0.5 == doctest::Approx(pr.q[0] - 0.5).epsilon(1e-15));
        for (int a = 0; a < 3; ++a) {
            CHECK(std::min(pr.q[a], 1 - pr.q[a]) > 0.1);
            CHECK(std::min(pr.p[a], 1 - pr.p[a]) > 0.1);
        }
    }
}

TEST_CASE("rotated sphere") {
    const LandmarkSet lm = rotated_sphere();
    CHECK(lm.size() == 200);
    const Point3 c(0.5, 0.5, 0.5);
    for (const auto& pr : lm.pairs) {
        CHECK((pr.q - c).norm() == doctest::Approx(0.25).epsilon(1e-14));
        CHECK((pr.p - c).norm() == doctest::Approx(0.25).epsilon(1e-14));
        // quarter turn about z: (x, y) -> (-y, x) around the center
        CHECK((pr.p - c - Point3(-(pr.q[1] - 0.5), pr.q[0] - 0.5, pr.q[2] - 0.5)).norm() <= 1e-15);
    }
    const auto a = rotated_sphere(50, 7), b = rotated_sphere(50, 7);
    for (std::size_t i = 0; i < 50; ++i) CHECK(a.pairs[i].q == b.pairs[i].q);
}

TEST_CASE("translating disk") {
    const LandmarkSet lm = translating_disk();
    CHECK(lm.size() == 400);
    for (const auto& pr : lm.pairs) {
        CHECK(pr.p[1] == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(pr.q[1] == doctest::Approx(0.7).epsilon(1e-15));
        CHECK((pr.p - pr.q - Point3(0, -0.4, 0)).norm() <= 1e-15);
    }
}

TEST_CASE("landmark file round trip and errors") {
    const fs::path path = scratch("lm.csv");
    const LandmarkSet lm = rotated_sphere(20, 3);
    write_landmarks(lm, path);
    const LandmarkSet back = read_landmarks(path);
    REQUIRE(back.size() == lm.size());
    for (std::size_t i = 0; i < lm.size(); ++i) {
        CHECK(back.pairs[i].q == lm.pairs[i].q);
        CHECK(back.pairs[i].p == lm.pairs[i].p);
    }
    std::ofstream(path, std::ios::trunc) << "0.1,0.2,0.3,0.4,0.5\n";
    CHECK_THROWS_AS(read_landmarks(path), IoError);
    std::ofstream(path, std::ios::trunc) << "0.1,0.2,0.3,0.4,0.5,1.5\n";
    CHECK_THROWS_AS(read_landmarks(path), IoError);
    CHECK_THROWS_AS(read_landmarks(scratch("missing.csv")), IoError);
}
