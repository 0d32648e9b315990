#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qcmap/errors.hpp"
#include "qcmap/synth.hpp"
#include "qcmap/trainer.hpp"

using namespace qcmap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "qcmap_unit_trainer";
    fs::create_directories(dir);
    return dir / name;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.formulation = Formulation::landmark;
    cfg.epochs = 3;
    cfg.n_int = 200;
    cfg.interior_batch = 100;
    cfg.width = 8;
    cfg.blocks = 1;
    return cfg;
}

} // namespace

TEST_CASE("adam step") {
    const AdamSettings opt;
    SUBCASE("hand computed first step") {
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
        AdamState st = AdamState::zeros(1);
        adam_step(theta, Eigen::VectorXd::Ones(1), st, opt);
        // m_hat = 1, v_hat = 1 after bias correction
        CHECK(theta[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-14));
        CHECK(st.t == 1);
    }
    SUBCASE("zero gradient leaves theta") {
        Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(4, -1, 1);
        const Eigen::VectorXd before = theta;
        AdamState st = AdamState::zeros(4);
        adam_step(theta, Eigen::VectorXd::Zero(4), st, opt);
        CHECK(theta == before);
        CHECK(st.t == 1);
    }
    SUBCASE("repeated steps move against the gradient sign") {
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
        AdamState st = AdamState::zeros(2);
        const Eigen::Vector2d g(3.0, -0.5);
        adam_step(theta, g, st, opt);
        const Eigen::VectorXd first = theta;
        adam_step(theta, g, st, opt);
        CHECK(first[0] < 0.0);
        CHECK(first[1] > 0.0);
        CHECK(theta[0] < first[0]);
        CHECK(theta[1] > first[1]);
    }
    SUBCASE("non-finite gradient") {
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
        AdamState st = AdamState::zeros(2);
        CHECK_THROWS_AS(adam_step(theta, Eigen::Vector2d(0.0, NAN), st, opt), NumericError);
        CHECK(st.t == 0);
    }
}

TEST_CASE("train config validation") {
    const LandmarkSet lm = twisted_pairs();
    const TrainData data{&lm, nullptr, nullptr};
    TrainConfig cfg = small_config();
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(cfg, data), ConfigError);
    cfg = small_config();
    cfg.interior_batch = 500;
    CHECK_THROWS_AS(train(cfg, data), ConfigError);
    cfg = small_config();
    cfg.formulation = Formulation::hybrid;
    CHECK_THROWS_AS(train(cfg, data), ConfigError);
    cfg = small_config();
    cfg.boundary = BoundaryMode::soft;
    CHECK_THROWS_AS(train(cfg, data), ConfigError);
    CHECK_THROWS_AS(train(small_config(), TrainData{}), ConfigError);

    cfg = small_config();
    cfg.n_int = 1001;
    cfg.interior_batch = 500;
    CHECK(cfg.steps_per_epoch() == 3);
    cfg.interior_batch = 0;
    CHECK(cfg.steps_per_epoch() == 1);
}

TEST_CASE("single epoch smoke run") {
    const LandmarkSet lm = twisted_pairs();
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    int calls = 0;
    const TrainResult r = train(cfg, {&lm, nullptr, nullptr}, [&](const HistoryRow&, const NetParams&) { ++calls; });
    CHECK(r.history.size() == 1);
    CHECK(calls == 1);
    CHECK(r.steps == 2);
    const auto& l = r.history[0].losses;
    CHECK(l.recompose(cfg.weights) == doctest::Approx(l.total).epsilon(1e-12));
}

TEST_CASE("reproducible history") {
    const LandmarkSet lm = twisted_pairs();
    const TrainConfig cfg = small_config();
    const TrainResult a = train(cfg, {&lm, nullptr, nullptr});
    const TrainResult b = train(cfg, {&lm, nullptr, nullptr});
    CHECK(history_csv(a.history) == history_csv(b.history));
    CHECK(a.params.flatten() == b.params.flatten());
    CHECK(a.pool_hash == b.pool_hash);

    TrainConfig other = cfg;
    other.seed = 1;
    const TrainResult c = train(other, {&lm, nullptr, nullptr});
    CHECK(history_csv(a.history) != history_csv(c.history));
}

TEST_CASE("identity data stays at the floor") {
    // p = q and S = T: nothing to learn beyond the conformality floor.
    LandmarkSet lm;
    for (const auto& pr : twisted_pairs().pairs) lm.pairs.push_back({pr.q, pr.q});
    Volume3 img({6, 6, 6});
    for (int k = 0; k < 6; ++k)
        for (int j = 0; j < 6; ++j)
            for (int i = 0; i < 6; ++i) img.at(i, j, k) = std::sin(3.0 * i) * std::cos(2.0 * j + k);
    img = normalize_minmax(img);

    TrainConfig cfg;
    cfg.formulation = Formulation::hybrid;
    cfg.epochs = 200;
    cfg.n_int = 200;
    cfg.interior_batch = 0;
    cfg.image_batch = 216;
    cfg.width = 8;
    cfg.blocks = 1;
    const TrainResult r = train(cfg, {&lm, &img, &img});
    REQUIRE(r.history.size() == 200);
    const double initial = r.history.front().losses.total;
    double worst = 0.0;
    for (const auto& row : r.history) worst = std::max(worst, row.losses.total);
    CHECK(worst <= 1.05 * initial);
    CHECK(r.history.back().losses.total >= cfg.weights.conformality * (1.0 - 1e-12));
}

TEST_CASE("non-finite loss aborts and keeps the last checkpoint") {
    const LandmarkSet lm = twisted_pairs();
    TrainConfig cfg = small_config();
    cfg.checkpoint_every = 1;
    cfg.checkpoint_path = scratch("nan.ckpt");
    const TrainResult good = train(cfg, {&lm, nullptr, nullptr});
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const std::string before = slurp(cfg.checkpoint_path);
    REQUIRE(!before.empty());

    cfg.adam.lr = 1e300;
    CHECK_THROWS_AS(train(cfg, {&lm, nullptr, nullptr}), NumericError);
    CHECK(slurp(cfg.checkpoint_path) == before);
    CHECK(read_checkpoint(cfg.checkpoint_path).flatten() == good.params.flatten());
}

TEST_CASE("history csv round trip") {
    const LandmarkSet lm = twisted_pairs();
    const TrainResult r = train(small_config(), {&lm, nullptr, nullptr});
    const fs::path path = scratch("history.csv");
    write_history_csv(r.history, path);
    const auto back = read_history_csv(path);
    REQUIRE(back.size() == r.history.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].epoch == r.history[i].epoch);
        for (std::size_t t = 0; t <= index_of(LossTerm::total); ++t) {
            CHECK(back[i].losses.get(static_cast<LossTerm>(t)) == r.history[i].losses.get(static_cast<LossTerm>(t)));
        }
        CHECK(back[i].losses.omega_plus_fraction == r.history[i].losses.omega_plus_fraction);
    }
    std::ofstream(path, std::ios::trunc) << "epoch,total\n0,1\n";
    CHECK_THROWS_AS(read_history_csv(path), IoError);
}
