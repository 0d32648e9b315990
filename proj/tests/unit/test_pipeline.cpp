#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qcmap/config.hpp"
#include "qcmap/errors.hpp"
#include "qcmap/pipeline.hpp"
#include "qcmap/synth.hpp"
#include "qcmap/volume.hpp"

using namespace qcmap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "qcmap_unit_pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunSpec tiny_landmark_spec(const fs::path& landmarks) {
    RunSpec spec = parse_run_spec(R"({"formulation": "landmark", "epochs": 3, "n_int": 100, "interior_batch": 50,
                                      "network": {"width": 6, "blocks": 1}})");
    spec.landmarks = landmarks.string();
    return spec;
}

} // namespace

TEST_CASE("default config") {
    const RunSpec spec = parse_run_spec("{}");
    const TrainConfig& c = spec.config;
    CHECK(c.weights.smoothness == 0.01);
    CHECK(c.weights.bijectivity == 50.0);
    CHECK(c.weights.conformality == 1.0);
    CHECK(c.weights.volumetric == 0.0);
    CHECK(c.weights.landmark == 500.0);
    CHECK(c.weights.intensity == 500.0);
    CHECK(c.adam.lr == 0.001);
    CHECK(c.epochs == 8000);
    CHECK(c.n_int == 10000);
    CHECK(c.formulation == Formulation::hybrid);
    CHECK(c.boundary == BoundaryMode::hard);
    CHECK(c.activation == Activation::tanh);

    const RunSpec back = parse_run_spec(dump_run_spec(spec));
    CHECK(dump_run_spec(back) == dump_run_spec(spec));
}

TEST_CASE("config errors name the field") {
    auto message = [](const std::string& text) -> std::string {
        try {
            parse_run_spec(text);
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "";
    };
    CHECK(message(R"({"epoch": 5})").find("epoch") != std::string::npos);
    CHECK(message(R"({"weights": {"landmarks": 1}})").find("weights.landmarks") != std::string::npos);
    CHECK(message(R"({"epochs": "many"})").find("epochs") != std::string::npos);
    CHECK(message(R"({"epochs": 0})").find("epochs") != std::string::npos);
    CHECK(message(R"({"formulation": "both"})").find("both") != std::string::npos);
    CHECK(message(R"({"network": {"activation": "relu"}})").find("relu") != std::string::npos);
    CHECK(!message("{not json").empty());
    CHECK(!message(R"({"weights": {"conformality": -1}})").empty());
}

TEST_CASE("synth outputs") {
    const fs::path dir = fresh_dir("synth");
    SynthOptions opt;
    run_synth("twisted", dir / "tw", opt);
    CHECK(read_landmarks(dir / "tw" / "landmarks.csv").size() == 8);
    CHECK(fs::exists(dir / "tw" / "manifest.json"));

    opt.n = 200;
    opt.seed = 7;
    run_synth("sphere", dir / "s1", opt);
    run_synth("sphere", dir / "s2", opt);
    CHECK(read_landmarks(dir / "s1" / "landmarks.csv").size() == 200);
    CHECK(slurp(dir / "s1" / "landmarks.csv") == slurp(dir / "s2" / "landmarks.csv"));

    SynthOptions app;
    app.image_dims = 12;
    app.grid_n = 8;
    run_synth("appendix", dir / "app", app);
    CHECK(read_landmarks(dir / "app" / "landmarks.csv").size() == 512);
    CHECK(read_volume(dir / "app" / "source.vol").dims() == Volume3::Dims{12, 12, 12});
    CHECK(read_volume(dir / "app" / "target.vol").dims() == Volume3::Dims{12, 12, 12});
    const json m = json::parse(slurp(dir / "app" / "manifest.json"));
    CHECK(m.at("outputs").at("source.vol").get<std::string>() == file_digest(dir / "app" / "source.vol"));

    CHECK_THROWS_AS(run_synth("torus", dir / "x", opt), ConfigError);
}

TEST_CASE("missing landmark file is a config error naming the field") {
    const fs::path dir = fresh_dir("missing");
    RunSpec spec = tiny_landmark_spec(dir / "nope.csv");
    try {
        run_train(spec, dir / "run");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("data.landmarks") != std::string::npos);
    }
    spec.landmarks.clear();
    CHECK_THROWS_AS(run_train(spec, dir / "run"), ConfigError);
}

TEST_CASE("train manifest reproduces the run") {
    const fs::path dir = fresh_dir("train");
    run_synth("twisted", dir, SynthOptions{});
    RunSpec spec = tiny_landmark_spec(dir / "landmarks.csv");
    spec.config.epochs = 4;
    const TrainOutputs out = run_train(spec, dir / "a");
    CHECK(read_history_csv(out.history).size() == 4);
    CHECK(fs::exists(out.checkpoint));
    CHECK(fs::exists(out.timing));

    const json m = json::parse(slurp(out.manifest));
    CHECK(m.at("config").at("epochs").get<int>() == 4);
    CHECK(m.at("seeds").at("run").get<int>() == 0);
    CHECK(m.at("inputs").size() == 1);

    const RunSpec again = parse_run_spec(slurp(out.manifest));
    CHECK(dump_run_spec(again) == dump_run_spec(spec));
    const TrainOutputs out2 = run_train(again, dir / "b");
    CHECK(slurp(out.history) == slurp(out2.history));
    CHECK(slurp(out.checkpoint) == slurp(out2.checkpoint));
}

TEST_CASE("report outputs") {
    const fs::path dir = fresh_dir("report");
    run_synth("twisted", dir, SynthOptions{});
    const TrainOutputs t = run_train(tiny_landmark_spec(dir / "landmarks.csv"), dir / "run");
    write_volume(Volume3({4, 4, 4}, 0.5), dir / "s.vol");

    ReportOptions opt;
    opt.hist_samples = 1000;
    opt.slices = {"x=0.2", "x=0.8"};
    opt.grid_n = 4;
    opt.warp_source = (dir / "s.vol").string();
    opt.warp_dims = 6;
    opt.history = t.history.string();
    run_report(t.checkpoint, opt, dir / "rep");

    std::istringstream hist(slurp(dir / "rep" / "det_histogram.csv"));
    std::string line;
    std::getline(hist, line);
    CHECK(line == "bin_lo,bin_hi,count");
    long total = 0, rows = 0;
    while (std::getline(hist, line)) {
        total += std::stol(line.substr(line.rfind(',') + 1));
        ++rows;
    }
    CHECK(rows == 100);
    CHECK(total == 1000);

    for (const char* name : {"section_x_0.2.csv", "section_x_0.8.csv"}) {
        std::istringstream sec(slurp(dir / "rep" / name));
        std::getline(sec, line);
        CHECK(line == "in_x,in_y,in_z,out_x,out_y,out_z,det,color");
        int n = 0;
        while (std::getline(sec, line)) ++n;
        CHECK(n == 16);
    }
    CHECK(read_volume(dir / "rep" / "warped.vol").dims() == Volume3::Dims{6, 6, 6});
    CHECK(fs::exists(dir / "rep" / "loss_table.json"));
    CHECK(fs::exists(dir / "rep" / "report.json"));

    opt.slices = {"w=0.2"};
    CHECK_THROWS_AS(run_report(t.checkpoint, opt, dir / "bad"), ConfigError);
    std::ofstream(dir / "broken.ckpt") << "{\"width\": 6}\n";
    CHECK_THROWS_AS(run_report(dir / "broken.ckpt", ReportOptions{}, dir / "bad"), CheckpointError);
}

TEST_CASE("ablation layout") {
    const fs::path dir = fresh_dir("ablate");
    run_synth("twisted", dir, SynthOptions{});
    RunSpec spec = tiny_landmark_spec(dir / "landmarks.csv");
    spec.config.epochs = 2;
    const fs::path cmp = run_ablate(spec, dir / "out");
    CHECK(cmp.filename() == "comparison.json");
    int run_dirs = 0, files = 0;
    for (const auto& e : fs::directory_iterator(dir / "out")) (e.is_directory() ? run_dirs : files)++;
    CHECK(run_dirs == 3);
    CHECK(files == 1);

    const json j = json::parse(slurp(cmp));
    CHECK(j.contains("seed"));
    const auto& runs = j.at("runs");
    REQUIRE(runs.size() == 3);
    std::string hash;
    for (const auto& r : runs) {
        CHECK(!r.contains("seed"));
        if (hash.empty()) hash = r.at("pool_hash").get<std::string>();
        CHECK(r.at("pool_hash").get<std::string>() == hash);
    }
    CHECK(runs[2].at("boundary_error").get<double>() == 0.0);
    CHECK(runs[0].at("boundary_error").get<double>() > 0.0);
    const auto soft_hist = read_history_csv(dir / "out" / runs[0].at("name").get<std::string>() / "history.csv");
    CHECK(soft_hist.back().losses.soft_boundary > 0.0);
}
