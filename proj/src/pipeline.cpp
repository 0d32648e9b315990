#include "qcmap/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "qcmap/errors.hpp"
#include "qcmap/report.hpp"
#include "qcmap/sampling.hpp"
#include "qcmap/synth.hpp"

#ifndef QCMAP_VERSION
#define QCMAP_VERSION "dev"
#endif

namespace qcmap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json inputs_digest(const RunSpec& spec) {
    json in = json::object();
    for (const auto& p : {spec.landmarks, spec.source, spec.target}) {
        if (!p.empty() && fs::exists(p)) in[p] = file_digest(p);
    }
    return in;
}

json run_summary(const TrainResult& r) {
    const auto& last = r.history.back().losses;
    return {{"epochs", r.history.size()},
            {"steps", r.steps},
            {"final",
             {{"conformality", last.conformality},
              {"bijectivity", last.bijectivity},
              {"smoothness", last.smoothness},
              {"volumetric", last.volumetric},
              {"landmark", last.landmark},
              {"intensity", last.intensity},
              {"soft_boundary", last.soft_boundary},
              {"total", last.total},
              {"omega_plus_fraction", last.omega_plus_fraction}}}};
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse " + what + " from '" + s + "'");
    }
}

void require_file(const std::string& path, const char* field) {
    if (path.empty()) throw ConfigError(std::string(field) + " is required");
    if (!fs::is_regular_file(path)) throw ConfigError(std::string(field) + ": no such file '" + path + "'");
}

} // namespace

const char* version_string() { return QCMAP_VERSION; }

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return "fnv1a64:" + hex64(fnv1a(bytes.data(), bytes.size()));
}

std::vector<fs::path> run_synth(const std::string& kind, const fs::path& out_dir, const SynthOptions& o) {
    ensure_dir(out_dir);
    std::vector<fs::path> written;
    json manifest = {{"command", "synth"}, {"kind", kind}, {"version", version_string()}, {"seed", o.seed}};
    const fs::path lm_path = out_dir / "landmarks.csv";
    if (kind == "twisted") {
        write_landmarks(twisted_pairs(), lm_path);
    } else if (kind == "sphere") {
        const int n = o.n > 0 ? o.n : 200;
        write_landmarks(rotated_sphere(n, o.seed), lm_path);
        manifest["n"] = n;
    } else if (kind == "disk") {
        const int n = o.n > 0 ? o.n : 400;
        write_landmarks(translating_disk(n, o.seed), lm_path);
        manifest["n"] = n;
    } else if (kind == "appendix") {
        const auto ds = appendix_dataset(o.image_dims, o.grid_n);
        write_landmarks(ds.landmarks, lm_path);
        write_volume(ds.source, out_dir / "source.vol");
        write_volume(ds.target, out_dir / "target.vol");
        written.push_back(out_dir / "source.vol");
        written.push_back(out_dir / "target.vol");
        manifest["image_dims"] = o.image_dims;
        manifest["grid_n"] = o.grid_n;
    } else {
        throw ConfigError("unknown synth kind '" + kind + "' (expected twisted, sphere, disk or appendix)");
    }
    written.insert(written.begin(), lm_path);
    json outputs = json::object();
    for (const auto& p : written) outputs[p.filename().string()] = file_digest(p);
    manifest["outputs"] = outputs;
    const fs::path mpath = out_dir / "manifest.json";
    write_text(mpath, manifest.dump(2) + "\n");
    written.push_back(mpath);
    return written;
}

TrainData LoadedData::view() const {
    TrainData d;
    if (has_landmarks) d.landmarks = &landmarks;
    if (has_volumes) {
        d.source = &source;
        d.target = &target;
    }
    return d;
}

LoadedData load_run_data(const RunSpec& spec) {
    LoadedData d;
    const Formulation f = spec.config.formulation;
    if (uses_landmarks(f)) {
        if (spec.landmarks.empty()) {
            throw ConfigError(std::string("data.landmarks is required for the ") + formulation_name(f) +
                              " formulation");
        }
        require_file(spec.landmarks, "data.landmarks");
        d.landmarks = read_landmarks(spec.landmarks);
        d.has_landmarks = true;
    }
    if (uses_intensity(f)) {
        require_file(spec.source, "data.source");
        require_file(spec.target, "data.target");
        d.source = read_volume(spec.source);
        d.target = read_volume(spec.target);
        d.has_volumes = true;
    }
    return d;
}

TrainOutputs run_train(const RunSpec& spec, const fs::path& out_dir, const ProgressFn& progress) {
    spec.config.validate();
    const LoadedData data = load_run_data(spec);
    ensure_dir(out_dir);

    TrainOutputs out;
    out.checkpoint = out_dir / "model.ckpt";
    out.history = out_dir / "history.csv";
    out.timing = out_dir / "timing.csv";
    out.manifest = out_dir / "manifest.json";

    RunSpec effective = spec;
    effective.config.checkpoint_path = out.checkpoint;

    EpochCallback cb;
    if (progress) cb = [&](const HistoryRow& row, const NetParams&) { progress("train", row); };
    const auto t0 = std::chrono::steady_clock::now();
    out.result = train(effective.config, data.view(), cb);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    write_history_csv(out.result.history, out.history);
    write_timing_csv(out.result.history, out.timing);

    json manifest = {
        {"command", "train"},
        {"version", version_string()},
        {"config", json::parse(dump_run_spec(spec))},
        {"seeds", {{"run", spec.config.seed}, {"init", spec.config.seed}, {"pool", spec.config.seed}}},
        {"pool_hash", hex64(out.result.pool_hash)},
        {"inputs", inputs_digest(spec)},
        {"outputs",
         {{"checkpoint", out.checkpoint.string()},
          {"history", out.history.string()},
          {"timing", out.timing.string()}}},
        {"summary", run_summary(out.result)},
        {"timing", {{"total_ms", ms}}},
    };
    write_text(out.manifest, manifest.dump(2) + "\n");
    return out;
}

std::vector<fs::path> run_report(const fs::path& checkpoint, const ReportOptions& o, const fs::path& out_dir) {
    const NetParams params = read_checkpoint(checkpoint);
    ensure_dir(out_dir);
    std::vector<fs::path> written;
    json summary = {{"command", "report"}, {"version", version_string()}, {"checkpoint", checkpoint.string()},
                    {"checkpoint_digest", file_digest(checkpoint)}, {"seed", o.seed}};

    if (o.hist_samples > 0) {
        const auto h = det_histogram(params, o.hist_samples, o.bins, o.seed, o.boundary);
        const fs::path p = out_dir / "det_histogram.csv";
        write_histogram_csv(h, p);
        written.push_back(p);
        summary["histogram"] = {{"sample_count", h.sample_count}, {"min_det", h.min_det},
                                {"max_det", h.max_det},         {"negative_fraction", h.negative_fraction},
                                {"mean", h.mean},               {"stddev", h.stddev}};
    }

    for (const auto& s : o.slices) {
        const auto eq = s.find('=');
        if (eq != 1 || s.size() < 3 || (s[0] != 'x' && s[0] != 'y' && s[0] != 'z')) {
            throw ConfigError("slice '" + s + "' must look like x=0.2");
        }
        const int axis = s[0] - 'x';
        const double level = parse_number(s.substr(2), "slice level");
        const double levels[] = {level};
        const auto rows = cross_sections(params, axis, levels, o.grid_n, o.boundary);
        const fs::path p = out_dir / ("section_" + std::string(1, s[0]) + "_" + s.substr(2) + ".csv");
        write_sections_csv(rows, p);
        written.push_back(p);
    }

    if (!o.warp_source.empty()) {
        const Volume3 src = read_volume(o.warp_source);
        Volume3::Dims dims = src.dims();
        if (o.warp_dims > 0) dims = {o.warp_dims, o.warp_dims, o.warp_dims};
        const fs::path p = out_dir / "warped.vol";
        write_volume(warp_image(params, src, dims, o.boundary), p);
        written.push_back(p);
        summary["warp"] = {{"source", o.warp_source}, {"dims", {dims[0], dims[1], dims[2]}}};
    }

    if (!o.history.empty()) {
        const auto table = loss_table(read_history_csv(o.history));
        const fs::path p = out_dir / "loss_table.json";
        write_text(p, table.to_json() + "\n");
        written.push_back(p);
    }

    summary["boundary_error"] = boundary_error(params, o.boundary, kBoundaryErrorSamples, o.seed);
    json outs = json::array();
    for (const auto& p : written) outs.push_back(p.string());
    summary["outputs"] = outs;
    const fs::path mpath = out_dir / "report.json";
    write_text(mpath, summary.dump(2) + "\n");
    written.push_back(mpath);
    return written;
}

fs::path run_ablate(const RunSpec& spec, const fs::path& out_dir, const ProgressFn& progress) {
    spec.config.validate();
    RunSpec lm_spec = spec;
    lm_spec.config.formulation = Formulation::landmark;
    const LoadedData data = load_run_data(lm_spec);
    ensure_dir(out_dir);

    const auto runs = ablate_boundary(spec.config, data.landmarks, progress);

    json cmp = {{"command", "ablate"},
                {"version", version_string()},
                {"seed", spec.config.seed},
                {"config", json::parse(dump_run_spec(spec))},
                {"inputs", inputs_digest(spec)}};
    json arr = json::array();
    for (const auto& r : runs) {
        const fs::path dir = out_dir / r.name;
        ensure_dir(dir);
        write_checkpoint(r.result.params, dir / "model.ckpt");
        write_history_csv(r.result.history, dir / "history.csv");
        write_timing_csv(r.result.history, dir / "timing.csv");
        arr.push_back({{"name", r.name},
                       {"boundary", boundary_mode_name(r.config.boundary)},
                       {"soft_boundary_weight", r.config.weights.soft_boundary},
                       {"pool_hash", hex64(r.result.pool_hash)},
                       {"boundary_error", r.boundary_error},
                       {"landmark", r.final_landmark},
                       {"conformality", r.final_conformality},
                       {"soft_boundary", r.final_soft_boundary},
                       {"directory", dir.string()}});
    }
    cmp["runs"] = arr;
    const fs::path p = out_dir / "comparison.json";
    write_text(p, cmp.dump(2) + "\n");
    return p;
}

} // namespace qcmap
