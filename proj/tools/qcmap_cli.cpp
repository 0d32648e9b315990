// qcmap command line: synth, train, report, ablate.

#include <cstdio>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "qcmap/qcmap.h"

namespace {

struct Overrides {
    std::string config_path;
    std::string out = "out";
    int epochs = -1;
    long long seed = -1;
    std::string formulation;
    std::string boundary;
    std::string landmarks;
    std::string source;
    std::string target;
    std::vector<std::string> sets;
};

struct Progress {
    int every = 100;
    bool quiet = false;
};

int report_failure(qcmap_status s) {
    std::fprintf(stderr, "qcmap: %s: %s\n", qcmap_status_name(s), qcmap_last_error());
    return static_cast<int>(s);
}

void on_epoch(const char* run, int epoch, double total, double landmark, double intensity, double omega_plus,
              void* user) {
    const auto* p = static_cast<const Progress*>(user);
    if (p->quiet || (epoch + 1) % p->every != 0) return;
    std::fprintf(stderr, "[%s] epoch %d total %.6e landmark %.6e intensity %.6e omega+ %.4f\n", run, epoch + 1, total,
                 landmark, intensity, omega_plus);
}

void add_run_flags(CLI::App* cmd, Overrides& o, Progress& p) {
    cmd->add_option("config", o.config_path, "JSON run config (defaults when omitted)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--epochs", o.epochs, "override epochs");
    cmd->add_option("--seed", o.seed, "override seed");
    cmd->add_option("--formulation", o.formulation, "landmark | intensity | hybrid");
    cmd->add_option("--boundary", o.boundary, "hard | soft");
    cmd->add_option("--landmarks", o.landmarks, "override data.landmarks");
    cmd->add_option("--source", o.source, "override data.source");
    cmd->add_option("--target", o.target, "override data.target");
    cmd->add_option("--set", o.sets, "override any field, e.g. --set weights.landmark=100");
    cmd->add_option("--log-every", p.every, "progress interval in epochs")->check(CLI::PositiveNumber);
    cmd->add_flag("--quiet", p.quiet, "no progress output");
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

qcmap_status build_config(const Overrides& o, qcmap_config** out) {
    qcmap_status s = o.config_path.empty() ? qcmap_config_default(out) : qcmap_config_from_file(o.config_path.c_str(), out);
    if (s != QCMAP_OK) return s;
    std::vector<std::pair<std::string, std::string>> kv;
    if (o.epochs >= 0) kv.emplace_back("epochs", std::to_string(o.epochs));
    if (o.seed >= 0) kv.emplace_back("seed", std::to_string(o.seed));
    if (!o.formulation.empty()) kv.emplace_back("formulation", quoted(o.formulation));
    if (!o.boundary.empty()) kv.emplace_back("boundary", quoted(o.boundary));
    if (!o.landmarks.empty()) kv.emplace_back("data.landmarks", quoted(o.landmarks));
    if (!o.source.empty()) kv.emplace_back("data.source", quoted(o.source));
    if (!o.target.empty()) kv.emplace_back("data.target", quoted(o.target));
    for (const auto& item : o.sets) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            qcmap_config_free(*out);
            *out = nullptr;
            std::fprintf(stderr, "qcmap: --set expects key=value, got '%s'\n", item.c_str());
            return QCMAP_ERR_CONFIG;
        }
        kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    for (const auto& [k, v] : kv) {
        s = qcmap_config_set(*out, k.c_str(), v.c_str());
        if (s != QCMAP_OK) {
            qcmap_config_free(*out);
            *out = nullptr;
            return s;
        }
    }
    return QCMAP_OK;
}

} // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
    // Training allocates and frees multi-megabyte jet caches every step; keep
    // them on the heap instead of round-tripping through mmap.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"qcmap: quasi-conformal diffeomorphic registration with neural maps"};
    app.set_version_flag("--version", qcmap_version());
    app.require_subcommand(1);

    std::string synth_kind;
    std::string synth_out = "out";
    qcmap_synth_options synth_opts;
    qcmap_synth_options_init(&synth_opts);
    auto* synth = app.add_subcommand("synth", "write a synthetic landmark / volume dataset");
    synth->add_option("kind", synth_kind, "twisted | sphere | disk | appendix")
        ->required()
        ->check(CLI::IsMember({"twisted", "sphere", "disk", "appendix"}));
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--n", synth_opts.n, "number of landmark pairs (sphere, disk)")->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", synth_opts.seed, "random seed");
    synth->add_option("--image-dims", synth_opts.image_dims, "volume edge length (appendix)")->check(CLI::Range(2, 1024));
    synth->add_option("--grid-n", synth_opts.grid_n, "landmark lattice size per axis (appendix)")->check(CLI::PositiveNumber);

    Overrides train_o;
    Progress train_p;
    auto* train = app.add_subcommand("train", "train a map from a JSON config");
    add_run_flags(train, train_o, train_p);

    Overrides ablate_o;
    Progress ablate_p;
    auto* ablate = app.add_subcommand("ablate", "soft (a7 = 50, 500) versus hard boundary comparison");
    add_run_flags(ablate, ablate_o, ablate_p);

    std::string ckpt;
    std::string report_out = "report";
    std::vector<std::string> slices;
    std::string warp, history, report_boundary = "hard";
    qcmap_report_options ropt;
    qcmap_report_options_init(&ropt);
    auto* report = app.add_subcommand("report", "diagnostics for a trained checkpoint");
    report->add_option("checkpoint", ckpt, "model checkpoint")->required();
    report->add_option("--out", report_out, "output directory");
    report->add_option("--hist", ropt.hist_samples, "determinant histogram sample count")->check(CLI::NonNegativeNumber);
    report->add_option("--bins", ropt.bins, "histogram bins")->check(CLI::PositiveNumber);
    report->add_option("--slices", slices, "cross sections, e.g. x=0.2,x=0.8")->delimiter(',');
    report->add_option("--grid-n", ropt.grid_n, "lattice size per cross section")->check(CLI::PositiveNumber);
    report->add_option("--warp", warp, "source volume to warp");
    report->add_option("--dims", ropt.warp_dims, "warped volume edge length")->check(CLI::NonNegativeNumber);
    report->add_option("--history", history, "history CSV for the loss table");
    report->add_option("--seed", ropt.seed, "sampling seed");
    report->add_option("--boundary", report_boundary, "hard | soft")->check(CLI::IsMember({"hard", "soft"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(QCMAP_ERR_CONFIG);
    }

    if (synth->parsed()) {
        const qcmap_status s = qcmap_synth(synth_kind.c_str(), synth_out.c_str(), &synth_opts);
        if (s != QCMAP_OK) return report_failure(s);
        std::printf("wrote %s dataset to %s\n", synth_kind.c_str(), synth_out.c_str());
        return 0;
    }

    if (train->parsed() || ablate->parsed()) {
        const bool is_train = train->parsed();
        Overrides& o = is_train ? train_o : ablate_o;
        Progress& p = is_train ? train_p : ablate_p;
        qcmap_config* cfg = nullptr;
        qcmap_status s = build_config(o, &cfg);
        if (s != QCMAP_OK) return report_failure(s);
        s = is_train ? qcmap_train(cfg, o.out.c_str(), on_epoch, &p, nullptr)
                     : qcmap_ablate(cfg, o.out.c_str(), on_epoch, &p);
        qcmap_config_free(cfg);
        if (s != QCMAP_OK) return report_failure(s);
        std::printf("%s finished; outputs in %s\n", is_train ? "training" : "ablation", o.out.c_str());
        return 0;
    }

    std::string slice_list;
    for (const auto& s : slices) slice_list += (slice_list.empty() ? "" : ",") + s;
    ropt.slices = slice_list.c_str();
    ropt.warp_source = warp.empty() ? nullptr : warp.c_str();
    ropt.history = history.empty() ? nullptr : history.c_str();
    ropt.boundary = report_boundary.c_str();
    const qcmap_status s = qcmap_report(ckpt.c_str(), &ropt, report_out.c_str());
    if (s != QCMAP_OK) return report_failure(s);
    std::printf("report written to %s\n", report_out.c_str());
    return 0;
}
