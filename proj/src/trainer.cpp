#include "qcmap/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qcmap/errors.hpp"
#include "qcmap/report.hpp"
#include "qcmap/sampling.hpp"

namespace qcmap {

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state, const AdamSettings& opt) {
    if (grad.size() != theta.size() || state.m.size() != theta.size() || state.v.size() != theta.size()) {
        throw DimensionError("adam_step: parameter, gradient and moment lengths differ");
    }
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw NumericError("non-finite gradient entry " + std::to_string(i) + " at optimizer step " +
                               std::to_string(state.t + 1));
        }
    }
    ++state.t;
    state.m = opt.beta1 * state.m + (1.0 - opt.beta1) * grad;
    state.v = opt.beta2 * state.v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        theta[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
}

void TrainConfig::validate_fields() const {
    weights.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
    if (n_int < 1) throw ConfigError("n_int must be >= 1, got " + std::to_string(n_int));
    if (image_batch < 1) throw ConfigError("image_batch must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("adam_betas[0] must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("adam_betas[1] must lie in [0, 1)");
    if (!(adam.eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    if (width < 3) throw ConfigError("network.width must be >= 3");
    if (blocks < 1) throw ConfigError("network.blocks must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

void TrainConfig::validate() const {
    validate_fields();
    if (interior_batch > n_int) {
        throw ConfigError("interior_batch (" + std::to_string(interior_batch) + ") exceeds n_int (" +
                          std::to_string(n_int) + ")");
    }
    if (boundary == BoundaryMode::soft && !(weights.soft_boundary > 0.0)) {
        throw ConfigError("boundary=soft requires weights.soft_boundary > 0");
    }
}

int TrainConfig::steps_per_epoch() const {
    if (interior_batch <= 0) return 1;
    return (n_int + interior_batch - 1) / interior_batch;
}

namespace {

void check_data(const TrainConfig& cfg, const TrainData& data) {
    if (uses_landmarks(cfg.formulation) && (data.landmarks == nullptr || data.landmarks->empty())) {
        throw ConfigError(std::string("data.landmarks is required for the ") + formulation_name(cfg.formulation) +
                          " formulation");
    }
    if (uses_intensity(cfg.formulation)) {
        if (data.source == nullptr) throw ConfigError("data.source is required for intensity matching");
        if (data.target == nullptr) throw ConfigError("data.target is required for intensity matching");
        if (!data.source->same_domain(*data.target)) {
            throw ConfigError("data.source and data.target have different grids");
        }
    }
}

std::string offending_term(const LossEvaluation& ev) {
    std::string names;
    for (std::size_t i = 0; i < index_of(LossTerm::total); ++i) {
        if (!ev.tape.has_term(i)) continue;
        const auto g = ev.tape.backward(i);
        if (!std::isfinite(ev.tape.value(i)) || !g.allFinite()) {
            if (!names.empty()) names += ",";
            names += loss_term_name(static_cast<LossTerm>(i));
        }
    }
    return names.empty() ? "unknown" : names;
}

} // namespace

TrainResult train(const TrainConfig& cfg, const TrainData& data, const EpochCallback& on_epoch) {
    cfg.validate();
    check_data(cfg, data);

    const std::array<int, 3> image_dims = uses_intensity(cfg.formulation) ? data.target->dims()
                                                                          : std::array<int, 3>{0, 0, 0};
    const SamplePool pool = build_pool(cfg.n_int, image_dims, cfg.seed);
    const LossData loss_data{data.landmarks, data.source, data.target};

    TrainResult result;
    result.pool_hash = pool.interior_hash();
    NetParams params = init_params(cfg.width, cfg.blocks, cfg.activation, cfg.seed);
    Eigen::VectorXd theta = params.flatten();
    AdamState adam = AdamState::zeros(theta.size());

    const int steps = cfg.steps_per_epoch();
    const std::size_t interior_bs =
        cfg.interior_batch <= 0 ? pool.interior.size() : static_cast<std::size_t>(cfg.interior_batch);
    const std::size_t image_bs = std::min(static_cast<std::size_t>(cfg.image_batch), pool.image_grid.size());

    auto save = [&](const NetParams& p) {
        if (!cfg.checkpoint_path.empty()) write_checkpoint(p, cfg.checkpoint_path);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        LossBreakdown mean;
        for (int step = 0; step < steps; ++step) {
            LossSamples samples;
            if (interior_bs == pool.interior.size()) {
                samples.interior = pool.interior;
            } else {
                samples.interior = draw_batch(pool, Stream::interior, interior_bs, static_cast<std::uint64_t>(epoch),
                                              static_cast<std::uint64_t>(step));
            }
            if (uses_intensity(cfg.formulation)) {
                samples.image = draw_batch(pool, Stream::image, image_bs, static_cast<std::uint64_t>(epoch),
                                           static_cast<std::uint64_t>(step));
            }
            if (cfg.boundary == BoundaryMode::soft) samples.boundary = &pool;

            auto shared = std::make_shared<const NetParams>(params);
            LossEvaluation ev = total_loss(shared, cfg.weights, cfg.formulation, cfg.boundary, samples, loss_data);
            const std::string where = "epoch " + std::to_string(epoch) + " step " + std::to_string(step);
            if (!std::isfinite(ev.breakdown.total)) {
                throw NumericError("non-finite loss at " + where + " (term: " + offending_term(ev) + ")");
            }
            const Eigen::VectorXd grad = ev.tape.backward(index_of(LossTerm::total));
            if (!grad.allFinite()) {
                throw NumericError("non-finite gradient at " + where + " (term: " + offending_term(ev) + ")");
            }
            adam_step(theta, grad, adam, cfg.adam);
            params.assign(theta);
            ++result.steps;

            for (std::size_t i = 0; i <= index_of(LossTerm::total); ++i) {
                const auto t = static_cast<LossTerm>(i);
                mean.set(t, mean.get(t) + ev.breakdown.get(t));
            }
            mean.omega_plus_fraction += ev.breakdown.omega_plus_fraction;
        }
        const double inv = 1.0 / steps;
        for (std::size_t i = 0; i <= index_of(LossTerm::total); ++i) {
            const auto t = static_cast<LossTerm>(i);
            mean.set(t, mean.get(t) * inv);
        }
        mean.omega_plus_fraction *= inv;

        HistoryRow row;
        row.epoch = epoch;
        row.losses = mean;
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(row);
        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) save(params);
        if (on_epoch) on_epoch(row, params);
    }
    save(params);
    result.params = std::move(params);
    return result;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
    std::string out =
        "epoch,conformality,bijectivity,smoothness,volumetric,landmark,intensity,soft_boundary,total,"
        "omega_plus_fraction\n";
    char line[512];
    for (const auto& r : history) {
        const auto& l = r.losses;
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                      l.conformality, l.bijectivity, l.smoothness, l.volumetric, l.landmark, l.intensity,
                      l.soft_boundary, l.total, l.omega_plus_fraction);
        out += line;
    }
    return out;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open history file for writing: " + path.string());
    out << history_csv(history);
    if (!out) throw IoError("failed writing history file: " + path.string());
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open history file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("epoch,", 0) != 0) {
        throw IoError(path.string() + ": missing history header");
    }
    std::vector<HistoryRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        HistoryRow r;
        auto& l = r.losses;
        const int got = std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.epoch,
                                    &l.conformality, &l.bijectivity, &l.smoothness, &l.volumetric, &l.landmark,
                                    &l.intensity, &l.soft_boundary, &l.total, &l.omega_plus_fraction);
        if (got != 10) throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed history row");
        rows.push_back(r);
    }
    return rows;
}

void write_timing_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open timing file for writing: " + path.string());
    out << "epoch,wall_ms\n";
    char line[64];
    for (const auto& r : history) {
        std::snprintf(line, sizeof line, "%d,%.3f\n", r.epoch, r.wall_ms);
        out << line;
    }
}

std::vector<AblationRun> ablate_boundary(const TrainConfig& base, const LandmarkSet& landmarks,
                                         const std::function<void(const std::string&, const HistoryRow&)>& progress) {
    struct Variant {
        const char* name;
        BoundaryMode mode;
        double weight;
    };
    const Variant variants[] = {
        {"soft_a7_50", BoundaryMode::soft, 50.0},
        {"soft_a7_500", BoundaryMode::soft, 500.0},
        {"hard", BoundaryMode::hard, 0.0},
    };
    std::vector<AblationRun> runs;
    for (const auto& v : variants) {
        AblationRun run;
        run.name = v.name;
        run.config = base;
        run.config.formulation = Formulation::landmark;
        run.config.boundary = v.mode;
        run.config.weights.soft_boundary = v.weight;
        run.config.checkpoint_path.clear();
        EpochCallback cb;
        if (progress) cb = [&](const HistoryRow& row, const NetParams&) { progress(v.name, row); };
        run.result = train(run.config, TrainData{&landmarks, nullptr, nullptr}, cb);
        run.boundary_error = boundary_error(run.result.params, v.mode, kBoundaryErrorSamples, base.seed);
        const auto& last = run.result.history.back().losses;
        run.final_landmark = last.landmark;
        run.final_conformality = last.conformality;
        run.final_soft_boundary = last.soft_boundary;
        runs.push_back(std::move(run));
    }
    return runs;
}

} // namespace qcmap
