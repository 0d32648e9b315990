#include "qcmap/qcmap.h"

#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qcmap/config.hpp"
#include "qcmap/errors.hpp"
#include "qcmap/pipeline.hpp"
#include "qcmap/report.hpp"

struct qcmap_config {
    qcmap::RunSpec spec;
};

struct qcmap_model {
    qcmap::NetParams params;
};

namespace {

thread_local std::string g_last_error;

qcmap_status fail(qcmap_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

template <typename F>
qcmap_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return QCMAP_OK;
    } catch (const qcmap::Error& e) {
        return fail(static_cast<qcmap_status>(static_cast<int>(e.kind())), e.what());
    } catch (const std::bad_alloc&) {
        return fail(QCMAP_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(QCMAP_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(QCMAP_ERR_INTERNAL, "unknown failure");
    }
}

void require(const void* p, const char* what) {
    if (!p) throw qcmap::ContractError(std::string(what) + " must not be null");
}

qcmap::ProgressFn wrap_progress(qcmap_progress_fn fn, void* user) {
    if (!fn) return {};
    return [fn, user](const std::string& run, const qcmap::HistoryRow& row) {
        const auto& l = row.losses;
        fn(run.c_str(), row.epoch, l.total, l.landmark, l.intensity, l.omega_plus_fraction, user);
    };
}

std::vector<std::string> split_commas(const char* text) {
    std::vector<std::string> out;
    if (!text) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

extern "C" {

const char* qcmap_version(void) { return qcmap::version_string(); }

const char* qcmap_last_error(void) { return g_last_error.c_str(); }

const char* qcmap_status_name(qcmap_status status) {
    switch (status) {
    case QCMAP_OK: return "ok";
    case QCMAP_ERR_CONFIG: return "config error";
    case QCMAP_ERR_NUMERIC: return "numeric error";
    case QCMAP_ERR_IO: return "i/o error";
    case QCMAP_ERR_CONTRACT: return "contract error";
    case QCMAP_ERR_DIMENSION: return "dimension error";
    case QCMAP_ERR_CHECKPOINT: return "checkpoint error";
    case QCMAP_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

qcmap_status qcmap_config_default(qcmap_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new qcmap_config{};
    });
}

qcmap_status qcmap_config_from_json(const char* json_text, qcmap_config** out) {
    return guarded([&] {
        require(json_text, "json_text");
        require(out, "out");
        auto spec = qcmap::parse_run_spec(json_text);
        *out = new qcmap_config{std::move(spec)};
    });
}

qcmap_status qcmap_config_from_file(const char* path, qcmap_config** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw qcmap::IoError(std::string("cannot read config ") + path);
        std::stringstream ss;
        ss << in.rdbuf();
        auto spec = qcmap::parse_run_spec(ss.str());
        *out = new qcmap_config{std::move(spec)};
    });
}

qcmap_status qcmap_config_set(qcmap_config* config, const char* key, const char* value) {
    return guarded([&] {
        require(config, "config");
        require(key, "key");
        require(value, "value");
        using nlohmann::json;
        json doc = json::parse(qcmap::dump_run_spec(config->spec));
        json v;
        try {
            v = json::parse(value);
        } catch (const json::parse_error&) {
            v = std::string(value);
        }
        json* node = &doc;
        std::string k = key;
        std::size_t pos;
        while ((pos = k.find('.')) != std::string::npos) {
            node = &(*node)[k.substr(0, pos)];
            if (!node->is_object()) throw qcmap::ConfigError(std::string("config field '") + key + "' is not nested");
            k = k.substr(pos + 1);
        }
        (*node)[k] = v;
        config->spec = qcmap::parse_run_spec(doc.dump());
    });
}

qcmap_status qcmap_config_to_json(const qcmap_config* config, char* buf, size_t capacity, size_t* needed) {
    return guarded([&] {
        require(config, "config");
        const std::string text = qcmap::dump_run_spec(config->spec);
        if (needed) *needed = text.size() + 1;
        if (buf && capacity > 0) {
            const std::size_t n = std::min(capacity - 1, text.size());
            std::memcpy(buf, text.data(), n);
            buf[n] = '\0';
        }
    });
}

void qcmap_config_free(qcmap_config* config) { delete config; }

qcmap_status qcmap_model_create(int width, int blocks, const char* activation, uint64_t seed, qcmap_model** out) {
    return guarded([&] {
        require(out, "out");
        if (width < 1 || blocks < 0) throw qcmap::ConfigError("width must be >= 1 and blocks >= 0");
        const auto act = qcmap::parse_activation(activation ? activation : "tanh");
        *out = new qcmap_model{qcmap::init_params(width, blocks, act, seed)};
    });
}

qcmap_status qcmap_model_load(const char* path, qcmap_model** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new qcmap_model{qcmap::read_checkpoint(path)};
    });
}

qcmap_status qcmap_model_save(const qcmap_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        qcmap::write_checkpoint(model->params, path);
    });
}

qcmap_status qcmap_model_param_count(const qcmap_model* model, size_t* out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = static_cast<size_t>(model->params.param_count());
    });
}

qcmap_status qcmap_model_get_params(const qcmap_model* model, double* out, size_t count) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        const Eigen::VectorXd theta = model->params.flatten();
        if (count != static_cast<size_t>(theta.size())) {
            throw qcmap::DimensionError("expected " + std::to_string(theta.size()) + " parameters, got " +
                                        std::to_string(count));
        }
        std::memcpy(out, theta.data(), count * sizeof(double));
    });
}

qcmap_status qcmap_model_set_params(qcmap_model* model, const double* values, size_t count) {
    return guarded([&] {
        require(model, "model");
        require(values, "values");
        const auto expected = static_cast<size_t>(model->params.param_count());
        if (count != expected) {
            throw qcmap::DimensionError("expected " + std::to_string(expected) + " parameters, got " +
                                        std::to_string(count));
        }
        model->params.assign(Eigen::Map<const Eigen::VectorXd>(values, static_cast<Eigen::Index>(count)));
    });
}

qcmap_status qcmap_model_map(const qcmap_model* model, const char* boundary, const double* points, size_t n,
                             double* out_points, double* out_det) {
    return guarded([&] {
        require(model, "model");
        if (n > 0) require(points, "points");
        const auto mode = qcmap::parse_boundary_mode(boundary ? boundary : "hard");
        std::vector<qcmap::Point3> xs(n);
        for (size_t i = 0; i < n; ++i) xs[i] = {points[3 * i], points[3 * i + 1], points[3 * i + 2]};
        const auto evals = qcmap::map_evals(model->params, xs, mode);
        for (size_t i = 0; i < n; ++i) {
            if (out_points) {
                for (int a = 0; a < 3; ++a) out_points[3 * i + a] = evals[i].f[a];
            }
            if (out_det) out_det[i] = evals[i].det;
        }
    });
}

void qcmap_model_free(qcmap_model* model) { delete model; }

void qcmap_synth_options_init(qcmap_synth_options* options) {
    if (!options) return;
    const qcmap::SynthOptions d;
    options->n = d.n;
    options->seed = d.seed;
    options->image_dims = d.image_dims;
    options->grid_n = d.grid_n;
}

void qcmap_report_options_init(qcmap_report_options* options) {
    if (!options) return;
    const qcmap::ReportOptions d;
    options->hist_samples = d.hist_samples;
    options->bins = d.bins;
    options->slices = nullptr;
    options->grid_n = d.grid_n;
    options->warp_source = nullptr;
    options->warp_dims = d.warp_dims;
    options->history = nullptr;
    options->seed = d.seed;
    options->boundary = "hard";
}

qcmap_status qcmap_synth(const char* kind, const char* out_dir, const qcmap_synth_options* options) {
    return guarded([&] {
        require(kind, "kind");
        require(out_dir, "out_dir");
        qcmap::SynthOptions o;
        if (options) {
            o.n = options->n;
            o.seed = options->seed;
            o.image_dims = options->image_dims;
            o.grid_n = options->grid_n;
        }
        if (o.n < 0) throw qcmap::ConfigError("n must be >= 0");
        if (o.image_dims < 2) throw qcmap::ConfigError("image_dims must be >= 2");
        if (o.grid_n < 1) throw qcmap::ConfigError("grid_n must be >= 1");
        qcmap::run_synth(kind, out_dir, o);
    });
}

qcmap_status qcmap_train(const qcmap_config* config, const char* out_dir, qcmap_progress_fn progress, void* user,
                         qcmap_model** out_model) {
    return guarded([&] {
        require(config, "config");
        require(out_dir, "out_dir");
        auto out = qcmap::run_train(config->spec, out_dir, wrap_progress(progress, user));
        if (out_model) *out_model = new qcmap_model{std::move(out.result.params)};
    });
}

qcmap_status qcmap_report(const char* checkpoint, const qcmap_report_options* options, const char* out_dir) {
    return guarded([&] {
        require(checkpoint, "checkpoint");
        require(out_dir, "out_dir");
        qcmap::ReportOptions o;
        if (options) {
            o.hist_samples = options->hist_samples;
            o.bins = options->bins;
            o.slices = split_commas(options->slices);
            o.grid_n = options->grid_n;
            if (options->warp_source) o.warp_source = options->warp_source;
            o.warp_dims = options->warp_dims;
            if (options->history) o.history = options->history;
            o.seed = options->seed;
            o.boundary = qcmap::parse_boundary_mode(options->boundary ? options->boundary : "hard");
        }
        if (o.hist_samples < 0) throw qcmap::ConfigError("hist_samples must be >= 0");
        if (o.bins < 1) throw qcmap::ConfigError("bins must be >= 1");
        if (o.grid_n < 1) throw qcmap::ConfigError("grid_n must be >= 1");
        qcmap::run_report(checkpoint, o, out_dir);
    });
}

qcmap_status qcmap_ablate(const qcmap_config* config, const char* out_dir, qcmap_progress_fn progress, void* user) {
    return guarded([&] {
        require(config, "config");
        require(out_dir, "out_dir");
        qcmap::run_ablate(config->spec, out_dir, wrap_progress(progress, user));
    });
}

} // extern "C"
