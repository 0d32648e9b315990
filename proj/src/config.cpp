#include "qcmap/config.hpp"

#include <set>

#include <json.hpp>

#include "qcmap/errors.hpp"

namespace qcmap {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& prefix) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) throw ConfigError("unknown config field '" + prefix + key + "'");
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& prefix) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + prefix + key + "' has the wrong type");
    }
}

const json& object_at(const json& obj, const char* key, const std::string& prefix) {
    static const json empty = json::object();
    auto it = obj.find(key);
    if (it == obj.end()) return empty;
    if (!it->is_object()) throw ConfigError("config field '" + prefix + key + "' must be an object");
    return *it;
}

} // namespace

RunSpec parse_run_spec(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];

    reject_unknown(doc,
                   {"formulation", "boundary", "epochs", "n_int", "interior_batch", "image_batch", "lr",
                    "adam_betas", "adam_eps", "seed", "checkpoint_every", "network", "weights", "data"},
                   "");

    RunSpec spec;
    TrainConfig& c = spec.config;

    std::string formulation = formulation_name(c.formulation);
    std::string boundary = boundary_mode_name(c.boundary);
    read_field(doc, "formulation", formulation, "");
    read_field(doc, "boundary", boundary, "");
    c.formulation = parse_formulation(formulation);
    c.boundary = parse_boundary_mode(boundary);

    read_field(doc, "epochs", c.epochs, "");
    read_field(doc, "n_int", c.n_int, "");
    read_field(doc, "interior_batch", c.interior_batch, "");
    read_field(doc, "image_batch", c.image_batch, "");
    read_field(doc, "lr", c.adam.lr, "");
    read_field(doc, "adam_eps", c.adam.eps, "");
    read_field(doc, "seed", c.seed, "");
    read_field(doc, "checkpoint_every", c.checkpoint_every, "");
    if (doc.contains("adam_betas")) {
        std::vector<double> betas;
        read_field(doc, "adam_betas", betas, "");
        if (betas.size() != 2) throw ConfigError("config field 'adam_betas' must hold two numbers");
        c.adam.beta1 = betas[0];
        c.adam.beta2 = betas[1];
    }

    const json& net = object_at(doc, "network", "");
    reject_unknown(net, {"width", "blocks", "activation"}, "network.");
    read_field(net, "width", c.width, "network.");
    read_field(net, "blocks", c.blocks, "network.");
    std::string act = activation_name(c.activation);
    read_field(net, "activation", act, "network.");
    c.activation = parse_activation(act);

    const json& w = object_at(doc, "weights", "");
    reject_unknown(w,
                   {"smoothness", "bijectivity", "conformality", "volumetric", "landmark", "intensity",
                    "soft_boundary", "v_bar", "bijectivity_exponent"},
                   "weights.");
    read_field(w, "smoothness", c.weights.smoothness, "weights.");
    read_field(w, "bijectivity", c.weights.bijectivity, "weights.");
    read_field(w, "conformality", c.weights.conformality, "weights.");
    read_field(w, "volumetric", c.weights.volumetric, "weights.");
    read_field(w, "landmark", c.weights.landmark, "weights.");
    read_field(w, "intensity", c.weights.intensity, "weights.");
    read_field(w, "soft_boundary", c.weights.soft_boundary, "weights.");
    read_field(w, "v_bar", c.weights.v_bar, "weights.");
    read_field(w, "bijectivity_exponent", c.weights.bijectivity_exponent, "weights.");

    const json& data = object_at(doc, "data", "");
    reject_unknown(data, {"landmarks", "source", "target"}, "data.");
    read_field(data, "landmarks", spec.landmarks, "data.");
    read_field(data, "source", spec.source, "data.");
    read_field(data, "target", spec.target, "data.");
    c.validate_fields();
    return spec;
}

std::string dump_run_spec(const RunSpec& spec, int indent) {
    const TrainConfig& c = spec.config;
    json doc = {
        {"formulation", formulation_name(c.formulation)},
        {"boundary", boundary_mode_name(c.boundary)},
        {"epochs", c.epochs},
        {"n_int", c.n_int},
        {"interior_batch", c.interior_batch},
        {"image_batch", c.image_batch},
        {"lr", c.adam.lr},
        {"adam_betas", {c.adam.beta1, c.adam.beta2}},
        {"adam_eps", c.adam.eps},
        {"seed", c.seed},
        {"checkpoint_every", c.checkpoint_every},
        {"network", {{"width", c.width}, {"blocks", c.blocks}, {"activation", activation_name(c.activation)}}},
        {"weights",
         {{"smoothness", c.weights.smoothness},
          {"bijectivity", c.weights.bijectivity},
          {"conformality", c.weights.conformality},
          {"volumetric", c.weights.volumetric},
          {"landmark", c.weights.landmark},
          {"intensity", c.weights.intensity},
          {"soft_boundary", c.weights.soft_boundary},
          {"v_bar", c.weights.v_bar},
          {"bijectivity_exponent", c.weights.bijectivity_exponent}}},
        {"data", {{"landmarks", spec.landmarks}, {"source", spec.source}, {"target", spec.target}}},
    };
    return doc.dump(indent);
}

} // namespace qcmap
