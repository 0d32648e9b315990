#include "qcmap/losses.hpp"

#include <cmath>

#include "qcmap/errors.hpp"

namespace qcmap {

namespace {

void require_nonempty(std::size_t n, const char* what) {
    if (n == 0) throw ContractError(std::string(what) + " needs a nonempty batch");
}

std::shared_ptr<const NetParams> borrow(const NetParams& p) {
    return std::shared_ptr<const NetParams>(std::shared_ptr<const NetParams>(), &p);
}

// dK/dJ for det > 0.
Mat3 dilation_gradient(const Mat3& jac, double det) {
    const double c = std::cbrt(det);
    const double inv23 = 1.0 / (c * c);
    const double fro2 = jac.squaredNorm();
    return (2.0 / 3.0) * inv23 * jac - (2.0 / 9.0) * fro2 * inv23 / det * cofactor3(jac);
}

double bijectivity_penalty(double det, double exponent) {
    if (det > 0.0) return 0.0;
    return std::pow(std::abs(det), exponent);
}

// d penalty / d det on det <= 0.
double bijectivity_slope(double det, double exponent) {
    if (det > 0.0) return 0.0;
    if (det == 0.0) return exponent == 1.0 ? -1.0 : 0.0;
    return -exponent * std::pow(-det, exponent - 1.0);
}

void write_jac_seed(Eigen::MatrixXd& seed, Eigen::Index point, const Mat3& g) {
    seed.block<3, 3>(0, point * 5 + 1) += g;
}

struct BoundaryResiduals {
    double value = 0.0;
    Eigen::MatrixXd seed;  // 3 x N over concatenated face then edge points
};

std::vector<Point3> boundary_points(const SamplePool& pool) {
    std::vector<Point3> pts;
    for (const auto& f : pool.faces) pts.insert(pts.end(), f.points.begin(), f.points.end());
    for (const auto& e : pool.edges) pts.insert(pts.end(), e.points.begin(), e.points.end());
    return pts;
}

BoundaryResiduals boundary_residuals(const NetworkPass& pass, const SamplePool& pool) {
    BoundaryResiduals r;
    r.seed = Eigen::MatrixXd::Zero(3, pass.points());
    Eigen::Index p = 0;
    for (const auto& face : pool.faces) {
        if (face.points.empty()) continue;
        const double inv = 1.0 / static_cast<double>(face.points.size());
        double sum = 0.0;
        for (const auto& q : face.points) {
            const double d = pass.value_at(p)[face.axis] - q[face.axis];
            sum += d * d;
            r.seed(face.axis, p) = 2.0 * d * inv;
            ++p;
        }
        r.value += sum * inv;
    }
    for (const auto& edge : pool.edges) {
        if (edge.points.empty()) continue;
        const double inv = 1.0 / static_cast<double>(edge.points.size());
        double sum = 0.0;
        for (const auto& q : edge.points) {
            const Point3 f = pass.value_at(p);
            for (int a : edge.pinned_axes) {
                const double d = f[a] - q[a];
                sum += d * d;
                r.seed(a, p) = 2.0 * d * inv;
            }
            ++p;
        }
        r.value += sum * inv;
    }
    return r;
}

void check_volumes(const LossData& data) {
    if (data.source == nullptr || data.target == nullptr) {
        throw ConfigError("intensity term requires both source and target volumes");
    }
    if (!data.source->same_domain(*data.target)) {
        throw ConfigError("source and target volumes have different grids");
    }
}

} // namespace

const char* loss_term_name(LossTerm t) {
    switch (t) {
    case LossTerm::conformality: return "conformality";
    case LossTerm::bijectivity: return "bijectivity";
    case LossTerm::smoothness: return "smoothness";
    case LossTerm::volumetric: return "volumetric";
    case LossTerm::landmark: return "landmark";
    case LossTerm::intensity: return "intensity";
    case LossTerm::soft_boundary: return "soft_boundary";
    case LossTerm::total: return "total";
    }
    return "?";
}

const char* formulation_name(Formulation f) {
    switch (f) {
    case Formulation::landmark: return "landmark";
    case Formulation::intensity: return "intensity";
    case Formulation::hybrid: return "hybrid";
    }
    return "?";
}

Formulation parse_formulation(const std::string& name) {
    if (name == "landmark") return Formulation::landmark;
    if (name == "intensity") return Formulation::intensity;
    if (name == "hybrid") return Formulation::hybrid;
    throw ConfigError("unknown formulation '" + name + "' (expected landmark, intensity or hybrid)");
}

void LossWeights::validate() const {
    const std::pair<const char*, double> all[] = {
        {"smoothness", smoothness}, {"bijectivity", bijectivity}, {"conformality", conformality},
        {"volumetric", volumetric}, {"landmark", landmark},       {"intensity", intensity},
        {"soft_boundary", soft_boundary}};
    for (const auto& [name, v] : all) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string("weights.") + name + " must be finite and >= 0");
        }
    }
    if (!(v_bar > 0.0) || !std::isfinite(v_bar)) throw ConfigError("weights.v_bar must be > 0");
    if (!(bijectivity_exponent >= 1.0) || !std::isfinite(bijectivity_exponent)) {
        throw ConfigError("weights.bijectivity_exponent must be >= 1");
    }
}

double LossWeights::coefficient(LossTerm t) const {
    switch (t) {
    case LossTerm::conformality: return conformality;
    case LossTerm::bijectivity: return bijectivity / 2.0;
    case LossTerm::smoothness: return smoothness / 2.0;
    case LossTerm::volumetric: return volumetric / 2.0;
    case LossTerm::landmark: return landmark;
    case LossTerm::intensity: return intensity / 2.0;
    case LossTerm::soft_boundary: return soft_boundary / 2.0;
    case LossTerm::total: return 1.0;
    }
    return 0.0;
}

double LossBreakdown::get(LossTerm t) const {
    switch (t) {
    case LossTerm::conformality: return conformality;
    case LossTerm::bijectivity: return bijectivity;
    case LossTerm::smoothness: return smoothness;
    case LossTerm::volumetric: return volumetric;
    case LossTerm::landmark: return landmark;
    case LossTerm::intensity: return intensity;
    case LossTerm::soft_boundary: return soft_boundary;
    case LossTerm::total: return total;
    }
    return 0.0;
}

void LossBreakdown::set(LossTerm t, double v) {
    switch (t) {
    case LossTerm::conformality: conformality = v; break;
    case LossTerm::bijectivity: bijectivity = v; break;
    case LossTerm::smoothness: smoothness = v; break;
    case LossTerm::volumetric: volumetric = v; break;
    case LossTerm::landmark: landmark = v; break;
    case LossTerm::intensity: intensity = v; break;
    case LossTerm::soft_boundary: soft_boundary = v; break;
    case LossTerm::total: total = v; break;
    }
}

double LossBreakdown::recompose(const LossWeights& w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < index_of(LossTerm::total); ++i) {
        const auto t = static_cast<LossTerm>(i);
        s += w.coefficient(t) * get(t);
    }
    return s;
}

double conformality_K(const Mat3& jac, double det) {
    if (!(det > 0.0)) return kInfiniteDilation;
    const double c = std::cbrt(det);
    return jac.squaredNorm() / (3.0 * c * c);
}

double conformality_loss(std::span<const MapEval> batch) {
    require_nonempty(batch.size(), "conformality_loss");
    double sum = 0.0;
    for (const auto& e : batch) {
        if (e.det > 0.0) sum += conformality_K(e.jac, e.det);
    }
    return sum / static_cast<double>(batch.size());
}

double bijectivity_loss(std::span<const MapEval> batch, double exponent) {
    require_nonempty(batch.size(), "bijectivity_loss");
    double sum = 0.0;
    for (const auto& e : batch) sum += bijectivity_penalty(e.det, exponent);
    return sum / static_cast<double>(batch.size());
}

double smoothness_loss(std::span<const MapEval> batch) {
    require_nonempty(batch.size(), "smoothness_loss");
    double sum = 0.0;
    for (const auto& e : batch) sum += e.lap.squaredNorm();
    return sum / static_cast<double>(batch.size());
}

double volumetric_loss(std::span<const MapEval> batch, double v_bar) {
    require_nonempty(batch.size(), "volumetric_loss");
    double sum = 0.0;
    for (const auto& e : batch) sum += (e.det - v_bar) * (e.det - v_bar);
    return sum / static_cast<double>(batch.size());
}

double landmark_loss(const NetParams& params, const LandmarkSet& landmarks, BoundaryMode mode) {
    require_nonempty(landmarks.size(), "landmark_loss");
    std::vector<Point3> qs;
    qs.reserve(landmarks.size());
    for (const auto& pr : landmarks.pairs) qs.push_back(pr.q);
    NetworkPass pass(borrow(params), std::move(qs), JetOrder::value_only, mode);
    double sum = 0.0;
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        sum += (pass.value_at(static_cast<Eigen::Index>(i)) - landmarks.pairs[i].p).squaredNorm();
    }
    return sum / static_cast<double>(landmarks.size());
}

double target_value(const Volume3& target, const Point3& q) {
    const auto& d = target.dims();
    int idx[3];
    for (int a = 0; a < 3; ++a) {
        const double u = q[a] * d[a] - 0.5;
        const double r = std::round(u);
        if (std::abs(u - r) > 1e-9 || r < 0 || r > d[a] - 1) return sample(target, q);
        idx[a] = static_cast<int>(r);
    }
    return target.at(idx[0], idx[1], idx[2]);
}

double intensity_loss(const NetParams& params, const Volume3& source, const Volume3& target,
                      std::span<const Point3> batch, BoundaryMode mode) {
    require_nonempty(batch.size(), "intensity_loss");
    check_volumes({nullptr, &source, &target});
    NetworkPass pass(borrow(params), std::vector<Point3>(batch.begin(), batch.end()), JetOrder::value_only, mode);
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Point3 f = pass.value_at(static_cast<Eigen::Index>(i)).cwiseMax(0.0).cwiseMin(1.0);
        const double r = sample(source, f) - target_value(target, batch[i]);
        sum += r * r;
    }
    return sum / static_cast<double>(batch.size());
}

double soft_boundary_loss(const NetParams& params, const SamplePool& pool, BoundaryMode mode) {
    if (mode == BoundaryMode::hard) {
        throw ContractError("soft_boundary_loss called with the hard boundary constraint active");
    }
    NetworkPass pass(borrow(params), boundary_points(pool), JetOrder::value_only, mode);
    return boundary_residuals(pass, pool).value;
}

LossEvaluation total_loss(std::shared_ptr<const NetParams> params, const LossWeights& weights,
                          Formulation formulation, BoundaryMode mode, const LossSamples& samples,
                          const LossData& data) {
    weights.validate();
    require_nonempty(samples.interior.size(), "total_loss interior stream");
    const bool want_lm = uses_landmarks(formulation);
    const bool want_int = uses_intensity(formulation);
    const bool want_soft = mode == BoundaryMode::soft;
    if (want_lm && (data.landmarks == nullptr || data.landmarks->empty())) {
        throw ConfigError(std::string(formulation_name(formulation)) + " formulation requires landmarks");
    }
    if (want_int) {
        check_volumes(data);
        require_nonempty(samples.image.size(), "total_loss image stream");
    }
    if (want_soft && samples.boundary == nullptr) throw ConfigError("soft boundary mode requires boundary samples");

    LossEvaluation ev{{}, GradTape(params->param_count())};
    auto& tape = ev.tape;
    auto& br = ev.breakdown;
    auto record = [&](LossTerm t, double v) {
        br.set(t, v);
        tape.set_value(index_of(t), v, loss_term_name(t));
    };

    // Interior stream: conformality, bijectivity, smoothness, volumetric.
    {
        auto pass = std::make_shared<NetworkPass>(params, samples.interior, JetOrder::second, mode);
        const Eigen::Index n = pass->points();
        const double inv = 1.0 / static_cast<double>(n);
        Eigen::MatrixXd s_conf = Eigen::MatrixXd::Zero(3, 5 * n);
        Eigen::MatrixXd s_bij = Eigen::MatrixXd::Zero(3, 5 * n);
        Eigen::MatrixXd s_smooth = Eigen::MatrixXd::Zero(3, 5 * n);
        Eigen::MatrixXd s_vol = Eigen::MatrixXd::Zero(3, 5 * n);
        double conf = 0.0, bij = 0.0, smooth = 0.0, vol = 0.0;
        Eigen::Index positive = 0;
        for (Eigen::Index p = 0; p < n; ++p) {
            const MapEval e = pass->eval_at(p);
            const Mat3 cof = cofactor3(e.jac);
            if (e.det > 0.0) {
                ++positive;
                conf += conformality_K(e.jac, e.det);
                write_jac_seed(s_conf, p, inv * dilation_gradient(e.jac, e.det));
            } else {
                bij += bijectivity_penalty(e.det, weights.bijectivity_exponent);
                write_jac_seed(s_bij, p, inv * bijectivity_slope(e.det, weights.bijectivity_exponent) * cof);
            }
            smooth += e.lap.squaredNorm();
            s_smooth.col(p * 5 + 4) = 2.0 * inv * e.lap;
            const double dv = e.det - weights.v_bar;
            vol += dv * dv;
            write_jac_seed(s_vol, p, 2.0 * inv * dv * cof);
        }
        const std::size_t seg = tape.add_segment(pass);
        record(LossTerm::conformality, conf * inv);
        record(LossTerm::bijectivity, bij * inv);
        record(LossTerm::smoothness, smooth * inv);
        record(LossTerm::volumetric, vol * inv);
        tape.add_seed(index_of(LossTerm::conformality), seg, std::move(s_conf));
        tape.add_seed(index_of(LossTerm::bijectivity), seg, std::move(s_bij));
        tape.add_seed(index_of(LossTerm::smoothness), seg, std::move(s_smooth));
        tape.add_seed(index_of(LossTerm::volumetric), seg, std::move(s_vol));
        br.omega_plus_fraction = static_cast<double>(positive) * inv;
    }

    if (want_lm) {
        const LandmarkSet& lm = *data.landmarks;
        std::vector<Point3> qs;
        qs.reserve(lm.size());
        for (const auto& pr : lm.pairs) qs.push_back(pr.q);
        auto pass = std::make_shared<NetworkPass>(params, std::move(qs), JetOrder::value_only, mode);
        const double inv = 1.0 / static_cast<double>(lm.size());
        Eigen::MatrixXd seed(3, pass->points());
        double sum = 0.0;
        for (Eigen::Index i = 0; i < pass->points(); ++i) {
            const Point3 r = pass->value_at(i) - lm.pairs[static_cast<std::size_t>(i)].p;
            sum += r.squaredNorm();
            seed.col(i) = 2.0 * inv * r;
        }
        const std::size_t seg = tape.add_segment(pass);
        record(LossTerm::landmark, sum * inv);
        tape.add_seed(index_of(LossTerm::landmark), seg, std::move(seed));
    }

    if (want_int) {
        const Volume3& src = *data.source;
        const Volume3& tgt = *data.target;
        auto pass = std::make_shared<NetworkPass>(params, samples.image, JetOrder::value_only, mode);
        const double inv = 1.0 / static_cast<double>(pass->points());
        Eigen::MatrixXd seed(3, pass->points());
        double sum = 0.0;
        for (Eigen::Index i = 0; i < pass->points(); ++i) {
            const Point3 raw = pass->value_at(i);
            const Point3 f = raw.cwiseMax(0.0).cwiseMin(1.0);
            SampleGrad sg = sample_grad(src, f);
            for (int a = 0; a < 3; ++a) {
                if (raw[a] != f[a]) sg.grad[a] = 0.0;
            }
            const double r = sg.value - target_value(tgt, samples.image[static_cast<std::size_t>(i)]);
            sum += r * r;
            seed.col(i) = 2.0 * inv * r * sg.grad;
        }
        const std::size_t seg = tape.add_segment(pass);
        record(LossTerm::intensity, sum * inv);
        tape.add_seed(index_of(LossTerm::intensity), seg, std::move(seed));
    }

    if (want_soft) {
        auto pass = std::make_shared<NetworkPass>(params, boundary_points(*samples.boundary), JetOrder::value_only,
                                                  mode);
        auto res = boundary_residuals(*pass, *samples.boundary);
        const std::size_t seg = tape.add_segment(pass);
        record(LossTerm::soft_boundary, res.value);
        tape.add_seed(index_of(LossTerm::soft_boundary), seg, std::move(res.seed));
    }

    std::vector<std::pair<std::size_t, double>> parts;
    double total = 0.0;
    for (std::size_t i = 0; i < index_of(LossTerm::total); ++i) {
        if (!tape.has_term(i)) continue;
        const auto t = static_cast<LossTerm>(i);
        const double c = weights.coefficient(t);
        parts.emplace_back(i, c);
        total += c * br.get(t);
    }
    record(LossTerm::total, total);
    tape.set_combination(index_of(LossTerm::total), std::move(parts));

    tape.set_replay([params, weights, formulation, mode, samples, data](std::size_t term) {
        auto again = total_loss(params, weights, formulation, mode, samples, data);
        return again.breakdown.get(static_cast<LossTerm>(term));
    });
    return ev;
}

} // namespace qcmap
