#include "qcmap/tape.hpp"

#include "qcmap/errors.hpp"

namespace qcmap {

std::size_t GradTape::add_segment(std::shared_ptr<const TapeSegment> segment) {
    segments_.push_back(std::move(segment));
    return segments_.size() - 1;
}

void GradTape::set_value(std::size_t t, double value, std::string name) {
    auto& rec = terms_[t];
    rec.value = value;
    if (!name.empty()) rec.name = std::move(name);
}

void GradTape::add_seed(std::size_t t, std::size_t segment, Eigen::MatrixXd seed) {
    if (segment >= segments_.size()) throw ContractError("seed refers to an unknown tape segment");
    const auto& seg = *segments_[segment];
    if (seed.rows() != seg.output_rows() || seed.cols() != seg.output_cols()) {
        throw DimensionError("seed shape does not match segment output");
    }
    auto& rec = terms_[t];
    auto it = rec.seeds.find(segment);
    if (it == rec.seeds.end()) {
        rec.seeds.emplace(segment, std::move(seed));
    } else {
        it->second += seed;
    }
}

void GradTape::add_direct(std::size_t t, const Eigen::VectorXd& dtheta) {
    if (dtheta.size() != param_count_) throw DimensionError("direct gradient has wrong length");
    auto& rec = terms_[t];
    if (rec.direct) {
        *rec.direct += dtheta;
    } else {
        rec.direct = dtheta;
    }
}

void GradTape::set_combination(std::size_t t, std::vector<std::pair<std::size_t, double>> parts) {
    auto& rec = terms_[t];
    if (!rec.seeds.empty() || rec.direct) throw ContractError("a combination term cannot also carry seeds");
    rec.parts = std::move(parts);
}

const GradTape::Term& GradTape::term(std::size_t t) const {
    auto it = terms_.find(t);
    if (it == terms_.end()) {
        throw ContractError("tape has no scalar loss recorded at index " + std::to_string(t));
    }
    return it->second;
}

double GradTape::value(std::size_t t) const { return term(t).value; }

const std::string& GradTape::name(std::size_t t) const { return term(t).name; }

void GradTape::collect(std::size_t t, double scale, std::map<std::size_t, Eigen::MatrixXd>& seeds,
                       Eigen::VectorXd& direct, int depth) const {
    if (depth > 8) throw ContractError("tape combination terms nest too deeply");
    const Term& rec = term(t);
    for (const auto& [part, c] : rec.parts) {
        if (c != 0.0) collect(part, scale * c, seeds, direct, depth + 1);
    }
    for (const auto& [seg, s] : rec.seeds) {
        auto it = seeds.find(seg);
        if (it == seeds.end()) {
            seeds.emplace(seg, scale * s);
        } else {
            it->second += scale * s;
        }
    }
    if (rec.direct) direct += scale * *rec.direct;
}

Eigen::VectorXd GradTape::backward(std::size_t t) const {
    std::map<std::size_t, Eigen::MatrixXd> seeds;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count_);
    collect(t, 1.0, seeds, grad, 0);
    for (const auto& [seg, s] : seeds) segments_[seg]->accumulate(s, grad);
    return grad;
}

double GradTape::replay(std::size_t t) const {
    term(t);
    if (!replay_) throw ContractError("tape was recorded without a replay function");
    return replay_(t);
}

GradTape record_squared_norm(const Eigen::VectorXd& theta, std::size_t t) {
    GradTape tape(theta.size());
    tape.set_value(t, theta.squaredNorm(), "squared_norm");
    tape.add_direct(t, 2.0 * theta);
    tape.set_replay([theta](std::size_t) { return theta.squaredNorm(); });
    return tape;
}

} // namespace qcmap
