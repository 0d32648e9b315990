#include "qcmap/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qcmap/errors.hpp"
#include "qcmap/random.hpp"

namespace qcmap {

namespace {

AffineLayer zero_layer(Eigen::Index out, Eigen::Index in) {
    return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
}

template <typename Fn>
void for_each_layer(NetParams& p, Fn&& fn) {
    fn(p.lift);
    for (auto& b : p.blocks) {
        fn(b.first);
        fn(b.second);
    }
    fn(p.out);
}

template <typename Fn>
void for_each_layer(const NetParams& p, Fn&& fn) {
    fn(p.lift);
    for (const auto& b : p.blocks) {
        fn(b.first);
        fn(b.second);
    }
    fn(p.out);
}

// Non-owning handle for transient single-point passes.
std::shared_ptr<const NetParams> borrow(const NetParams& p) {
    return std::shared_ptr<const NetParams>(std::shared_ptr<const NetParams>(), &p);
}

} // namespace

NetParams NetParams::zeros(int width, int blocks, Activation activation) {
    if (width < 3) throw ConfigError("network width must be >= 3, got " + std::to_string(width));
    if (blocks < 1) throw ConfigError("network needs at least one residual block, got " + std::to_string(blocks));
    NetParams p;
    p.width = width;
    p.activation = activation;
    p.lift = zero_layer(width, 3);
    p.blocks.resize(static_cast<std::size_t>(blocks));
    for (auto& b : p.blocks) {
        b.first = zero_layer(width, width);
        b.second = zero_layer(width, width);
    }
    p.out = zero_layer(3, width);
    return p;
}

Eigen::Index NetParams::param_count() const {
    Eigen::Index n = 0;
    for_each_layer(*this, [&](const AffineLayer& l) { n += l.param_count(); });
    return n;
}

Eigen::VectorXd NetParams::flatten() const {
    Eigen::VectorXd theta(param_count());
    Eigen::Index off = 0;
    for_each_layer(*this, [&](const AffineLayer& l) {
        theta.segment(off, l.weight.size()) = l.weight.reshaped();
        off += l.weight.size();
        theta.segment(off, l.bias.size()) = l.bias;
        off += l.bias.size();
    });
    return theta;
}

void NetParams::assign(const Eigen::VectorXd& theta) {
    if (theta.size() != param_count()) {
        throw DimensionError("parameter vector has " + std::to_string(theta.size()) + " entries, network expects " +
                             std::to_string(param_count()));
    }
    Eigen::Index off = 0;
    for_each_layer(*this, [&](AffineLayer& l) {
        l.weight.reshaped() = theta.segment(off, l.weight.size());
        off += l.weight.size();
        l.bias = theta.segment(off, l.bias.size());
        off += l.bias.size();
    });
}

NetParams init_params(int width, int blocks, Activation activation, std::uint64_t seed) {
    NetParams p = NetParams::zeros(width, blocks, activation);
    Rng rng(seed);
    for_each_layer(p, [&](AffineLayer& l) {
        const double bound = std::sqrt(1.0 / static_cast<double>(l.weight.cols()));
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
            for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = rng.uniform(-bound, bound);
    });
    return p;
}

const char* boundary_mode_name(BoundaryMode m) { return m == BoundaryMode::hard ? "hard" : "soft"; }

BoundaryMode parse_boundary_mode(const std::string& name) {
    if (name == "hard") return BoundaryMode::hard;
    if (name == "soft") return BoundaryMode::soft;
    throw ConfigError("unknown boundary mode '" + name + "' (expected hard or soft)");
}

MapEval map_eval_from_jet(const Jet3& jet) {
    MapEval e;
    e.f = jet.value;
    e.jac = jet.jac;
    e.lap = jet.lap;
    e.det = det3(e.jac);
    return e;
}

Jet3 raw_forward(const NetParams& params, const Point3& x) {
    NetworkPass pass(borrow(params), {x}, JetOrder::second, BoundaryMode::soft);
    return jet_at(pass.output(), 0);
}

MapEval forward(const NetParams& params, const Point3& x, BoundaryMode mode) {
    NetworkPass pass(borrow(params), {x}, JetOrder::second, mode);
    return pass.eval_at(0);
}

Point3 map_point(const NetParams& params, const Point3& x, BoundaryMode mode) {
    NetworkPass pass(borrow(params), {x}, JetOrder::value_only, mode);
    return pass.value_at(0);
}

NetworkPass::NetworkPass(std::shared_ptr<const NetParams> params, std::vector<Point3> xs, JetOrder order,
                         BoundaryMode mode)
    : params_(std::move(params)), xs_(std::move(xs)), order_(order), mode_(mode) {
    const NetParams& p = *params_;
    const std::size_t nb = p.blocks.size();
    input_ = seed_batch(xs_, order_);
    trunk_.resize(nb + 1);
    pre1_.resize(nb);
    act1_.resize(nb);
    pre2_.resize(nb);

    affine_forward(p.lift.weight, p.lift.bias, input_, trunk_[0]);
    JetBatch act2;
    for (std::size_t b = 0; b < nb; ++b) {
        affine_forward(p.blocks[b].first.weight, p.blocks[b].first.bias, trunk_[b], pre1_[b]);
        activation_forward(p.activation, pre1_[b], act1_[b]);
        affine_forward(p.blocks[b].second.weight, p.blocks[b].second.bias, act1_[b], pre2_[b]);
        activation_forward(p.activation, pre2_[b], act2);
        trunk_[b + 1].order = order_;
        trunk_[b + 1].data = trunk_[b].data + act2.data;
    }
    affine_forward(p.out.weight, p.out.bias, trunk_[nb], raw_);
    if (mode_ == BoundaryMode::hard) {
        boundary_forward(raw_, xs_, output_);
    } else {
        output_ = raw_;
    }
}

Point3 NetworkPass::value_at(Eigen::Index p) const { return output_.data.col(p * output_.stride()); }

MapEval NetworkPass::eval_at(Eigen::Index p) const { return map_eval_from_jet(jet_at(output_, p)); }

void NetworkPass::accumulate(const Eigen::MatrixXd& seed, Eigen::Ref<Eigen::VectorXd> grad) const {
    const NetParams& p = *params_;
    const std::size_t nb = p.blocks.size();

    // Gradient slices in flattening order.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> offsets;  // (weight offset, bias offset)
    Eigen::Index off = 0;
    for_each_layer(p, [&](const AffineLayer& l) {
        offsets.emplace_back(off, off + l.weight.size());
        off += l.param_count();
    });
    auto wslice = [&](std::size_t layer, const AffineLayer& l) {
        return Eigen::Map<Eigen::MatrixXd>(grad.data() + offsets[layer].first, l.weight.rows(), l.weight.cols());
    };
    auto bslice = [&](std::size_t layer, const AffineLayer& l) {
        return Eigen::Map<Eigen::VectorXd>(grad.data() + offsets[layer].second, l.bias.size());
    };

    Eigen::MatrixXd draw;
    if (mode_ == BoundaryMode::hard) {
        boundary_backward(raw_, xs_, seed, draw);
    } else {
        draw = seed;
    }

    const std::size_t out_layer = 1 + 2 * nb;
    Eigen::MatrixXd dtrunk;
    {
        auto gw = wslice(out_layer, p.out);
        auto gb = bslice(out_layer, p.out);
        affine_backward(p.out.weight, trunk_[nb], draw, gw, gb, &dtrunk);
    }

    Eigen::MatrixXd dpre2, dact1, dpre1, dskip;
    for (std::size_t b = nb; b-- > 0;) {
        const auto& blk = p.blocks[b];
        const std::size_t l1 = 1 + 2 * b;
        const std::size_t l2 = l1 + 1;
        auto gw2 = wslice(l2, blk.second);
        auto gb2 = bslice(l2, blk.second);
        auto gw1 = wslice(l1, blk.first);
        auto gb1 = bslice(l1, blk.first);
        activation_backward(p.activation, pre2_[b], dtrunk, dpre2);
        affine_backward(blk.second.weight, act1_[b], dpre2, gw2, gb2, &dact1);
        activation_backward(p.activation, pre1_[b], dact1, dpre1);
        affine_backward(blk.first.weight, trunk_[b], dpre1, gw1, gb1, &dskip);
        dtrunk += dskip;
    }
    auto gw = wslice(0, p.lift);
    auto gb = bslice(0, p.lift);
    affine_backward(p.lift.weight, input_, dtrunk, gw, gb, nullptr);
}

void write_checkpoint(const NetParams& params, const std::filesystem::path& path) {
    nlohmann::json header = {{"width", params.width},
                             {"blocks", params.block_count()},
                             {"activation", activation_name(params.activation)},
                             {"param_count", params.param_count()}};
    const Eigen::VectorXd theta = params.flatten();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out << header.dump() << '\n';
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(theta[i]);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

NetParams read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError("checkpoint is empty: " + path.string());
    const auto payload_offset = static_cast<std::size_t>(line.size() + 1);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("malformed checkpoint header at byte 0: " + std::string(e.what()));
    }
    int width = 0, blocks = 0;
    Eigen::Index count = 0;
    std::string act;
    try {
        width = header.at("width").get<int>();
        blocks = header.at("blocks").get<int>();
        act = header.at("activation").get<std::string>();
        count = header.at("param_count").get<Eigen::Index>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("checkpoint header missing field: " + std::string(e.what()));
    }
    NetParams params = NetParams::zeros(width, blocks, parse_activation(act));
    if (params.param_count() != count) {
        throw CheckpointError("checkpoint param_count " + std::to_string(count) + " does not match architecture (" +
                              std::to_string(params.param_count()) + ")");
    }
    Eigen::VectorXd theta(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
            throw CheckpointError("checkpoint payload truncated at byte " +
                                  std::to_string(payload_offset + static_cast<std::size_t>(i) * 8));
        }
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        theta[i] = std::bit_cast<double>(bits);
        if (!std::isfinite(theta[i])) {
            throw CheckpointError("non-finite parameter at byte " +
                                  std::to_string(payload_offset + static_cast<std::size_t>(i) * 8));
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw CheckpointError("checkpoint has trailing bytes after " + std::to_string(count) + " parameters");
    }
    params.assign(theta);
    return params;
}

} // namespace qcmap
