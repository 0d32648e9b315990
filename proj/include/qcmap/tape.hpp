#pragma once

// Reverse accumulation record for scalar losses over the network parameters.
//
// A tape holds a list of segments (cached forward passes of the network over a
// point stream) and, for every recorded scalar term, the adjoint of that term
// with respect to each segment's output. backward() seeds a term, replays the
// per-layer adjoints of every segment that term touches, and returns dL/dtheta
// in NetParams flattening order. Composite terms (weighted sums of other terms)
// are resolved by summing seeds before a single reverse pass per segment.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qcmap {

class TapeSegment {
public:
    virtual ~TapeSegment() = default;
    // grad += (d segment output / d theta)^T seed
    virtual void accumulate(const Eigen::MatrixXd& seed, Eigen::Ref<Eigen::VectorXd> grad) const = 0;
    virtual Eigen::Index output_rows() const = 0;
    virtual Eigen::Index output_cols() const = 0;
};

class GradTape {
public:
    explicit GradTape(Eigen::Index param_count) : param_count_(param_count) {}

    Eigen::Index param_count() const { return param_count_; }

    std::size_t add_segment(std::shared_ptr<const TapeSegment> segment);
    std::size_t segment_count() const { return segments_.size(); }

    void set_value(std::size_t term, double value, std::string name = {});
    void add_seed(std::size_t term, std::size_t segment, Eigen::MatrixXd seed);
    void add_direct(std::size_t term, const Eigen::VectorXd& dtheta);
    void set_combination(std::size_t term, std::vector<std::pair<std::size_t, double>> parts);

    bool has_term(std::size_t term) const { return terms_.count(term) != 0; }
    double value(std::size_t term) const;
    const std::string& name(std::size_t term) const;

    Eigen::VectorXd backward(std::size_t term) const;

    void set_replay(std::function<double(std::size_t)> replay) { replay_ = std::move(replay); }
    // Re-evaluates the recorded computation from its stored inputs.
    double replay(std::size_t term) const;

private:
    struct Term {
        double value = 0.0;
        std::string name;
        std::map<std::size_t, Eigen::MatrixXd> seeds;
        std::optional<Eigen::VectorXd> direct;
        std::vector<std::pair<std::size_t, double>> parts;
    };

    const Term& term(std::size_t t) const;
    void collect(std::size_t t, double scale, std::map<std::size_t, Eigen::MatrixXd>& seeds, Eigen::VectorXd& direct,
                 int depth) const;

    Eigen::Index param_count_;
    std::vector<std::shared_ptr<const TapeSegment>> segments_;
    std::map<std::size_t, Term> terms_;
    std::function<double(std::size_t)> replay_;
};

// Tape for sum(theta^2); used to check the accumulation plumbing in isolation.
GradTape record_squared_norm(const Eigen::VectorXd& theta, std::size_t term = 0);

} // namespace qcmap
