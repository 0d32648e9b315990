#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qcmap/network.hpp"
#include "qcmap/sampling.hpp"
#include "qcmap/synth.hpp"
#include "qcmap/tape.hpp"
#include "qcmap/volume.hpp"

namespace qcmap {

enum class LossTerm : std::size_t {
    conformality = 0,
    bijectivity,
    smoothness,
    volumetric,
    landmark,
    intensity,
    soft_boundary,
    total,
};

inline constexpr std::size_t kLossTermCount = 8;

inline constexpr std::size_t index_of(LossTerm t) { return static_cast<std::size_t>(t); }
const char* loss_term_name(LossTerm t);

enum class Formulation { landmark, intensity, hybrid };

const char* formulation_name(Formulation f);
Formulation parse_formulation(const std::string& name);
inline bool uses_landmarks(Formulation f) { return f != Formulation::intensity; }
inline bool uses_intensity(Formulation f) { return f != Formulation::landmark; }

// Weights follow the regularizer ordering: smoothness (a1), bijectivity (a2),
// conformality (a3), volumetric (a4), landmark (a5), intensity (a6) and the
// soft boundary penalty (a7).
struct LossWeights {
    double smoothness = 0.01;
    double bijectivity = 50.0;
    double conformality = 1.0;
    double volumetric = 0.0;
    double landmark = 500.0;
    double intensity = 500.0;
    double soft_boundary = 0.0;
    double v_bar = 1.0;
    double bijectivity_exponent = 2.0;

    void validate() const;
    // Coefficient multiplying each term in the total objective.
    double coefficient(LossTerm t) const;
};

struct LossBreakdown {
    double conformality = 0.0;
    double bijectivity = 0.0;
    double smoothness = 0.0;
    double volumetric = 0.0;
    double landmark = 0.0;
    double intensity = 0.0;
    double soft_boundary = 0.0;
    double total = 0.0;
    double omega_plus_fraction = 0.0;

    double get(LossTerm t) const;
    void set(LossTerm t, double v);
    // Weighted sum of the component terms.
    double recompose(const LossWeights& w) const;
};

inline constexpr double kInfiniteDilation = std::numeric_limits<double>::infinity();

// (1/3) |J|_F^2 / det^(2/3) for det > 0, infinity otherwise.
double conformality_K(const Mat3& jac, double det);

double conformality_loss(std::span<const MapEval> batch);
double bijectivity_loss(std::span<const MapEval> batch, double exponent = 2.0);
double smoothness_loss(std::span<const MapEval> batch);
double volumetric_loss(std::span<const MapEval> batch, double v_bar);

double landmark_loss(const NetParams& params, const LandmarkSet& landmarks, BoundaryMode mode = BoundaryMode::hard);
double intensity_loss(const NetParams& params, const Volume3& source, const Volume3& target,
                      std::span<const Point3> batch, BoundaryMode mode = BoundaryMode::hard);
double soft_boundary_loss(const NetParams& params, const SamplePool& pool, BoundaryMode mode);

// Value of the target at q, read directly when q is a voxel center.
double target_value(const Volume3& target, const Point3& q);

struct LossData {
    const LandmarkSet* landmarks = nullptr;
    const Volume3* source = nullptr;
    const Volume3* target = nullptr;
};

struct LossSamples {
    std::vector<Point3> interior;
    std::vector<Point3> image;
    const SamplePool* boundary = nullptr;  // faces/edges, soft mode only
};

struct LossEvaluation {
    LossBreakdown breakdown;
    GradTape tape;
};

// Records every active term and the weighted total on a tape; term indices on
// the tape are index_of(LossTerm).
LossEvaluation total_loss(std::shared_ptr<const NetParams> params, const LossWeights& weights,
                          Formulation formulation, BoundaryMode mode, const LossSamples& samples,
                          const LossData& data);

} // namespace qcmap
