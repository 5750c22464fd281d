#pragma once

#include "morphogen/config.hpp"
#include "morphogen/genome.hpp"
#include "morphogen/loss.hpp"
#include "morphogen/mpm.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace morphogen {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
    void reset(std::size_t index) {
        m[index] = 0.0;
        v[index] = 0.0;
    }
};

/// One bias-corrected Adam update of `params` in place. Throws on a non-finite
/// gradient or a size mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, const AdamParams& hp);

/// Optimized patch parameters, [void x, y, r] x K then [muscle x, y] x C, in
/// workspace widths.
std::vector<double> pack_parameters(const DesignGenome& genome);
void unpack_parameters(std::span<const double> params, DesignGenome& genome);
std::vector<double> pack_gradient(const PatchGradient& grad, const Workspace& ws);

inline constexpr double kMaxRadiusCm = 10.0;

/// Clamps void radii to [0, 10 cm] and refreshes patch activity.
void clamp_genome(DesignGenome& genome);

struct LossBreakdown {
    double total = 0.0;
    double sim = 0.0;
    double rot_moment = 0.0;  // unscaled
    double circle = 0.0;      // unscaled
    double mean_mass = 0.0;

    bool operator==(const LossBreakdown&) const = default;
};

struct AttemptRecord {
    std::uint64_t seed = 0;
    int attempt = 0;  // 1-based
    DesignGenome genome;
    ParticleField field;
    double fitness_cm = 0.0;
    double robot_displacement_cm = 0.0;
    double object_displacement_cm = 0.0;
    LossBreakdown loss;
    std::size_t alive_particles = 0;
    std::vector<Vec2> com_trace_cm;
    std::vector<Vec2> object_trace_cm;
    // erosion bookkeeping, zero when erosion is off or no update followed
    double erosion_augmentation = 0.0;
    double gradient_range = 0.0;
    bool failed = false;
    std::string error;

    bool operator==(const AttemptRecord&) const = default;
};

/// Simulation, loss, and lattice-sized gradients for one rasterized design.
struct DesignEvaluation {
    SceneSpec scene;
    SimTrajectory trajectory;
    PrimaryResult primary;
    std::vector<AuxTerm> aux;
    LossBreakdown loss;
    // lattice-sized d(primary)/d(parameter); zero off the alive set
    std::vector<double> grad_mass;
    std::vector<double> grad_elasticity;
    std::array<std::vector<double>, kChannels> grad_amplitude;
};

DesignEvaluation evaluate_design(const ParticleField& field, const RunConfig& config, const BodyMask& mask,
                                 bool with_gradient);

/// The patch-based design loop: `config.attempts` records, the first being the
/// random initial design. Stops early with a failed record on simulation failure.
std::vector<AttemptRecord> run_attempts(const RunConfig& config, std::uint64_t seed);

/// Direct-particle baseline: per-particle mass and stiffness (both clamped to
/// [threshold, 1]) plus muscle centres, `config.direct_attempts` records.
std::vector<AttemptRecord> run_direct(const RunConfig& config, std::uint64_t seed);

struct GradcheckEntry {
    std::string name;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool excluded = false;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    std::size_t checked = 0;
    double max_rel = 0.0;
    double median_rel = 0.0;
    double p95_rel = 0.0;
    std::vector<std::string> offenders;  // checked entries above `offender_tol`
};

/// Central differences of `f` at `x` against `analytic`. Relative error is
/// |a - f| / max(|a|, |f|, atol) with atol = 1e-6 * max |analytic|.
GradcheckReport compare_gradients(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, std::span<const double> analytic, double h,
                                  std::span<const std::uint8_t> excluded = {}, const std::vector<std::string>& names = {},
                                  double offender_tol = 1e-2);

/// The reduced scene: 16 x 11 lattice at the default spacing (5 x 3.5 cm),
/// 8 voids and 8 muscles, `steps` simulation steps.
RunConfig reduced_config(RunConfig base, int steps);

/// End-to-end check of d(primary loss)/d(patch parameters in cm). Parameters whose
/// influenced particles sit within `margin` of a min-tie, the removal threshold, or
/// the d = 1 kink are excluded.
GradcheckReport gradcheck(const RunConfig& config, std::uint64_t seed, double h = 1e-4, double margin = 1e-3);

}  // namespace morphogen
