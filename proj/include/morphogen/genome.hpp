#pragma once

#include "morphogen/mask.hpp"
#include "morphogen/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace morphogen {

enum class Channel : std::uint8_t { Sine = 0, Cosine = 1 };
inline constexpr int kChannels = 2;

std::string to_string(Channel c);
Channel channel_from_string(const std::string& s);

struct VoidPatch {
    Vec2 center{0.0, 0.0};
    double radius = 0.0;
    bool active = true;
    bool operator==(const VoidPatch&) const = default;
};

struct MusclePatch {
    Vec2 center{0.0, 0.0};
    double radius = 0.0;
    Channel channel = Channel::Sine;
    bool active = true;
    bool operator==(const MusclePatch&) const = default;
};

struct DesignGenome {
    Workspace workspace;
    BodyMask body_mask;
    std::vector<VoidPatch> voids;
    std::vector<MusclePatch> muscles;
    bool operator==(const DesignGenome&) const = default;
};

enum class RadiusFamily : std::uint8_t { Normal, Uniform, Constant };

/// Initial-radius distribution. For Normal the scale is the standard deviation,
/// for Uniform it is the half-width of the support; Constant ignores it.
struct RadiusDistribution {
    RadiusFamily family = RadiusFamily::Normal;
    double location_cm = 0.0;
    double scale_cm = 0.0;

    double sample(std::mt19937_64& rng) const;

    /// Builds one of the named distributions ("normal", "normal_sq", "uniform",
    /// "uniform_sq", "constant") whose mean radius gives `coverage` of the workspace
    /// for `count` patches. The "_sq" variants use the squared location, with radii
    /// expressed as fractions of the workspace width.
    static RadiusDistribution from_coverage(const std::string& name, double coverage, const Workspace& ws,
                                            int count);
};

/// Mean radius that makes `count` side-by-side patches cover `coverage` of an area.
double radius_for_coverage(double coverage, double area_cm2, int count);

/// (pi / W) * sum r^2
double grid_coverage(std::span<const double> radii, double area_cm2);
double grid_coverage(const std::vector<VoidPatch>& voids, double area_cm2);
double grid_coverage(const std::vector<MusclePatch>& muscles, double area_cm2);

struct DesignSettings {
    Workspace workspace;
    BodyMask body_mask = BodyMask::rectangle(64, 44);
    int num_voids = 64;
    int num_muscles = 64;
    RadiusDistribution void_radius;
    RadiusDistribution muscle_radius;
    bool antiphase = false;
};

struct RasterSettings {
    int void_power = 2;
    int muscle_power = 2;
    double threshold = 0.1;
    double youngs_modulus = 20.0;
    bool constrained = false;
    double border_cm = 0.3;
};

/// Per-candidate-particle physical properties over the whole workspace lattice.
struct ParticleField {
    Workspace workspace;
    std::vector<std::uint8_t> in_body;
    std::vector<double> smooth_mass;  // interpolated mass before the removal cut
    std::vector<double> mass;
    std::vector<double> elasticity;
    std::array<std::vector<double>, kChannels> amplitude;
    std::vector<std::uint8_t> alive;
    std::vector<std::uint8_t> passive_border;

    std::size_t size() const { return mass.size(); }
    std::size_t alive_count() const;
    std::size_t body_count() const;
    /// Mean mass over body candidates, removed particles counting as zero.
    double mean_mass() const;
    Vec2 rest_position(std::size_t idx) const;

    bool operator==(const ParticleField&) const = default;
};

/// Random initial design: uniform centres over the masked workspace, radii from the
/// configured distributions. Deterministic per seed.
DesignGenome sample_initial(const DesignSettings& settings, std::uint64_t seed);

/// Marks patches inactive when their centre leaves the workspace or (voids) their
/// radius reaches zero; reactivates them otherwise.
void refresh_activity(DesignGenome& genome);

ParticleField rasterize_mass(const DesignGenome& genome, int power, double threshold, double youngs_modulus = 20.0);
void rasterize_amplitude(const DesignGenome& genome, int power, bool constrained, double border_cm,
                         ParticleField& field);
ParticleField rasterize(const DesignGenome& genome, const RasterSettings& settings);

/// Passive-border flags: alive particles within `border_cm` of a non-alive lattice
/// site or of the workspace edge.
std::vector<std::uint8_t> passive_border(const ParticleField& field, double border_cm);

inline double interpolated_amplitude(double normalized_distance, int power) {
    static const double kRootTenth = std::sqrt(0.1);
    if (normalized_distance >= 1.0) return 0.0;
    return std::pow(1.0 - normalized_distance * kRootTenth, power);
}

struct PatchGradient {
    std::vector<Vec2> void_center;
    std::vector<double> void_radius;
    std::vector<Vec2> muscle_center;
    std::vector<double> muscle_radius;

    static PatchGradient zeros(const DesignGenome& genome);
    double void_magnitude(std::size_t k) const;
    double muscle_magnitude(std::size_t c) const;
};

/// Chain rule from per-particle gradients (on the pre-threshold mass and on each
/// amplitude channel) to patch centres and radii. The nearest patch takes all the
/// credit at a minimum; ties go to the lowest index.
PatchGradient backprop_patches(const DesignGenome& genome, const RasterSettings& settings,
                               std::span<const double> grad_mass,
                               const std::array<std::vector<double>, kChannels>& grad_amplitude);

struct ReplacementResult {
    DesignGenome genome;
    std::vector<std::size_t> replaced_voids;
    std::vector<std::size_t> replaced_muscles;
};

inline constexpr double kDeadRadiusCm = 1e-3;

ReplacementResult replace_dead_patches(const DesignGenome& genome, const PatchGradient& grads,
                                       const DesignSettings& settings, std::mt19937_64& rng);

Vec2 sample_in_mask(const Workspace& ws, const BodyMask& mask, std::mt19937_64& rng);

void write_genome(std::ostream& out, const DesignGenome& genome);
DesignGenome read_genome(std::istream& in);

}  // namespace morphogen
