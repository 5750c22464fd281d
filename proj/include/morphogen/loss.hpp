#pragma once

#include "morphogen/genome.hpp"
#include "morphogen/mpm.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morphogen {

enum class PrimaryLoss { Locomotion, ObjectTransport, ObjectEject };

std::string to_string(PrimaryLoss p);
PrimaryLoss primary_loss_from_string(const std::string& s);

struct ErosionSpec {
    double alpha = 0.01;
    double beta = 10.0;
    double target = 0.5;
};

struct RotMomentSpec {
    double gamma = 5e-4;
};

struct CircleSpec {
    std::optional<Vec2> center_cm;  // defaults to the body-mask centroid
    std::optional<double> radius_cm;  // defaults to half the mask's smaller extent
    double gamma = 5.5e-5;
};

struct LossSpec {
    PrimaryLoss primary = PrimaryLoss::Locomotion;
    std::optional<ErosionSpec> erosion;
    std::optional<RotMomentSpec> rot_moment;
    std::optional<CircleSpec> circle;

    void validate() const;
};

struct PrimaryResult {
    double loss = 0.0;
    double robot_displacement_cm = 0.0;
    double object_displacement_cm = 0.0;
    TrajectoryCotangent cotangent;
};

/// loss = -(mean final x - mean initial x) over robot particles, in cm.
PrimaryResult locomotion_loss(const SimTrajectory& trajectory, const SceneSpec& scene);
PrimaryResult object_loss(const SimTrajectory& trajectory, const SceneSpec& scene, PrimaryLoss mode);
PrimaryResult primary_loss(const SimTrajectory& trajectory, const SceneSpec& scene, PrimaryLoss mode);

/// The per-particle term alpha * (max g - min g) * tanh(beta * (mean mass - target)).
double erosion_augmentation(std::span<const double> sim_grads, double mean_mass, const ErosionSpec& spec);

/// sim_grads with the erosion term added to every entry; `masses` includes removed
/// particles at zero mass.
std::vector<double> erosion_grad(std::span<const double> sim_grads, std::span<const double> masses,
                                 const ErosionSpec& spec);

/// A scalar auxiliary loss with its gradient on per-candidate mass; `coefficient`
/// scales both when combined.
struct AuxTerm {
    std::string name;
    double loss = 0.0;
    double coefficient = 1.0;
    std::vector<double> grad_mass;
};

/// h(nu) = nu below 0.25, 2 nu - 0.25 above, distances in simulation units.
double moment_profile(double nu);

AuxTerm rot_moment_grad(const ParticleField& field, const RotMomentSpec& spec, double cm_per_unit);
AuxTerm circle_mask_grad(const ParticleField& field, const CircleSpec& spec, const BodyMask& mask);

Vec2 default_circle_center(const BodyMask& mask, const Workspace& ws);
double default_circle_radius(const BodyMask& mask, const Workspace& ws);

/// Elementwise sum of the simulation gradient and every coefficient-scaled term.
std::vector<double> combine(std::span<const double> sim_grads, const std::vector<AuxTerm>& terms);

}  // namespace morphogen
