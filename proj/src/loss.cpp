#include "morphogen/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace morphogen {

std::string to_string(PrimaryLoss p) {
    switch (p) {
        case PrimaryLoss::Locomotion: return "locomotion";
        case PrimaryLoss::ObjectTransport: return "transport";
        case PrimaryLoss::ObjectEject: return "eject";
    }
    return "locomotion";
}

PrimaryLoss primary_loss_from_string(const std::string& s) {
    if (s == "locomotion") return PrimaryLoss::Locomotion;
    if (s == "transport") return PrimaryLoss::ObjectTransport;
    if (s == "eject") return PrimaryLoss::ObjectEject;
    throw std::invalid_argument("unknown primary loss '" + s + "'");
}

void LossSpec::validate() const {
    if (erosion) {
        if (erosion->alpha < 0.0 || erosion->beta < 0.0) throw std::invalid_argument("erosion coefficients must be non-negative");
        if (erosion->target < 0.0 || erosion->target > 1.0) throw std::invalid_argument("erosion target must lie in [0, 1]");
    }
    if (rot_moment && rot_moment->gamma < 0.0) throw std::invalid_argument("rotational-moment gamma must be non-negative");
    if (circle) {
        if (circle->gamma < 0.0) throw std::invalid_argument("circle gamma must be non-negative");
        if (circle->radius_cm && !(*circle->radius_cm > 0.0)) throw std::invalid_argument("circle radius must be positive");
    }
}

namespace {

double mean_x(const std::vector<Vec2>& xs, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += xs[i].x();
    return s / static_cast<double>(end - begin);
}

}  // namespace

PrimaryResult locomotion_loss(const SimTrajectory& trajectory, const SceneSpec& scene) {
    if (trajectory.states.empty()) throw std::invalid_argument("empty trajectory");
    const auto& first = trajectory.states.front().x;
    const auto& last = trajectory.states.back().x;
    const std::size_t n = scene.robot_count;
    PrimaryResult r;
    r.robot_displacement_cm = (mean_x(last, 0, n) - mean_x(first, 0, n)) * scene.cm_per_unit;
    if (scene.has_object()) {
        r.object_displacement_cm = (mean_x(last, n, scene.size()) - mean_x(first, n, scene.size())) * scene.cm_per_unit;
    }
    r.loss = -r.robot_displacement_cm;
    r.cotangent.final_position.assign(scene.size(), Vec2::Zero());
    for (std::size_t i = 0; i < n; ++i) r.cotangent.final_position[i].x() = -1.0 / static_cast<double>(n);
    return r;
}

PrimaryResult object_loss(const SimTrajectory& trajectory, const SceneSpec& scene, PrimaryLoss mode) {
    if (!scene.has_object()) throw std::invalid_argument("object loss requires a scene with an object");
    if (mode == PrimaryLoss::Locomotion) throw std::invalid_argument("object loss mode must be transport or eject");
    PrimaryResult r = locomotion_loss(trajectory, scene);
    const std::size_t n = scene.robot_count;
    const double robot_weight = mode == PrimaryLoss::ObjectTransport ? 0.5 : 0.0;
    const double object_weight = mode == PrimaryLoss::ObjectTransport ? 0.5 : 1.0;
    r.loss = -(robot_weight * r.robot_displacement_cm + object_weight * r.object_displacement_cm);
    for (std::size_t i = 0; i < n; ++i) r.cotangent.final_position[i].x() = -robot_weight / static_cast<double>(n);
    for (std::size_t i = n; i < scene.size(); ++i) {
        r.cotangent.final_position[i].x() = -object_weight / static_cast<double>(scene.object_count);
    }
    return r;
}

PrimaryResult primary_loss(const SimTrajectory& trajectory, const SceneSpec& scene, PrimaryLoss mode) {
    return mode == PrimaryLoss::Locomotion ? locomotion_loss(trajectory, scene) : object_loss(trajectory, scene, mode);
}

double erosion_augmentation(std::span<const double> sim_grads, double mean_mass, const ErosionSpec& spec) {
    if (sim_grads.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(sim_grads.begin(), sim_grads.end());
    return spec.alpha * (*hi - *lo) * std::tanh(spec.beta * (mean_mass - spec.target));
}

std::vector<double> erosion_grad(std::span<const double> sim_grads, std::span<const double> masses,
                                 const ErosionSpec& spec) {
    if (sim_grads.size() != masses.size()) throw std::invalid_argument("erosion inputs differ in length");
    double mean = 0.0;
    for (double m : masses) mean += m;
    if (!masses.empty()) mean /= static_cast<double>(masses.size());
    const double aug = erosion_augmentation(sim_grads, mean, spec);
    std::vector<double> out(sim_grads.begin(), sim_grads.end());
    for (double& g : out) g += aug;
    return out;
}

double moment_profile(double nu) { return nu < 0.25 ? nu : 2.0 * nu - 0.25; }

AuxTerm rot_moment_grad(const ParticleField& field, const RotMomentSpec& spec, double cm_per_unit) {
    AuxTerm term;
    term.name = "rot_moment";
    term.coefficient = spec.gamma;
    const std::size_t n = field.size();
    term.grad_mass.assign(n, 0.0);

    double total = 0.0;
    Vec2 weighted = Vec2::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        if (!field.alive[i]) continue;
        total += field.mass[i];
        weighted += field.mass[i] * field.rest_position(i) / cm_per_unit;
    }
    if (!(total > 0.0)) throw DegenerateBody("rotational moment needs at least one alive particle");
    const Vec2 com = weighted / total;

    // G = sum_psi m_psi h'(nu_psi) d(nu_psi)/d(com)
    Vec2 pull = Vec2::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        if (!field.alive[i]) continue;
        const Vec2 r = field.rest_position(i) / cm_per_unit - com;
        const double nu = r.norm();
        term.loss += field.mass[i] * moment_profile(nu);
        if (nu > 0.0) {
            const double slope = nu < 0.25 ? 1.0 : 2.0;
            pull -= field.mass[i] * slope * r / nu;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!field.in_body[i]) continue;
        const Vec2 r = field.rest_position(i) / cm_per_unit - com;
        term.grad_mass[i] = moment_profile(r.norm()) + pull.dot(r) / total;
    }
    return term;
}

Vec2 default_circle_center(const BodyMask& mask, const Workspace& ws) {
    Vec2 sum = Vec2::Zero();
    std::size_t count = 0;
    for (int j = 0; j < mask.ny; ++j) {
        for (int i = 0; i < mask.nx; ++i) {
            if (!mask.at(i, j)) continue;
            sum += ws.site(i, j);
            ++count;
        }
    }
    if (count == 0) throw DegenerateBody("mask has no body cells");
    return sum / static_cast<double>(count);
}

double default_circle_radius(const BodyMask& mask, const Workspace& ws) {
    int i0 = mask.nx, i1 = -1, j0 = mask.ny, j1 = -1;
    for (int j = 0; j < mask.ny; ++j) {
        for (int i = 0; i < mask.nx; ++i) {
            if (!mask.at(i, j)) continue;
            i0 = std::min(i0, i);
            i1 = std::max(i1, i);
            j0 = std::min(j0, j);
            j1 = std::max(j1, j);
        }
    }
    if (i1 < 0) throw DegenerateBody("mask has no body cells");
    const double w = (i1 - i0 + 1) * ws.spacing_x();
    const double h = (j1 - j0 + 1) * ws.spacing_y();
    return 0.5 * std::min(w, h);
}

AuxTerm circle_mask_grad(const ParticleField& field, const CircleSpec& spec, const BodyMask& mask) {
    AuxTerm term;
    term.name = "circle";
    term.coefficient = spec.gamma;
    const Vec2 center = spec.center_cm.value_or(default_circle_center(mask, field.workspace));
    const double radius = spec.radius_cm.value_or(default_circle_radius(mask, field.workspace));
    if (!(radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
    term.grad_mass.assign(field.size(), 0.0);
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (!field.in_body[i]) continue;
        const double sign = (field.rest_position(i) - center).norm() > radius ? 1.0 : -1.0;
        term.loss += field.mass[i] * sign;
        term.grad_mass[i] = sign;
    }
    return term;
}

std::vector<double> combine(std::span<const double> sim_grads, const std::vector<AuxTerm>& terms) {
    std::vector<double> out(sim_grads.begin(), sim_grads.end());
    for (const auto& t : terms) {
        if (t.grad_mass.size() != out.size()) throw std::invalid_argument("auxiliary term '" + t.name + "' has the wrong length");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += t.coefficient * t.grad_mass[i];
    }
    return out;
}

}  // namespace morphogen
