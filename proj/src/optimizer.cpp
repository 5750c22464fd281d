#include "morphogen/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>

namespace morphogen {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, const AdamParams& hp) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam: parameter, gradient and state sizes differ");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) throw std::domain_error("adam: non-finite gradient at index " + std::to_string(i));
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(hp.beta1, state.step);
    const double bc2 = 1.0 - std::pow(hp.beta2, state.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grads[i];
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
    }
}

std::vector<double> pack_parameters(const DesignGenome& genome) {
    const double w = genome.workspace.width_cm;
    std::vector<double> p;
    p.reserve(3 * genome.voids.size() + 2 * genome.muscles.size());
    for (const auto& v : genome.voids) {
        p.push_back(v.center.x() / w);
        p.push_back(v.center.y() / w);
        p.push_back(v.radius / w);
    }
    for (const auto& m : genome.muscles) {
        p.push_back(m.center.x() / w);
        p.push_back(m.center.y() / w);
    }
    return p;
}

void unpack_parameters(std::span<const double> params, DesignGenome& genome) {
    if (params.size() != 3 * genome.voids.size() + 2 * genome.muscles.size()) {
        throw std::invalid_argument("parameter vector does not match genome");
    }
    const double w = genome.workspace.width_cm;
    std::size_t i = 0;
    for (auto& v : genome.voids) {
        v.center = Vec2(params[i], params[i + 1]) * w;
        v.radius = params[i + 2] * w;
        i += 3;
    }
    for (auto& m : genome.muscles) {
        m.center = Vec2(params[i], params[i + 1]) * w;
        i += 2;
    }
}

std::vector<double> pack_gradient(const PatchGradient& grad, const Workspace& ws) {
    const double w = ws.width_cm;
    std::vector<double> g;
    g.reserve(3 * grad.void_center.size() + 2 * grad.muscle_center.size());
    for (std::size_t k = 0; k < grad.void_center.size(); ++k) {
        g.push_back(grad.void_center[k].x() * w);
        g.push_back(grad.void_center[k].y() * w);
        g.push_back(grad.void_radius[k] * w);
    }
    for (const auto& c : grad.muscle_center) {
        g.push_back(c.x() * w);
        g.push_back(c.y() * w);
    }
    return g;
}

void clamp_genome(DesignGenome& genome) {
    for (auto& v : genome.voids) v.radius = std::clamp(v.radius, 0.0, kMaxRadiusCm);
    refresh_activity(genome);
}

DesignEvaluation evaluate_design(const ParticleField& field, const RunConfig& config, const BodyMask& mask,
                                 bool with_gradient) {
    DesignEvaluation ev;
    ev.scene = build_scene(field, config.scene_options(), config.sim);
    ev.trajectory = simulate(ev.scene, config.sim);
    ev.primary = primary_loss(ev.trajectory, ev.scene, config.primary);
    if (config.rot_moment_enabled) ev.aux.push_back(rot_moment_grad(field, config.rot_moment, config.sim.cm_per_unit));
    if (config.circle_enabled) ev.aux.push_back(circle_mask_grad(field, config.circle, mask));

    ev.loss.sim = ev.primary.loss;
    ev.loss.total = ev.primary.loss;
    for (const auto& t : ev.aux) {
        ev.loss.total += t.coefficient * t.loss;
        if (t.name == "rot_moment") ev.loss.rot_moment = t.loss;
        if (t.name == "circle") ev.loss.circle = t.loss;
    }
    ev.loss.mean_mass = field.mean_mass();

    if (with_gradient) {
        const ParticleGradients g = adjoint(ev.trajectory, ev.scene, config.sim, ev.primary.cotangent);
        const std::size_t n = field.size();
        ev.grad_mass.assign(n, 0.0);
        ev.grad_elasticity.assign(n, 0.0);
        for (auto& a : ev.grad_amplitude) a.assign(n, 0.0);
        for (std::size_t i = 0; i < ev.scene.robot_count; ++i) {
            const auto idx = static_cast<std::size_t>(ev.scene.source[i]);
            ev.grad_mass[idx] = g.mass[i];
            ev.grad_elasticity[idx] = g.elasticity[i];
            for (std::size_t ch = 0; ch < kChannels; ++ch) ev.grad_amplitude[ch][idx] = g.amplitude[ch][i];
        }
    }
    return ev;
}

namespace {

void fill_record(AttemptRecord& rec, const DesignEvaluation& ev) {
    rec.fitness_cm = -ev.primary.loss;
    rec.robot_displacement_cm = ev.primary.robot_displacement_cm;
    rec.object_displacement_cm = ev.primary.object_displacement_cm;
    rec.loss = ev.loss;
    rec.com_trace_cm = ev.trajectory.robot_com_cm;
    rec.object_trace_cm = ev.trajectory.object_com_cm;
}

// Total loss gradient on per-lattice mass: simulation (with E = youngs * m folded in
// when `fold_elasticity`), erosion, then the auxiliary terms.
std::vector<double> total_mass_gradient(const DesignEvaluation& ev, const ParticleField& field, const RunConfig& config,
                                        bool fold_elasticity, AttemptRecord& rec) {
    std::vector<double> sim = ev.grad_mass;
    if (fold_elasticity) {
        for (std::size_t i = 0; i < sim.size(); ++i) sim[i] += config.sim.youngs * ev.grad_elasticity[i];
    }
    if (config.erosion_enabled) {
        std::vector<std::size_t> body;
        std::vector<double> g;
        std::vector<double> m;
        for (std::size_t i = 0; i < field.size(); ++i) {
            if (!field.in_body[i]) continue;
            body.push_back(i);
            g.push_back(sim[i]);
            m.push_back(field.mass[i]);
        }
        const auto eroded = erosion_grad(g, m, config.erosion);
        if (!g.empty()) {
            const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
            rec.gradient_range = *hi - *lo;
            rec.erosion_augmentation = erosion_augmentation(g, field.mean_mass(), config.erosion);
        }
        for (std::size_t b = 0; b < body.size(); ++b) sim[body[b]] = eroded[b];
    }
    return combine(sim, ev.aux);
}

void mark_failed(AttemptRecord& rec, const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
}

constexpr std::uint64_t kReplacementStream = 0x9E3779B97F4A7C15ull;

}  // namespace

std::vector<AttemptRecord> run_attempts(const RunConfig& config, std::uint64_t seed) {
    config.validate();
    const DesignSettings ds = config.design_settings();
    const RasterSettings rs = config.raster_settings();
    DesignGenome genome = sample_initial(ds, seed);
    std::mt19937_64 rng(seed ^ kReplacementStream);
    std::vector<double> params = pack_parameters(genome);
    AdamState adam(params.size());

    std::vector<AttemptRecord> records;
    for (int a = 1; a <= config.attempts; ++a) {
        AttemptRecord rec;
        rec.seed = seed;
        rec.attempt = a;
        rec.genome = genome;
        const bool last = a == config.attempts;
        try {
            rec.field = rasterize(genome, rs);
            rec.alive_particles = rec.field.alive_count();
            const DesignEvaluation ev = evaluate_design(rec.field, config, genome.body_mask, !last);
            fill_record(rec, ev);
            if (!last) {
                const auto grad_mass = total_mass_gradient(ev, rec.field, config, true, rec);
                const PatchGradient pg = backprop_patches(genome, rs, grad_mass, ev.grad_amplitude);
                adam_step(adam, params, pack_gradient(pg, genome.workspace), config.adam);
                unpack_parameters(params, genome);
                clamp_genome(genome);
                if (config.replacement) {
                    ReplacementResult rr = replace_dead_patches(genome, pg, ds, rng);
                    genome = std::move(rr.genome);
                    for (auto k : rr.replaced_voids) {
                        for (std::size_t d = 0; d < 3; ++d) adam.reset(3 * k + d);
                    }
                    for (auto c : rr.replaced_muscles) {
                        for (std::size_t d = 0; d < 2; ++d) adam.reset(3 * genome.voids.size() + 2 * c + d);
                    }
                }
                params = pack_parameters(genome);
            }
        } catch (const SimulationError& e) {
            mark_failed(rec, e);
        } catch (const DegenerateBody& e) {
            mark_failed(rec, e);
        }
        const bool failed = rec.failed;
        records.push_back(std::move(rec));
        if (failed) break;
    }
    return records;
}

std::vector<AttemptRecord> run_direct(const RunConfig& config, std::uint64_t seed) {
    config.validate();
    const DesignSettings ds = config.design_settings();
    const RasterSettings rs = config.raster_settings();
    DesignGenome genome = sample_initial(ds, seed);
    genome.voids.clear();

    ParticleField base = rasterize_mass(genome, rs.void_power, rs.threshold, rs.youngs_modulus);
    std::vector<std::size_t> body;
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (base.in_body[i]) body.push_back(i);
    }
    const std::size_t nb = body.size();
    const double lo = rs.threshold;

    // [mass] x B, [stiffness E / youngs] x B, then the muscle centres
    std::vector<double> params(2 * nb, 1.0);
    const auto muscle_params = pack_parameters(genome);
    params.insert(params.end(), muscle_params.begin(), muscle_params.end());
    AdamState adam(params.size());

    std::vector<AttemptRecord> records;
    for (int a = 1; a <= config.direct_attempts; ++a) {
        AttemptRecord rec;
        rec.seed = seed;
        rec.attempt = a;
        rec.genome = genome;
        const bool last = a == config.direct_attempts;
        try {
            ParticleField field = base;
            for (std::size_t b = 0; b < nb; ++b) {
                const std::size_t i = body[b];
                field.smooth_mass[i] = params[b];
                field.mass[i] = params[b];
                field.elasticity[i] = params[nb + b] * rs.youngs_modulus;
                field.alive[i] = 1;
            }
            rasterize_amplitude(genome, rs.muscle_power, rs.constrained, rs.border_cm, field);
            rec.field = field;
            rec.alive_particles = field.alive_count();
            const DesignEvaluation ev = evaluate_design(field, config, genome.body_mask, !last);
            fill_record(rec, ev);
            if (!last) {
                const auto grad_mass = total_mass_gradient(ev, field, config, false, rec);
                const std::vector<double> no_mass(field.size(), 0.0);
                const PatchGradient pg = backprop_patches(genome, rs, no_mass, ev.grad_amplitude);
                std::vector<double> grads(params.size(), 0.0);
                for (std::size_t b = 0; b < nb; ++b) {
                    grads[b] = grad_mass[body[b]];
                    grads[nb + b] = ev.grad_elasticity[body[b]] * rs.youngs_modulus;
                }
                const auto mg = pack_gradient(pg, genome.workspace);
                std::copy(mg.begin(), mg.end(), grads.begin() + static_cast<std::ptrdiff_t>(2 * nb));
                adam_step(adam, params, grads, config.adam);
                for (std::size_t b = 0; b < 2 * nb; ++b) params[b] = std::clamp(params[b], lo, 1.0);
                unpack_parameters(std::span<const double>(params).subspan(2 * nb), genome);
                refresh_activity(genome);
            }
        } catch (const SimulationError& e) {
            mark_failed(rec, e);
        } catch (const DegenerateBody& e) {
            mark_failed(rec, e);
        }
        const bool failed = rec.failed;
        records.push_back(std::move(rec));
        if (failed) break;
    }
    return records;
}

namespace {

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + frac * (v[i + 1] - v[i]);
}

}  // namespace

GradcheckReport compare_gradients(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, std::span<const double> analytic, double h,
                                  std::span<const std::uint8_t> excluded, const std::vector<std::string>& names,
                                  double offender_tol) {
    if (analytic.size() != x.size()) throw std::invalid_argument("gradcheck: analytic gradient has the wrong length");
    if (!excluded.empty() && excluded.size() != x.size()) throw std::invalid_argument("gradcheck: exclusion mask has the wrong length");
    double scale = 0.0;
    for (double a : analytic) scale = std::max(scale, std::abs(a));
    const double atol = 1e-6 * scale;

    GradcheckReport report;
    std::vector<double> errors;
    std::vector<double> probe(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        GradcheckEntry e;
        e.name = i < names.size() ? names[i] : "p" + std::to_string(i);
        e.analytic = analytic[i];
        e.excluded = !excluded.empty() && excluded[i];
        if (!e.excluded) {
            probe[i] = x[i] + h;
            const double up = f(probe);
            probe[i] = x[i] - h;
            const double down = f(probe);
            probe[i] = x[i];
            e.numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), atol});
            e.rel_error = denom > 0.0 ? std::abs(e.analytic - e.numeric) / denom : 0.0;
            errors.push_back(e.rel_error);
            if (e.rel_error > offender_tol) report.offenders.push_back(e.name);
        }
        report.entries.push_back(e);
    }
    report.checked = errors.size();
    if (!errors.empty()) {
        report.max_rel = *std::max_element(errors.begin(), errors.end());
        report.median_rel = quantile(errors, 0.5);
        report.p95_rel = quantile(errors, 0.95);
    }
    return report;
}

RunConfig reduced_config(RunConfig base, int steps) {
    const double sx = base.workspace_width_cm / base.lattice_x;
    const double sy = base.workspace_height_cm / base.lattice_y;
    base.lattice_x = 16;
    base.lattice_y = 11;
    base.workspace_width_cm = sx * 16;
    base.workspace_height_cm = sy * 11;
    base.num_voids = 8;
    base.num_muscles = 8;
    base.constrained = false;
    base.mask_path.reset();
    base.sim.steps = steps;
    return base;
}

namespace {

std::vector<double> pack_cm(const DesignGenome& g) {
    std::vector<double> p;
    for (const auto& v : g.voids) p.insert(p.end(), {v.center.x(), v.center.y(), v.radius});
    for (const auto& m : g.muscles) p.insert(p.end(), {m.center.x(), m.center.y()});
    return p;
}

void unpack_cm(std::span<const double> p, DesignGenome& g) {
    std::size_t i = 0;
    for (auto& v : g.voids) {
        v.center = Vec2(p[i], p[i + 1]);
        v.radius = p[i + 2];
        i += 3;
    }
    for (auto& m : g.muscles) {
        m.center = Vec2(p[i], p[i + 1]);
        i += 2;
    }
}

// True when a particle the patch reaches sits near a point where the rasterized
// quantity is not differentiable in this patch's parameters.
template <typename Patches, typename Same>
bool near_kink(const DesignGenome& g, const Patches& patches, std::size_t k, Same same_group, int power,
               std::optional<double> threshold, double margin) {
    const auto& ws = g.workspace;
    const auto& self = patches[k];
    if (!self.active || !(self.radius > 0.0)) return false;
    for (int j = 0; j < ws.ny; ++j) {
        for (int i = 0; i < ws.nx; ++i) {
            if (!g.body_mask.at(i, j)) continue;
            const Vec2 p = ws.site(i, j);
            const double dk = (p - self.center).norm() / self.radius;
            if (dk >= 1.0 + margin) continue;
            double other = 1.0;
            for (std::size_t o = 0; o < patches.size(); ++o) {
                const auto& q = patches[o];
                if (o == k || !q.active || !(q.radius > 0.0) || !same_group(q)) continue;
                other = std::min(other, (p - q.center).norm() / q.radius);
            }
            if (std::abs(dk - other) < margin) return true;
            if (dk > other) continue;
            if (std::abs(dk - 1.0) < margin) return true;
            if (threshold && std::abs(std::pow(dk, power) - *threshold) < margin) return true;
        }
    }
    return false;
}

}  // namespace

GradcheckReport gradcheck(const RunConfig& config, std::uint64_t seed, double h, double margin) {
    config.validate();
    const DesignSettings ds = config.design_settings();
    const RasterSettings rs = config.raster_settings();
    const DesignGenome genome = sample_initial(ds, seed);

    const ParticleField field = rasterize(genome, rs);
    const DesignEvaluation ev = evaluate_design(field, config, genome.body_mask, true);
    std::vector<double> gm = ev.grad_mass;
    for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += config.sim.youngs * ev.grad_elasticity[i];
    const PatchGradient pg = backprop_patches(genome, rs, gm, ev.grad_amplitude);

    std::vector<double> analytic;
    std::vector<std::string> names;
    std::vector<std::uint8_t> excluded;
    for (std::size_t k = 0; k < genome.voids.size(); ++k) {
        analytic.insert(analytic.end(), {pg.void_center[k].x(), pg.void_center[k].y(), pg.void_radius[k]});
        for (const char* c : {".x", ".y", ".r"}) names.push_back("void" + std::to_string(k) + c);
        const bool ex = near_kink(genome, genome.voids, k, [](const VoidPatch&) { return true; }, rs.void_power,
                                  rs.threshold, margin);
        excluded.insert(excluded.end(), 3, ex ? 1 : 0);
    }
    for (std::size_t c = 0; c < genome.muscles.size(); ++c) {
        analytic.insert(analytic.end(), {pg.muscle_center[c].x(), pg.muscle_center[c].y()});
        for (const char* s : {".x", ".y"}) names.push_back("muscle" + std::to_string(c) + s);
        const Channel ch = genome.muscles[c].channel;
        const bool ex = near_kink(genome, genome.muscles, c, [ch](const MusclePatch& m) { return m.channel == ch; },
                                  rs.muscle_power, std::nullopt, margin);
        excluded.insert(excluded.end(), 2, ex ? 1 : 0);
    }

    const auto objective = [&](std::span<const double> p) {
        DesignGenome g = genome;
        unpack_cm(p, g);
        const ParticleField f = rasterize(g, rs);
        return evaluate_design(f, config, g.body_mask, false).primary.loss;
    };
    const auto x = pack_cm(genome);
    return compare_gradients(objective, x, analytic, h, excluded, names);
}

}  // namespace morphogen
