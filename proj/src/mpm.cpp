// Moving-least-squares MPM with quadratic B-spline transfers, fixed-corotated
// elasticity and a hand-written reverse pass.

#include "morphogen/mpm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace morphogen {

namespace {

constexpr double kParticleVolume = 1.0;

inline double sq(double v) { return v * v; }

struct Stencil {
    int bx = 0;
    int by = 0;
    double fx = 0.0;
    double fy = 0.0;
    double wx[3]{};
    double wy[3]{};
    double dwx[3]{};  // d w / d fx
    double dwy[3]{};
};

inline void bspline(double f, double* w, double* dw) {
    w[0] = 0.5 * sq(1.5 - f);
    w[1] = 0.75 - sq(f - 1.0);
    w[2] = 0.5 * sq(f - 0.5);
    dw[0] = f - 1.5;
    dw[1] = -2.0 * (f - 1.0);
    dw[2] = f - 0.5;
}

inline Stencil make_stencil(const Vec2& x, double inv_dx) {
    Stencil s;
    const double gx = x.x() * inv_dx;
    const double gy = x.y() * inv_dx;
    s.bx = static_cast<int>(std::floor(gx - 0.5));
    s.by = static_cast<int>(std::floor(gy - 0.5));
    s.fx = gx - s.bx;
    s.fy = gy - s.by;
    bspline(s.fx, s.wx, s.dwx);
    bspline(s.fy, s.wy, s.dwy);
    return s;
}

inline Mat2 polar_rotation(const Mat2& F) {
    const double a = F(0, 0) + F(1, 1);
    const double b = F(1, 0) - F(0, 1);
    const double rho = std::hypot(a, b);
    if (rho == 0.0) return Mat2::Identity();
    const double c = a / rho;
    const double s = b / rho;
    Mat2 R;
    R << c, -s, s, c;
    return R;
}

// Adds the F-cotangent of R = polar(F) given the R-cotangent.
inline void polar_rotation_vjp(const Mat2& F, const Mat2& Rbar, Mat2& Fbar) {
    const double a = F(0, 0) + F(1, 1);
    const double b = F(1, 0) - F(0, 1);
    const double rho2 = a * a + b * b;
    if (rho2 == 0.0) return;
    const double rho = std::sqrt(rho2);
    const double c = a / rho;
    const double s = b / rho;
    const double theta_bar = -s * Rbar(0, 0) - c * Rbar(0, 1) + c * Rbar(1, 0) - s * Rbar(1, 1);
    const double abar = -b * theta_bar / rho2;
    const double bbar = a * theta_bar / rho2;
    Fbar(0, 0) += abar;
    Fbar(1, 1) += abar;
    Fbar(1, 0) += bbar;
    Fbar(0, 1) -= bbar;
}

inline Mat2 cofactor(const Mat2& F) {
    Mat2 c;
    c << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
    return c;
}

inline Mat2 sym(const Mat2& M) { return 0.5 * (M + M.transpose()); }

inline double contract(const Mat2& A, const Mat2& B) { return (A.array() * B.array()).sum(); }

struct Lame {
    double mu_per_e;
    double lambda_per_e;
};

inline Lame lame_factors(const SimParams& p) {
    return {1.0 / (2.0 * (1.0 + p.poisson)), p.poisson / ((1.0 + p.poisson) * (1.0 - 2.0 * p.poisson))};
}

// Constitutive evaluation for one particle in one step.
struct Constitutive {
    Mat2 Fn;
    Mat2 R;
    Mat2 cauchy;
    Mat2 affine;
    double J = 1.0;
    double mu = 0.0;
    double lambda = 0.0;
    double drive = 0.0;  // tanh argument
};

// Per-step constants shared by the forward and reverse passes.
struct StepConstants {
    int n = 128;
    double dx = 0.0;
    double inv_dx = 0.0;
    double dt = 0.0;
    double stress_scale = 0.0;  // dt * volume * 4 / dx^2
    double viscosity = 0.0;     // viscous stress per unit mass and strain rate
    double velocity_decay = 1.0;
    Lame lame{};

    explicit StepConstants(const SimParams& p) {
        n = p.grid;
        dx = p.dx();
        inv_dx = 1.0 / dx;
        dt = p.dt;
        stress_scale = dt * kParticleVolume * 4.0 * inv_dx * inv_dx;
        viscosity = p.internal_damping / (kParticleVolume * 4.0 * inv_dx * inv_dx);
        velocity_decay = std::exp(-p.global_damping * dt);
        lame = lame_factors(p);
    }
};

inline Constitutive evaluate(const StepConstants& k, const SimParams& p, const SceneSpec& scene, std::size_t i,
                             const Mat2& C, const Mat2& F, double sin_t, double cos_t) {
    Constitutive c;
    const double m = scene.mass[i];
    const double e = scene.elasticity[i];
    c.Fn = (Mat2::Identity() + k.dt * C) * F;
    c.J = c.Fn.determinant();
    c.R = polar_rotation(c.Fn);
    c.mu = e * k.lame.mu_per_e;
    c.lambda = e * k.lame.lambda_per_e;
    c.cauchy = 2.0 * c.mu * (c.Fn - c.R) * c.Fn.transpose();
    c.cauchy.diagonal().array() += c.lambda * c.J * (c.J - 1.0);
    c.cauchy += k.viscosity * m * sym(C);
    c.drive = scene.amplitude[0][i] * sin_t + scene.amplitude[1][i] * cos_t;
    c.cauchy(1, 1) += p.actuation_strength * m * std::tanh(c.drive);
    c.affine = -k.stress_scale * c.cauchy + m * C;
    return c;
}

enum FloorMode : std::uint8_t { kNoFloor = 0, kStick = 1, kSlide = 2 };

struct NodeTrace {
    std::uint8_t wall_x = 0;  // x component zeroed by a side wall
    std::uint8_t floor = kNoFloor;
    std::uint8_t ceiling = 0;
    double slide_sign = 0.0;
};

class Grid {
public:
    explicit Grid(int n) : n_(n), size_(static_cast<std::size_t>(n) * n) {
        mom_.resize(size_);
        mass_.resize(size_);
        vin_.resize(size_);
        vout_.resize(size_);
        trace_.resize(size_);
    }

    void clear() {
        std::fill(mom_.begin(), mom_.end(), Vec2::Zero());
        std::fill(mass_.begin(), mass_.end(), 0.0);
    }

    std::size_t node(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

    Vec2& mom(std::size_t k) { return mom_[k]; }
    double& mass(std::size_t k) { return mass_[k]; }
    double mass(std::size_t k) const { return mass_[k]; }
    const Vec2& vin(std::size_t k) const { return vin_[k]; }
    const Vec2& vout(std::size_t k) const { return vout_[k]; }
    const NodeTrace& trace(std::size_t k) const { return trace_[k]; }

    void update(const SimParams& p) {
        const int bound = p.boundary_cells;
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) {
                const std::size_t k = node(i, j);
                NodeTrace& tr = trace_[k];
                tr = NodeTrace{};
                if (mass_[k] <= 0.0) {
                    vin_[k] = Vec2::Zero();
                    vout_[k] = Vec2::Zero();
                    continue;
                }
                vin_[k] = mom_[k] / mass_[k];
                Vec2 v = vin_[k];
                v.y() -= p.dt * p.gravity;
                if ((i < bound && v.x() < 0.0) || (i > n_ - bound && v.x() > 0.0)) {
                    v.x() = 0.0;
                    tr.wall_x = 1;
                }
                if (j < bound && v.y() < 0.0) {
                    // Coulomb friction: the normal impulse bounds the tangential one
                    if (std::abs(v.x()) + p.friction * v.y() <= 0.0) {
                        v = Vec2::Zero();
                        tr.floor = kStick;
                    } else {
                        tr.slide_sign = v.x() > 0.0 ? 1.0 : -1.0;
                        v.x() += p.friction * v.y() * tr.slide_sign;
                        v.y() = 0.0;
                        tr.floor = kSlide;
                    }
                }
                if (j > n_ - bound && v.y() > 0.0) {
                    v.y() = 0.0;
                    tr.ceiling = 1;
                }
                vout_[k] = v;
            }
        }
    }

    // Cotangent of the pre-boundary velocity given the cotangent of vout.
    Vec2 boundary_vjp(std::size_t k, Vec2 g, double friction) const {
        const NodeTrace& tr = trace_[k];
        if (tr.ceiling) g.y() = 0.0;
        if (tr.floor == kStick) {
            g = Vec2::Zero();
        } else if (tr.floor == kSlide) {
            g.y() = g.x() * friction * tr.slide_sign;
        }
        if (tr.wall_x) g.x() = 0.0;
        return g;
    }

private:
    int n_;
    std::size_t size_;
    std::vector<Vec2> mom_;
    std::vector<double> mass_;
    std::vector<Vec2> vin_;
    std::vector<Vec2> vout_;
    std::vector<NodeTrace> trace_;
};

void check_stencil(const Stencil& s, int n, int step, std::size_t particle, const Vec2& x) {
    if (s.bx < 0 || s.by < 0 || s.bx > n - 3 || s.by > n - 3) {
        throw SimulationError(step, "particle " + std::to_string(particle) + " left the domain at (" +
                                        std::to_string(x.x()) + ", " + std::to_string(x.y()) + ")");
    }
}

void scatter(const SimParams& p, const StepConstants& k, const SceneSpec& scene, const SimState& state, Grid& grid) {
    const double phase = state.step * p.dt * p.actuation_freq;
    const double sin_t = std::sin(phase);
    const double cos_t = std::cos(phase);
    grid.clear();
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Stencil s = make_stencil(state.x[i], k.inv_dx);
        check_stencil(s, k.n, state.step, i, state.x[i]);
        const Constitutive c = evaluate(k, p, scene, i, state.C[i], state.F[i], sin_t, cos_t);
        const double m = scene.mass[i];
        const Vec2 momentum = m * k.velocity_decay * state.v[i];
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                const Vec2 dpos((a - s.fx) * k.dx, (b - s.fy) * k.dx);
                const double w = s.wx[a] * s.wy[b];
                const std::size_t nk = grid.node(s.bx + a, s.by + b);
                grid.mom(nk) += w * (momentum + c.affine * dpos);
                grid.mass(nk) += w * m;
            }
        }
    }
}

Vec2 robot_com(const SceneSpec& scene, const SimState& s) {
    Vec2 sum = Vec2::Zero();
    for (std::size_t i = 0; i < scene.robot_count; ++i) sum += s.x[i];
    return scene.to_cm(sum / static_cast<double>(scene.robot_count));
}

Vec2 object_com(const SceneSpec& scene, const SimState& s) {
    Vec2 sum = Vec2::Zero();
    for (std::size_t i = scene.robot_count; i < scene.size(); ++i) sum += s.x[i];
    return scene.to_cm(sum / static_cast<double>(scene.object_count));
}

}  // namespace

void SimParams::validate() const {
    if (steps <= 0) throw std::invalid_argument("steps must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (grid < 8) throw std::invalid_argument("grid must have at least 8 cells");
    if (!(poisson > -1.0 && poisson < 0.5)) throw std::invalid_argument("poisson ratio must lie in (-1, 0.5)");
    if (friction < 0.0 || internal_damping < 0.0 || global_damping < 0.0) {
        throw std::invalid_argument("friction and damping must be non-negative");
    }
    if (!(cm_per_unit > 0.0)) throw std::invalid_argument("cm_per_unit must be positive");
    if (boundary_cells < 1 || boundary_cells * 2 >= grid) throw std::invalid_argument("bad boundary width");
    if (substeps < 1) throw std::invalid_argument("substeps must be at least 1");
}

SimParams SimParams::integration() const {
    SimParams fine = *this;
    fine.steps = steps * substeps;
    fine.dt = dt / substeps;
    fine.substeps = 1;
    return fine;
}

double actuation_state(double mass, double amp_sin, double amp_cos, int step, const SimParams& params) {
    const double phase = step * params.dt * params.actuation_freq;
    return params.actuation_strength * mass * std::tanh(amp_sin * std::sin(phase) + amp_cos * std::cos(phase));
}

SceneSpec build_scene(const ParticleField& field, const SceneOptions& options, const SimParams& params) {
    const auto& ws = field.workspace;
    SceneSpec scene;
    scene.cm_per_unit = params.cm_per_unit;

    int lowest_row = ws.ny;
    int top_row = -1;
    for (int j = 0; j < ws.ny; ++j) {
        for (int i = 0; i < ws.nx; ++i) {
            if (field.alive[ws.index(i, j)]) {
                lowest_row = std::min(lowest_row, j);
                top_row = std::max(top_row, j);
            }
        }
    }
    if (top_row < 0) throw DegenerateBody("empty robot");

    // the lowest alive row rests half a lattice spacing above the floor
    scene.origin = {params.left_offset,
                    params.floor_height() + options.lift - lowest_row * ws.spacing_y() / params.cm_per_unit};

    auto push = [&scene](const Vec2& pos, double m, double e, double a0, double a1, std::int64_t src) {
        scene.position.push_back(pos);
        scene.mass.push_back(m);
        scene.elasticity.push_back(e);
        scene.amplitude[0].push_back(a0);
        scene.amplitude[1].push_back(a1);
        scene.source.push_back(src);
    };

    for (int j = 0; j < ws.ny; ++j) {
        for (int i = 0; i < ws.nx; ++i) {
            const std::size_t idx = ws.index(i, j);
            if (!field.alive[idx]) continue;
            const Vec2 pos = scene.origin + ws.site(i, j) / params.cm_per_unit;
            push(pos, field.mass[idx], field.elasticity[idx], field.amplitude[0][idx], field.amplitude[1][idx],
                 static_cast<std::int64_t>(idx));
        }
    }
    scene.robot_count = scene.position.size();

    if (options.object) {
        const ObjectConfig& obj = *options.object;
        if (obj.particle_count <= 0 || !(obj.radius_cm > 0.0)) throw std::invalid_argument("bad object configuration");
        const double sx = ws.spacing_x();
        const double sy = ws.spacing_y();
        const double top_cm = (top_row + 1) * sy;
        const Vec2 center_cm(0.5 * ws.width_cm, top_cm + obj.radius_cm + 0.5 * sy);

        // the object is the particle_count lattice sites closest to its centre
        struct Site {
            double dist;
            Vec2 offset;
        };
        std::vector<Site> sites;
        const int reach = static_cast<int>(std::ceil(3.0 * obj.radius_cm / std::min(sx, sy))) + 2;
        for (int b = -reach; b < reach; ++b) {
            for (int a = -reach; a < reach; ++a) {
                const Vec2 off((a + 0.5) * sx, (b + 0.5) * sy);
                sites.push_back({off.norm(), off});
            }
        }
        if (static_cast<std::size_t>(obj.particle_count) > sites.size()) throw std::invalid_argument("object too large");
        std::stable_sort(sites.begin(), sites.end(), [](const Site& l, const Site& r) { return l.dist < r.dist; });
        for (int q = 0; q < obj.particle_count; ++q) {
            const Vec2 pos = scene.origin + (center_cm + sites[static_cast<std::size_t>(q)].offset) / params.cm_per_unit;
            push(pos, 1.0, params.youngs, 0.0, 0.0, -1);
        }
        scene.object_count = static_cast<std::size_t>(obj.particle_count);
    }
    return scene;
}

SimState initial_state(const SceneSpec& scene) {
    SimState s;
    s.step = 0;
    s.x = scene.position;
    s.v.assign(scene.size(), Vec2::Zero());
    s.C.assign(scene.size(), Mat2::Zero());
    s.F.assign(scene.size(), Mat2::Identity());
    return s;
}

SimTrajectory simulate(const SceneSpec& scene, const SimParams& outer) {
    outer.validate();
    const SimParams params = outer.integration();
    if (scene.robot_count == 0) throw DegenerateBody("empty robot");
    const StepConstants k(params);
    Grid grid(params.grid);

    SimTrajectory traj;
    traj.stride = outer.substeps;
    traj.states.reserve(static_cast<std::size_t>(params.steps) + 1);
    traj.states.push_back(initial_state(scene));

    for (int t = 0; t < params.steps; ++t) {
        const SimState& cur = traj.states.back();
        scatter(params, k, scene, cur, grid);
        grid.update(params);

        SimState next;
        next.step = t + 1;
        next.x.resize(scene.size());
        next.v.resize(scene.size());
        next.C.resize(scene.size());
        next.F.resize(scene.size());
        for (std::size_t i = 0; i < scene.size(); ++i) {
            const Stencil s = make_stencil(cur.x[i], k.inv_dx);
            Vec2 v = Vec2::Zero();
            Mat2 C = Mat2::Zero();
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    const double w = s.wx[a] * s.wy[b];
                    const Vec2& gv = grid.vout(grid.node(s.bx + a, s.by + b));
                    v += w * gv;
                    C += (4.0 * k.inv_dx * w) * gv * Vec2(a - s.fx, b - s.fy).transpose();
                }
            }
            next.v[i] = v;
            next.C[i] = C;
            next.x[i] = cur.x[i] + params.dt * v;
            next.F[i] = (Mat2::Identity() + k.dt * cur.C[i]) * cur.F[i];
            if (!next.x[i].allFinite() || !v.allFinite() || !C.allFinite() || !next.F[i].allFinite()) {
                throw SimulationError(t, "non-finite particle state");
            }
            traj.min_jacobian = std::min(traj.min_jacobian, next.F[i].determinant());
        }
        traj.states.push_back(std::move(next));
    }

    traj.robot_com_cm.reserve(static_cast<std::size_t>(outer.steps) + 1);
    for (std::size_t t = 0; t < traj.states.size(); t += static_cast<std::size_t>(traj.stride)) {
        const SimState& s = traj.states[t];
        traj.robot_com_cm.push_back(robot_com(scene, s));
        if (scene.has_object()) traj.object_com_cm.push_back(object_com(scene, s));
    }
    return traj;
}

ParticleGradients adjoint(const SimTrajectory& trajectory, const SceneSpec& scene, const SimParams& outer,
                          const TrajectoryCotangent& cotangent) {
    outer.validate();
    const SimParams params = outer.integration();
    const std::size_t np = scene.size();
    const auto stride = static_cast<std::size_t>(outer.substeps);
    if (trajectory.states.size() != static_cast<std::size_t>(params.steps) + 1 || trajectory.stride != outer.substeps) {
        throw std::invalid_argument("trajectory length does not match the step count");
    }
    const std::size_t outer_states = static_cast<std::size_t>(outer.steps) + 1;
    for (const auto& s : trajectory.states) {
        if (s.x.size() != np) throw std::invalid_argument("trajectory does not match scene");
    }
    if (!cotangent.final_position.empty() && cotangent.final_position.size() != np) {
        throw std::invalid_argument("final-position cotangent does not match scene");
    }
    if (!cotangent.robot_com.empty() && cotangent.robot_com.size() != outer_states) {
        throw std::invalid_argument("robot CoM cotangent does not match trajectory");
    }
    if (!cotangent.object_com.empty() && (cotangent.object_com.size() != outer_states || !scene.has_object())) {
        throw std::invalid_argument("object CoM cotangent does not match trajectory");
    }

    const StepConstants k(params);
    const double to_sim = scene.cm_per_unit;  // d(cm)/d(sim)
    Grid grid(params.grid);

    ParticleGradients out;
    out.mass.assign(np, 0.0);
    out.elasticity.assign(np, 0.0);
    for (auto& a : out.amplitude) a.assign(np, 0.0);

    std::vector<Vec2> xb(np, Vec2::Zero());
    std::vector<Vec2> vb(np, Vec2::Zero());
    std::vector<Mat2> Cb(np, Mat2::Zero());
    std::vector<Mat2> Fb(np, Mat2::Zero());

    // t indexes fine states; CoM cotangents live on outer steps only
    auto add_com = [&](std::size_t t) {
        if (t % stride != 0) return;
        t /= stride;
        if (!cotangent.robot_com.empty()) {
            const Vec2 g = cotangent.robot_com[t] * to_sim / static_cast<double>(scene.robot_count);
            for (std::size_t i = 0; i < scene.robot_count; ++i) xb[i] += g;
        }
        if (!cotangent.object_com.empty()) {
            const Vec2 g = cotangent.object_com[t] * to_sim / static_cast<double>(scene.object_count);
            for (std::size_t i = scene.robot_count; i < np; ++i) xb[i] += g;
        }
    };

    if (!cotangent.final_position.empty()) {
        for (std::size_t i = 0; i < np; ++i) xb[i] = cotangent.final_position[i] * to_sim;
    }
    add_com(trajectory.states.size() - 1);

    std::vector<Vec2> vout_bar(static_cast<std::size_t>(params.grid) * params.grid);
    std::vector<Vec2> mom_bar(vout_bar.size());
    std::vector<double> mass_bar(vout_bar.size());
    std::vector<Vec2> fx_bar(np);

    const Lame lame = k.lame;
    for (int t = params.steps - 1; t >= 0; --t) {
        const SimState& cur = trajectory.states[static_cast<std::size_t>(t)];
        const double phase = t * params.dt * params.actuation_freq;
        const double sin_t = std::sin(phase);
        const double cos_t = std::cos(phase);

        scatter(params, k, scene, cur, grid);
        grid.update(params);

        // x_{t+1} = x_t + dt v_{t+1}; F_{t+1} = Fn
        std::fill(vout_bar.begin(), vout_bar.end(), Vec2::Zero());
        for (std::size_t i = 0; i < np; ++i) {
            const Vec2 vnb = vb[i] + params.dt * xb[i];
            const Mat2& Cnb = Cb[i];
            const Stencil s = make_stencil(cur.x[i], k.inv_dx);
            Vec2 fb = Vec2::Zero();
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    const double w = s.wx[a] * s.wy[b];
                    const std::size_t nk = grid.node(s.bx + a, s.by + b);
                    const Vec2& gv = grid.vout(nk);
                    const Vec2 dposc(a - s.fx, b - s.fy);
                    const Vec2 Cd = Cnb * dposc;
                    vout_bar[nk] += w * vnb + (4.0 * k.inv_dx * w) * Cd;
                    const double wb = vnb.dot(gv) + 4.0 * k.inv_dx * gv.dot(Cd);
                    fb -= (4.0 * k.inv_dx * w) * (Cnb.transpose() * gv);
                    fb.x() += wb * s.dwx[a] * s.wy[b];
                    fb.y() += wb * s.wx[a] * s.dwy[b];
                }
            }
            fx_bar[i] = fb;
        }

        for (std::size_t nk = 0; nk < vout_bar.size(); ++nk) {
            const double m = grid.mass(nk);
            if (m <= 0.0) {
                mom_bar[nk] = Vec2::Zero();
                mass_bar[nk] = 0.0;
                continue;
            }
            const Vec2 vin_bar = grid.boundary_vjp(nk, vout_bar[nk], params.friction);
            mom_bar[nk] = vin_bar / m;
            mass_bar[nk] = -vin_bar.dot(grid.vin(nk)) / m;
        }

        for (std::size_t i = 0; i < np; ++i) {
            const Stencil s = make_stencil(cur.x[i], k.inv_dx);
            const Mat2& C = cur.C[i];
            const Mat2& F = cur.F[i];
            const Constitutive c = evaluate(k, params, scene, i, C, F, sin_t, cos_t);
            const double m = scene.mass[i];
            const Vec2 vd = k.velocity_decay * cur.v[i];
            const Vec2 momentum = m * vd;

            double mb = 0.0;
            Vec2 vdb = Vec2::Zero();
            Mat2 affine_b = Mat2::Zero();
            Vec2 fb = fx_bar[i];
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    const double w = s.wx[a] * s.wy[b];
                    const std::size_t nk = grid.node(s.bx + a, s.by + b);
                    const Vec2 dpos((a - s.fx) * k.dx, (b - s.fy) * k.dx);
                    const Vec2& gmb = mom_bar[nk];
                    const double gmassb = mass_bar[nk];
                    const double wb = gmb.dot(momentum + c.affine * dpos) + gmassb * m;
                    mb += w * (gmb.dot(vd) + gmassb);
                    vdb += (w * m) * gmb;
                    affine_b += w * gmb * dpos.transpose();
                    fb -= (w * k.dx) * (c.affine.transpose() * gmb);
                    fb.x() += wb * s.dwx[a] * s.wy[b];
                    fb.y() += wb * s.wx[a] * s.dwy[b];
                }
            }

            // affine = -stress_scale * cauchy + m C
            const Mat2 G = -k.stress_scale * affine_b;
            mb += contract(affine_b, C);
            Mat2 Cbar = m * affine_b;

            // actuation
            const double th = std::tanh(c.drive);
            const double wbar = G(1, 1);
            mb += params.actuation_strength * th * wbar;
            const double ub = params.actuation_strength * m * (1.0 - th * th) * wbar;
            out.amplitude[0][i] += ub * sin_t;
            out.amplitude[1][i] += ub * cos_t;

            // internal viscosity
            mb += k.viscosity * contract(G, sym(C));
            Cbar += k.viscosity * m * sym(G);

            // fixed-corotated elasticity
            const Mat2 X = c.Fn - c.R;
            Mat2 Fnb = Fb[i];
            Fnb += 2.0 * c.mu * (G * c.Fn + G.transpose() * X);
            const Mat2 Rb = -2.0 * c.mu * G * c.Fn;
            const double mub = 2.0 * contract(G, X * c.Fn.transpose());
            const double trG = G.trace();
            const double lab = c.J * (c.J - 1.0) * trG;
            const double Jb = c.lambda * (2.0 * c.J - 1.0) * trG;
            Fnb += Jb * cofactor(c.Fn);
            polar_rotation_vjp(c.Fn, Rb, Fnb);
            out.elasticity[i] += mub * lame.mu_per_e + lab * lame.lambda_per_e;
            out.mass[i] += mb;

            // Fn = (I + dt C) F
            Fb[i] = (Mat2::Identity() + k.dt * C).transpose() * Fnb;
            Cbar += k.dt * Fnb * F.transpose();

            Cb[i] = Cbar;
            vb[i] = k.velocity_decay * vdb;
            xb[i] += k.inv_dx * fb;
        }
        add_com(static_cast<std::size_t>(t));
    }
    return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<Vec2>& robot_com_cm,
                          const std::vector<Vec2>& object_com_cm) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const bool obj = !object_com_cm.empty();
    out << "step,com_x_cm,com_y_cm" << (obj ? ",obj_x_cm,obj_y_cm" : "") << '\n';
    out << std::setprecision(10);
    for (std::size_t t = 0; t < robot_com_cm.size(); ++t) {
        out << t << ',' << robot_com_cm[t].x() << ',' << robot_com_cm[t].y();
        if (obj) out << ',' << object_com_cm[t].x() << ',' << object_com_cm[t].y();
        out << '\n';
    }
}

void write_trajectory_csv(const std::filesystem::path& path, const SimTrajectory& trajectory) {
    write_trajectory_csv(path, trajectory.robot_com_cm, trajectory.object_com_cm);
}

namespace {

constexpr char kDumpMagic[8] = {'M', 'G', 'S', 'T', 'A', 'T', 'E', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw std::runtime_error("truncated state dump");
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void write_state_dump(const std::filesystem::path& path, const SimState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kDumpMagic, sizeof(kDumpMagic));
    put_le<std::uint64_t>(out, state.x.size());
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(state.step));
    for (std::size_t i = 0; i < state.x.size(); ++i) {
        for (double v : {state.x[i].x(), state.x[i].y(), state.v[i].x(), state.v[i].y(), state.C[i](0, 0),
                         state.C[i](0, 1), state.C[i](1, 0), state.C[i](1, 1), state.F[i](0, 0), state.F[i](0, 1),
                         state.F[i](1, 0), state.F[i](1, 1)}) {
            put_le<double>(out, v);
        }
    }
}

SimState read_state_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kDumpMagic, sizeof(magic)) != 0) throw std::runtime_error("not a state dump");
    const auto count = get_le<std::uint64_t>(in);
    SimState s;
    s.step = static_cast<int>(get_le<std::uint64_t>(in));
    s.x.resize(count);
    s.v.resize(count);
    s.C.resize(count);
    s.F.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        double r[12];
        for (double& v : r) v = get_le<double>(in);
        s.x[i] = {r[0], r[1]};
        s.v[i] = {r[2], r[3]};
        s.C[i] << r[4], r[5], r[6], r[7];
        s.F[i] << r[8], r[9], r[10], r[11];
    }
    return s;
}

}  // namespace morphogen
