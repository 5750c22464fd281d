#include "morphogen/genome.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace morphogen {

namespace {

inline double ipow(double base, int power) {
    double r = 1.0;
    for (int i = 0; i < power; ++i) r *= base;
    return r;
}

void check_power(int power, const char* what) {
    if (power < 1 || power > 3) throw std::invalid_argument(std::string(what) + " interpolation power must be 1, 2 or 3");
}

void check_mask(const DesignGenome& genome) {
    const auto& ws = genome.workspace;
    if (genome.body_mask.nx != ws.nx || genome.body_mask.ny != ws.ny) {
        throw std::invalid_argument("body mask dimensions do not match the particle lattice");
    }
}

struct Nearest {
    int index = -1;
    double distance = 1.0;  // normalized, capped at 1
};

template <typename Patches, typename Accept>
Nearest nearest_patch(const Vec2& p, const Patches& patches, Accept accept) {
    Nearest best;
    for (std::size_t k = 0; k < patches.size(); ++k) {
        const auto& patch = patches[k];
        if (!patch.active || !(patch.radius > 0.0) || !accept(patch)) continue;
        const double dn = (p - patch.center).norm() / patch.radius;
        if (dn < best.distance) {
            best.distance = dn;
            best.index = static_cast<int>(k);
        }
    }
    return best;
}

}  // namespace

std::string to_string(Channel c) { return c == Channel::Sine ? "sine" : "cosine"; }

Channel channel_from_string(const std::string& s) {
    if (s == "sine") return Channel::Sine;
    if (s == "cosine") return Channel::Cosine;
    throw std::invalid_argument("unknown muscle channel '" + s + "'");
}

double RadiusDistribution::sample(std::mt19937_64& rng) const {
    double r = location_cm;
    switch (family) {
        case RadiusFamily::Normal:
            r = std::normal_distribution<double>(location_cm, scale_cm)(rng);
            break;
        case RadiusFamily::Uniform:
            r = std::uniform_real_distribution<double>(location_cm - scale_cm, location_cm + scale_cm)(rng);
            break;
        case RadiusFamily::Constant:
            break;
    }
    return std::max(r, 1e-6);
}

double radius_for_coverage(double coverage, double area_cm2, int count) {
    if (count <= 0) throw std::invalid_argument("patch count must be positive");
    if (!(coverage >= 0.0) || !(area_cm2 > 0.0)) throw std::invalid_argument("coverage and area must be non-negative");
    return std::sqrt(coverage * area_cm2 / (std::numbers::pi * count));
}

RadiusDistribution RadiusDistribution::from_coverage(const std::string& name, double coverage, const Workspace& ws,
                                                     int count) {
    const double mu = radius_for_coverage(coverage, ws.area(), count);
    const double normalized = mu / ws.width_cm;
    const double squared = normalized * normalized * ws.width_cm;
    if (name == "normal") return {RadiusFamily::Normal, mu, mu};
    if (name == "normal_sq") return {RadiusFamily::Normal, mu, squared};
    if (name == "uniform") return {RadiusFamily::Uniform, mu, mu};
    if (name == "uniform_sq") return {RadiusFamily::Uniform, mu, squared};
    if (name == "constant") return {RadiusFamily::Constant, mu, 0.0};
    throw std::invalid_argument("unknown radius distribution '" + name + "'");
}

double grid_coverage(std::span<const double> radii, double area_cm2) {
    if (!(area_cm2 > 0.0)) throw std::invalid_argument("workspace area must be positive");
    double sum = 0.0;
    for (double r : radii) sum += r * r;
    return std::numbers::pi / area_cm2 * sum;
}

double grid_coverage(const std::vector<VoidPatch>& voids, double area_cm2) {
    std::vector<double> radii;
    radii.reserve(voids.size());
    for (const auto& v : voids) radii.push_back(v.radius);
    return grid_coverage(radii, area_cm2);
}

double grid_coverage(const std::vector<MusclePatch>& muscles, double area_cm2) {
    std::vector<double> radii;
    radii.reserve(muscles.size());
    for (const auto& m : muscles) radii.push_back(m.radius);
    return grid_coverage(radii, area_cm2);
}

std::size_t ParticleField::alive_count() const {
    return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), std::uint8_t{1}));
}

std::size_t ParticleField::body_count() const {
    return static_cast<std::size_t>(std::count(in_body.begin(), in_body.end(), std::uint8_t{1}));
}

double ParticleField::mean_mass() const {
    const auto n = body_count();
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (in_body[i]) sum += mass[i];
    }
    return sum / static_cast<double>(n);
}

Vec2 ParticleField::rest_position(std::size_t idx) const {
    const int i = static_cast<int>(idx % static_cast<std::size_t>(workspace.nx));
    const int j = static_cast<int>(idx / static_cast<std::size_t>(workspace.nx));
    return workspace.site(i, j);
}

Vec2 sample_in_mask(const Workspace& ws, const BodyMask& mask, std::mt19937_64& rng) {
    if (mask.count() == 0) throw DegenerateBody("mask has no body cells");
    std::uniform_real_distribution<double> ux(0.0, ws.width_cm);
    std::uniform_real_distribution<double> uy(0.0, ws.height_cm);
    for (;;) {
        const Vec2 p(ux(rng), uy(rng));
        const int i = std::min(ws.nx - 1, static_cast<int>(p.x() / ws.spacing_x()));
        const int j = std::min(ws.ny - 1, static_cast<int>(p.y() / ws.spacing_y()));
        if (mask.at(i, j)) return p;
    }
}

DesignGenome sample_initial(const DesignSettings& settings, std::uint64_t seed) {
    if (settings.body_mask.count() == 0) throw DegenerateBody("mask has no body cells");
    if (settings.num_voids < 0 || settings.num_muscles < 0) throw std::invalid_argument("patch counts must be non-negative");
    DesignGenome genome;
    genome.workspace = settings.workspace;
    genome.body_mask = settings.body_mask;
    check_mask(genome);

    std::mt19937_64 rng(seed);
    genome.voids.reserve(static_cast<std::size_t>(settings.num_voids));
    for (int k = 0; k < settings.num_voids; ++k) {
        VoidPatch v;
        v.center = sample_in_mask(settings.workspace, settings.body_mask, rng);
        v.radius = settings.void_radius.sample(rng);
        genome.voids.push_back(v);
    }
    genome.muscles.reserve(static_cast<std::size_t>(settings.num_muscles));
    for (int c = 0; c < settings.num_muscles; ++c) {
        MusclePatch m;
        m.center = sample_in_mask(settings.workspace, settings.body_mask, rng);
        m.radius = settings.muscle_radius.sample(rng);
        m.channel = settings.antiphase && (c % 2 == 1) ? Channel::Cosine : Channel::Sine;
        genome.muscles.push_back(m);
    }
    refresh_activity(genome);
    return genome;
}

void refresh_activity(DesignGenome& genome) {
    for (auto& v : genome.voids) v.active = genome.workspace.contains(v.center) && v.radius > 0.0;
    for (auto& m : genome.muscles) m.active = genome.workspace.contains(m.center) && m.radius > 0.0;
}

ParticleField rasterize_mass(const DesignGenome& genome, int power, double threshold, double youngs_modulus) {
    check_power(power, "void");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("removal threshold must lie in (0, 1)");
    check_mask(genome);
    const auto& ws = genome.workspace;
    const std::size_t n = ws.size();

    ParticleField field;
    field.workspace = ws;
    field.in_body.assign(n, 0);
    field.smooth_mass.assign(n, 0.0);
    field.mass.assign(n, 0.0);
    field.elasticity.assign(n, 0.0);
    field.alive.assign(n, 0);
    field.passive_border.assign(n, 0);
    for (auto& a : field.amplitude) a.assign(n, 0.0);

    for (int j = 0; j < ws.ny; ++j) {
        for (int i = 0; i < ws.nx; ++i) {
            if (!genome.body_mask.at(i, j)) continue;
            const std::size_t idx = ws.index(i, j);
            field.in_body[idx] = 1;
            const Nearest near = nearest_patch(ws.site(i, j), genome.voids, [](const VoidPatch&) { return true; });
            const double m = ipow(near.distance, power);
            field.smooth_mass[idx] = m;
            if (m >= threshold) {
                field.mass[idx] = m;
                field.elasticity[idx] = m * youngs_modulus;
                field.alive[idx] = 1;
            }
        }
    }
    return field;
}

std::vector<std::uint8_t> passive_border(const ParticleField& field, double border_cm) {
    const auto& ws = field.workspace;
    std::vector<std::uint8_t> border(ws.size(), 0);
    const int reach_i = static_cast<int>(std::ceil(border_cm / ws.spacing_x()));
    const int reach_j = static_cast<int>(std::ceil(border_cm / ws.spacing_y()));
    for (int j = 0; j < ws.ny; ++j) {
        for (int i = 0; i < ws.nx; ++i) {
            const std::size_t idx = ws.index(i, j);
            if (!field.alive[idx]) continue;
            const Vec2 p = ws.site(i, j);
            const double edge = std::min({p.x(), ws.width_cm - p.x(), p.y(), ws.height_cm - p.y()});
            bool near_edge = edge <= border_cm;
            for (int dj = -reach_j; dj <= reach_j && !near_edge; ++dj) {
                for (int di = -reach_i; di <= reach_i && !near_edge; ++di) {
                    const int ii = i + di;
                    const int jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= ws.nx || jj >= ws.ny) continue;
                    if (field.alive[ws.index(ii, jj)]) continue;
                    if ((ws.site(ii, jj) - p).norm() <= border_cm) near_edge = true;
                }
            }
            border[idx] = near_edge ? 1 : 0;
        }
    }
    return border;
}

void rasterize_amplitude(const DesignGenome& genome, int power, bool constrained, double border_cm,
                         ParticleField& field) {
    check_power(power, "muscle");
    const auto& ws = genome.workspace;
    if (field.size() != ws.size()) throw std::invalid_argument("particle field does not match genome lattice");
    field.passive_border = constrained ? passive_border(field, border_cm) : std::vector<std::uint8_t>(ws.size(), 0);
    for (int ch = 0; ch < kChannels; ++ch) {
        const auto channel = static_cast<Channel>(ch);
        auto& amp = field.amplitude[static_cast<std::size_t>(ch)];
        amp.assign(ws.size(), 0.0);
        for (int j = 0; j < ws.ny; ++j) {
            for (int i = 0; i < ws.nx; ++i) {
                const std::size_t idx = ws.index(i, j);
                if (!field.in_body[idx] || field.passive_border[idx]) continue;
                const Nearest near = nearest_patch(ws.site(i, j), genome.muscles,
                                                   [channel](const MusclePatch& m) { return m.channel == channel; });
                amp[idx] = interpolated_amplitude(near.distance, power);
            }
        }
    }
}

ParticleField rasterize(const DesignGenome& genome, const RasterSettings& settings) {
    ParticleField field = rasterize_mass(genome, settings.void_power, settings.threshold, settings.youngs_modulus);
    rasterize_amplitude(genome, settings.muscle_power, settings.constrained, settings.border_cm, field);
    return field;
}

PatchGradient PatchGradient::zeros(const DesignGenome& genome) {
    PatchGradient g;
    g.void_center.assign(genome.voids.size(), Vec2::Zero());
    g.void_radius.assign(genome.voids.size(), 0.0);
    g.muscle_center.assign(genome.muscles.size(), Vec2::Zero());
    g.muscle_radius.assign(genome.muscles.size(), 0.0);
    return g;
}

double PatchGradient::void_magnitude(std::size_t k) const {
    return std::sqrt(void_center[k].squaredNorm() + void_radius[k] * void_radius[k]);
}

double PatchGradient::muscle_magnitude(std::size_t c) const { return muscle_center[c].norm(); }

PatchGradient backprop_patches(const DesignGenome& genome, const RasterSettings& settings,
                               std::span<const double> grad_mass,
                               const std::array<std::vector<double>, kChannels>& grad_amplitude) {
    check_power(settings.void_power, "void");
    check_power(settings.muscle_power, "muscle");
    check_mask(genome);
    const auto& ws = genome.workspace;
    const std::size_t n = ws.size();
    if (grad_mass.size() != n) throw std::invalid_argument("mass gradient has the wrong particle count");
    for (const auto& g : grad_amplitude) {
        if (g.size() != n) throw std::invalid_argument("amplitude gradient has the wrong particle count");
    }

    std::vector<std::uint8_t> border(n, 0);
    if (settings.constrained) {
        border = passive_border(rasterize_mass(genome, settings.void_power, settings.threshold), settings.border_cm);
    }

    static const double kRootTenth = std::sqrt(0.1);
    PatchGradient out = PatchGradient::zeros(genome);
    for (int j = 0; j < ws.ny; ++j) {
        for (int i = 0; i < ws.nx; ++i) {
            if (!genome.body_mask.at(i, j)) continue;
            const std::size_t idx = ws.index(i, j);
            const Vec2 p = ws.site(i, j);

            if (grad_mass[idx] != 0.0) {
                const Nearest near = nearest_patch(p, genome.voids, [](const VoidPatch&) { return true; });
                if (near.index >= 0) {
                    const auto k = static_cast<std::size_t>(near.index);
                    const VoidPatch& v = genome.voids[k];
                    const double dm_dd = settings.void_power * ipow(near.distance, settings.void_power - 1);
                    const double g = grad_mass[idx] * dm_dd;
                    const Vec2 offset = v.center - p;
                    const double dist = offset.norm();
                    if (dist > 0.0) out.void_center[k] += g * offset / (dist * v.radius);
                    out.void_radius[k] -= g * dist / (v.radius * v.radius);
                }
            }

            if (border[idx]) continue;
            for (int ch = 0; ch < kChannels; ++ch) {
                const double ga = grad_amplitude[static_cast<std::size_t>(ch)][idx];
                if (ga == 0.0) continue;
                const auto channel = static_cast<Channel>(ch);
                const Nearest near = nearest_patch(p, genome.muscles,
                                                   [channel](const MusclePatch& m) { return m.channel == channel; });
                if (near.index < 0) continue;
                const auto c = static_cast<std::size_t>(near.index);
                const MusclePatch& m = genome.muscles[c];
                const double da_dd = -settings.muscle_power * kRootTenth *
                                     ipow(1.0 - near.distance * kRootTenth, settings.muscle_power - 1);
                const double g = ga * da_dd;
                const Vec2 offset = m.center - p;
                const double dist = offset.norm();
                if (dist > 0.0) out.muscle_center[c] += g * offset / (dist * m.radius);
                out.muscle_radius[c] -= g * dist / (m.radius * m.radius);
            }
        }
    }
    return out;
}

ReplacementResult replace_dead_patches(const DesignGenome& genome, const PatchGradient& grads,
                                       const DesignSettings& settings, std::mt19937_64& rng) {
    if (grads.void_center.size() != genome.voids.size() || grads.muscle_center.size() != genome.muscles.size()) {
        throw std::invalid_argument("patch gradient does not match genome");
    }
    ReplacementResult result{genome, {}, {}};
    const auto& ws = genome.workspace;
    for (std::size_t k = 0; k < genome.voids.size(); ++k) {
        const VoidPatch& v = genome.voids[k];
        const bool dead = v.radius <= kDeadRadiusCm || !ws.contains(v.center) || grads.void_magnitude(k) == 0.0;
        if (!dead) continue;
        VoidPatch& fresh = result.genome.voids[k];
        fresh.center = sample_in_mask(ws, genome.body_mask, rng);
        fresh.radius = settings.void_radius.sample(rng);
        result.replaced_voids.push_back(k);
    }
    for (std::size_t c = 0; c < genome.muscles.size(); ++c) {
        const MusclePatch& m = genome.muscles[c];
        const bool dead = !ws.contains(m.center) || grads.muscle_magnitude(c) == 0.0;
        if (!dead) continue;
        MusclePatch& fresh = result.genome.muscles[c];
        fresh.center = sample_in_mask(ws, genome.body_mask, rng);
        fresh.radius = settings.muscle_radius.sample(rng);
        result.replaced_muscles.push_back(c);
    }
    refresh_activity(result.genome);
    return result;
}

void write_genome(std::ostream& out, const DesignGenome& genome) {
    const auto& ws = genome.workspace;
    out << std::setprecision(17);
    out << "GENOME " << genome.voids.size() << ' ' << genome.muscles.size() << ' ' << genome.body_mask.nx << ' '
        << genome.body_mask.ny << ' ' << ws.width_cm << ' ' << ws.height_cm << '\n';
    for (const auto& v : genome.voids) {
        out << "V " << v.center.x() << ' ' << v.center.y() << ' ' << v.radius << ' ' << (v.active ? 1 : 0) << '\n';
    }
    for (const auto& m : genome.muscles) {
        out << "M " << m.center.x() << ' ' << m.center.y() << ' ' << m.radius << ' ' << to_string(m.channel) << ' '
            << (m.active ? 1 : 0) << '\n';
    }
    for (int j = genome.body_mask.ny - 1; j >= 0; --j) {
        out << "B ";
        for (int i = 0; i < genome.body_mask.nx; ++i) out << (genome.body_mask.at(i, j) ? '1' : '0');
        out << '\n';
    }
}

DesignGenome read_genome(std::istream& in) {
    std::string line;
    auto fail = [](const std::string& why) { throw std::runtime_error("malformed genome snapshot: " + why); };
    if (!std::getline(in, line)) fail("missing header");
    std::istringstream header(line);
    std::string tag;
    std::size_t nk = 0;
    std::size_t nc = 0;
    DesignGenome g;
    header >> tag >> nk >> nc >> g.workspace.nx >> g.workspace.ny >> g.workspace.width_cm >> g.workspace.height_cm;
    if (tag != "GENOME" || !header) fail("bad header '" + line + "'");
    if (g.workspace.nx <= 0 || g.workspace.ny <= 0) fail("bad mask dimensions");

    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream rec(line);
        rec >> tag;
        if (tag == "V") {
            VoidPatch v;
            int active = 0;
            double x = 0, y = 0;
            rec >> x >> y >> v.radius >> active;
            if (!rec) fail("bad void line '" + line + "'");
            v.center = {x, y};
            v.active = active != 0;
            g.voids.push_back(v);
        } else if (tag == "M") {
            MusclePatch m;
            std::string channel;
            int active = 0;
            double x = 0, y = 0;
            rec >> x >> y >> m.radius >> channel >> active;
            if (!rec) fail("bad muscle line '" + line + "'");
            m.center = {x, y};
            m.channel = channel_from_string(channel);
            m.active = active != 0;
            g.muscles.push_back(m);
        } else if (tag == "B") {
            std::string bits;
            rec >> bits;
            rows.push_back(bits);
        } else {
            fail("unknown record '" + tag + "'");
        }
    }
    if (g.voids.size() != nk || g.muscles.size() != nc) fail("patch counts disagree with header");

    if (rows.empty()) {
        g.body_mask = BodyMask::rectangle(g.workspace.nx, g.workspace.ny);
    } else {
        if (rows.size() != static_cast<std::size_t>(g.workspace.ny)) fail("mask row count disagrees with header");
        g.body_mask.nx = g.workspace.nx;
        g.body_mask.ny = g.workspace.ny;
        g.body_mask.provenance = "snapshot";
        g.body_mask.cells.assign(g.workspace.size(), 0);
        for (int r = 0; r < g.workspace.ny; ++r) {
            const auto& bits = rows[static_cast<std::size_t>(r)];
            if (bits.size() != static_cast<std::size_t>(g.workspace.nx)) fail("mask row has wrong width");
            const int j = g.workspace.ny - 1 - r;
            for (int i = 0; i < g.workspace.nx; ++i) {
                if (bits[static_cast<std::size_t>(i)] != '0' && bits[static_cast<std::size_t>(i)] != '1') fail("bad mask bit");
                g.body_mask.cells[g.workspace.index(i, j)] = bits[static_cast<std::size_t>(i)] == '1' ? 1 : 0;
            }
        }
    }
    if (g.body_mask.count() == 0) throw DegenerateBody("mask has no body cells");
    return g;
}

}  // namespace morphogen
