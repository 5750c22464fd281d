#pragma once

// Independent reference implementations and random generators shared by the tests.

#include "morphogen/genome.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using morphogen::DesignGenome;
using morphogen::Vec2;

// Direct evaluation of the void rule at one point: the square (or q-th power) of
// the smallest capped normalized distance.
inline double smooth_mass(const DesignGenome& g, const Vec2& p, int q) {
    double d = 1.0;
    for (const auto& v : g.voids) {
        if (!v.active || v.radius <= 0.0) continue;
        d = std::min(d, std::min(1.0, std::hypot(p.x() - v.center.x(), p.y() - v.center.y()) / v.radius));
    }
    return std::pow(d, q);
}

inline double amplitude(const DesignGenome& g, const Vec2& p, int q, morphogen::Channel ch) {
    double d = 1.0;
    for (const auto& m : g.muscles) {
        if (!m.active || m.radius <= 0.0 || m.channel != ch) continue;
        d = std::min(d, std::min(1.0, std::hypot(p.x() - m.center.x(), p.y() - m.center.y()) / m.radius));
    }
    if (d >= 1.0) return 0.0;
    return std::pow(1.0 - d * std::sqrt(0.1), q);
}

// Small random genome over a full rectangular mask.
inline DesignGenome random_genome(std::mt19937_64& rng, int nx, int ny, double spacing, int voids, int muscles,
                                  bool antiphase = false) {
    DesignGenome g;
    g.workspace = morphogen::Workspace{spacing * nx, spacing * ny, nx, ny};
    g.body_mask = morphogen::BodyMask::rectangle(nx, ny);
    std::uniform_real_distribution<double> ux(0.0, g.workspace.width_cm);
    std::uniform_real_distribution<double> uy(0.0, g.workspace.height_cm);
    std::uniform_real_distribution<double> ur(0.3 * spacing, 3.0 * spacing);
    for (int k = 0; k < voids; ++k) g.voids.push_back({Vec2(ux(rng), uy(rng)), ur(rng), true});
    for (int c = 0; c < muscles; ++c) {
        const auto ch = antiphase && c % 2 ? morphogen::Channel::Cosine : morphogen::Channel::Sine;
        g.muscles.push_back({Vec2(ux(rng), uy(rng)), ur(rng), ch, true});
    }
    return g;
}

}  // namespace oracle
