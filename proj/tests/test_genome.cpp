#include "morphogen/genome.hpp"
#include "morphogen/mask.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace morphogen;

namespace {

DesignSettings default_settings() {
    DesignSettings s;
    s.void_radius = RadiusDistribution::from_coverage("normal_sq", 0.60, s.workspace, 64);
    s.muscle_radius = RadiusDistribution::from_coverage("constant", 1.15, s.workspace, 64);
    return s;
}

// One particle at (2, 0.5) in a 4 x 1 cm strip.
DesignGenome single_site() {
    DesignGenome g;
    g.workspace = Workspace{4.0, 1.0, 1, 1};
    g.body_mask = BodyMask::rectangle(1, 1);
    return g;
}

double loss_of(const ParticleField& f, const std::vector<double>& gm, const std::array<std::vector<double>, 2>& ga) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        s += gm[i] * f.smooth_mass[i] + ga[0][i] * f.amplitude[0][i] + ga[1][i] * f.amplitude[1][i];
    }
    return s;
}

// Smallest gap between a particle's nearest and second-nearest normalized
// distance, or to the d = 1 cap, over every particle and both patch kinds.
double kink_clearance(const DesignGenome& g) {
    double clearance = 1.0;
    const auto& ws = g.workspace;
    for (int j = 0; j < ws.ny; ++j) {
        for (int i = 0; i < ws.nx; ++i) {
            const Vec2 p = ws.site(i, j);
            auto scan = [&](const auto& patches, auto accept) {
                std::vector<double> d{1.0};
                for (const auto& q : patches) {
                    if (accept(q)) d.push_back((p - q.center).norm() / q.radius);
                }
                std::sort(d.begin(), d.end());
                clearance = std::min(clearance, d[1] - d[0]);
                for (double x : d) clearance = std::min(clearance, std::abs(x - 1.0) + (x == 1.0 ? 1.0 : 0.0));
            };
            scan(g.voids, [](const VoidPatch&) { return true; });
            scan(g.muscles, [](const MusclePatch& m) { return m.channel == Channel::Sine; });
            scan(g.muscles, [](const MusclePatch& m) { return m.channel == Channel::Cosine; });
        }
    }
    return clearance;
}

}  // namespace

TEST_SUITE("genome.sampling") {
    TEST_CASE("same seed gives identical genomes") {
        const auto s = default_settings();
        CHECK(sample_initial(s, 42) == sample_initial(s, 42));
        CHECK_FALSE(sample_initial(s, 42) == sample_initial(s, 43));
    }

    TEST_CASE("full rectangle keeps every centre inside the workspace") {
        const auto g = sample_initial(default_settings(), 7);
        REQUIRE(g.voids.size() == 64);
        REQUIRE(g.muscles.size() == 64);
        for (const auto& v : g.voids) CHECK(g.workspace.contains(v.center));
        for (const auto& m : g.muscles) CHECK(g.workspace.contains(m.center));
    }

    TEST_CASE("default void radii average about 0.91 cm") {
        double sum = 0.0;
        int n = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            for (const auto& v : sample_initial(default_settings(), seed).voids) {
                sum += v.radius;
                ++n;
            }
        }
        CHECK(sum / n == doctest::Approx(0.91).epsilon(0.01));
    }

    TEST_CASE("default muscles share the fixed radius") {
        const auto g = sample_initial(default_settings(), 3);
        const double expected = std::sqrt(1.15 * 280.0 / (std::numbers::pi * 64));
        for (const auto& m : g.muscles) {
            CHECK(m.radius == doctest::Approx(expected));
            CHECK(m.channel == Channel::Sine);
        }
        CHECK(expected == doctest::Approx(1.26).epsilon(0.005));
    }

    TEST_CASE("antiphase alternates channels") {
        auto s = default_settings();
        s.antiphase = true;
        const auto g = sample_initial(s, 3);
        for (std::size_t c = 0; c < g.muscles.size(); ++c) {
            CHECK(g.muscles[c].channel == (c % 2 ? Channel::Cosine : Channel::Sine));
        }
    }

    TEST_CASE("centres respect a partial mask") {
        auto s = default_settings();
        s.body_mask = BodyMask::rectangle(64, 44);
        for (int j = 0; j < 44; ++j) {
            for (int i = 32; i < 64; ++i) s.body_mask.cells[static_cast<std::size_t>(j) * 64 + i] = 0;
        }
        const auto g = sample_initial(s, 11);
        for (const auto& v : g.voids) CHECK(v.center.x() <= 10.0);
    }

    TEST_CASE("empty mask is a degenerate body") {
        auto s = default_settings();
        std::fill(s.body_mask.cells.begin(), s.body_mask.cells.end(), 0);
        CHECK_THROWS_WITH_AS(sample_initial(s, 1), doctest::Contains("degenerate body"), DegenerateBody);
    }

    TEST_CASE("sampled radii stay positive for wide distributions") {
        RadiusDistribution wide{RadiusFamily::Normal, 0.1, 5.0};
        std::mt19937_64 rng(5);
        for (int i = 0; i < 2000; ++i) CHECK(wide.sample(rng) > 0.0);
    }

    TEST_CASE("named distributions derive their location from coverage") {
        const Workspace ws;
        const double b = std::sqrt(0.6 * 280.0 / (std::numbers::pi * 64));
        const double a = b / ws.width_cm;
        const auto n = RadiusDistribution::from_coverage("normal", 0.6, ws, 64);
        CHECK(n.location_cm == doctest::Approx(b));
        CHECK(n.scale_cm == doctest::Approx(b));
        const auto nsq = RadiusDistribution::from_coverage("normal_sq", 0.6, ws, 64);
        CHECK(nsq.scale_cm == doctest::Approx(a * a * ws.width_cm));
        const auto u = RadiusDistribution::from_coverage("uniform", 0.6, ws, 64);
        CHECK(u.family == RadiusFamily::Uniform);
        CHECK_THROWS_AS(RadiusDistribution::from_coverage("gamma", 0.6, ws, 64), std::invalid_argument);
    }
}

TEST_SUITE("genome.coverage") {
    TEST_CASE("grid coverage examples") {
        std::vector<double> voids(64, 0.91);
        CHECK(grid_coverage(voids, 280.0) == doctest::Approx(0.595).epsilon(0.002));
        std::vector<double> muscles(64, 1.26);
        CHECK(grid_coverage(muscles, 280.0) == doctest::Approx(1.143).epsilon(0.002));
        CHECK(grid_coverage(std::vector<double>{}, 280.0) == 0.0);
    }

    TEST_CASE("coverage inverts the radius formula") {
        for (double o : {0.3, 0.6, 1.15}) {
            const double r = radius_for_coverage(o, 280.0, 64);
            CHECK(grid_coverage(std::vector<double>(64, r), 280.0) == doctest::Approx(o));
        }
    }
}

TEST_SUITE("genome.rasterize") {
    TEST_CASE("particle at a void centre is removed") {
        auto g = single_site();
        g.voids.push_back({Vec2(2.0, 0.5), 1.0, true});
        const auto f = rasterize_mass(g, 2, 0.1);
        CHECK(f.mass[0] == 0.0);
        CHECK_FALSE(f.alive[0]);
    }

    TEST_CASE("particle beyond every void is solid") {
        auto g = single_site();
        g.voids.push_back({Vec2(0.1, 0.5), 1.0, true});
        const auto f = rasterize_mass(g, 2, 0.1);
        CHECK(f.mass[0] == 1.0);
        CHECK(f.elasticity[0] == 20.0);
    }

    TEST_CASE("quadratic fringe at d = 0.6923") {
        auto g = single_site();
        g.voids.push_back({Vec2(2.6923, 0.5), 1.0, true});
        const auto f = rasterize_mass(g, 2, 0.1);
        CHECK(f.mass[0] == doctest::Approx(0.4793).epsilon(1e-4));
        CHECK(f.alive[0]);
    }

    TEST_CASE("cubic fringe at d = 0.5 against two thresholds") {
        auto g = single_site();
        g.voids.push_back({Vec2(2.5, 0.5), 1.0, true});
        const auto low = rasterize_mass(g, 3, 0.1);
        CHECK(low.mass[0] == doctest::Approx(0.125));
        CHECK(low.alive[0]);
        const auto high = rasterize_mass(g, 3, 0.2);
        CHECK(high.mass[0] == 0.0);
        CHECK_FALSE(high.alive[0]);
        CHECK(high.smooth_mass[0] == doctest::Approx(0.125));
    }

    TEST_CASE("no voids means a fully solid body") {
        auto g = single_site();
        CHECK(rasterize_mass(g, 2, 0.1).mass[0] == 1.0);
    }

    TEST_CASE("inactive voids are ignored") {
        auto g = single_site();
        g.voids.push_back({Vec2(2.0, 0.5), 1.0, false});
        CHECK(rasterize_mass(g, 2, 0.1).mass[0] == 1.0);
    }

    TEST_CASE("particles outside the mask are never alive") {
        DesignGenome g;
        g.workspace = Workspace{2.0, 1.0, 2, 1};
        g.body_mask = BodyMask::rectangle(2, 1);
        g.body_mask.cells[1] = 0;
        const auto f = rasterize_mass(g, 2, 0.1);
        CHECK(f.alive[0]);
        CHECK_FALSE(f.alive[1]);
        CHECK(f.mass[1] == 0.0);
    }

    TEST_CASE("invalid power or threshold is rejected") {
        auto g = single_site();
        CHECK_THROWS_AS(rasterize_mass(g, 4, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(rasterize_mass(g, 2, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(rasterize_mass(g, 2, 1.0), std::invalid_argument);
    }

    TEST_CASE("amplitude at the centre, border and outside") {
        auto g = single_site();
        g.muscles.push_back({Vec2(2.0, 0.5), 1.0, Channel::Sine, true});
        auto f = rasterize(g, RasterSettings{});
        CHECK(f.amplitude[0][0] == doctest::Approx(1.0));
        CHECK(f.amplitude[1][0] == 0.0);

        g.muscles[0].center = Vec2(3.0 - 1e-12, 0.5);
        f = rasterize(g, RasterSettings{});
        CHECK(f.amplitude[0][0] == doctest::Approx(std::pow(1.0 - std::sqrt(0.1), 2)));
        CHECK(f.amplitude[0][0] == doctest::Approx(0.4675).epsilon(1e-4));

        g.muscles[0].center = Vec2(3.0, 0.5);
        f = rasterize(g, RasterSettings{});
        CHECK(f.amplitude[0][0] == 0.0);
    }

    TEST_CASE("interpolated amplitude for each power") {
        for (int q : {1, 2, 3}) {
            CHECK(interpolated_amplitude(0.0, q) == 1.0);
            CHECK(interpolated_amplitude(1.0, q) == 0.0);
            CHECK(interpolated_amplitude(0.5, q) == doctest::Approx(std::pow(1.0 - 0.5 * std::sqrt(0.1), q)));
        }
    }
}

TEST_SUITE("genome.properties") {
    TEST_CASE("rasterization matches the direct oracle on random genomes") {
        std::mt19937_64 rng(101);
        for (int trial = 0; trial < 40; ++trial) {
            const auto g = oracle::random_genome(rng, 9, 7, 0.5, 6, 6, trial % 2 == 1);
            RasterSettings rs;
            rs.void_power = 1 + trial % 3;
            rs.muscle_power = 1 + (trial / 3) % 3;
            rs.threshold = 0.1 + 0.1 * (trial % 4);
            const auto f = rasterize(g, rs);
            for (int j = 0; j < 7; ++j) {
                for (int i = 0; i < 9; ++i) {
                    const auto idx = g.workspace.index(i, j);
                    const Vec2 p = g.workspace.site(i, j);
                    const double m = oracle::smooth_mass(g, p, rs.void_power);
                    CHECK(f.smooth_mass[idx] == doctest::Approx(m).epsilon(1e-12));
                    CHECK(f.amplitude[0][idx] ==
                          doctest::Approx(oracle::amplitude(g, p, rs.muscle_power, Channel::Sine)).epsilon(1e-12));
                    CHECK(f.amplitude[1][idx] ==
                          doctest::Approx(oracle::amplitude(g, p, rs.muscle_power, Channel::Cosine)).epsilon(1e-12));
                }
            }
        }
    }

    TEST_CASE("mass lies in {0} or [threshold, 1] and stiffness tracks mass") {
        std::mt19937_64 rng(202);
        for (int trial = 0; trial < 60; ++trial) {
            const auto g = oracle::random_genome(rng, 12, 8, 0.4, 10, 4);
            const double lambda = 0.05 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng);
            const auto f = rasterize_mass(g, 1 + trial % 3, lambda);
            for (std::size_t i = 0; i < f.size(); ++i) {
                CHECK(f.mass[i] <= 1.0);
                CHECK((f.mass[i] == 0.0 || f.mass[i] >= lambda));
                CHECK(static_cast<bool>(f.alive[i]) == (f.mass[i] > 0.0));
                if (f.alive[i]) CHECK(f.elasticity[i] / f.mass[i] == doctest::Approx(20.0).epsilon(1e-15));
            }
        }
    }

    TEST_CASE("void order does not change the field") {
        std::mt19937_64 rng(303);
        for (int trial = 0; trial < 30; ++trial) {
            auto g = oracle::random_genome(rng, 10, 6, 0.5, 7, 5);
            const auto before = rasterize(g, RasterSettings{});
            std::shuffle(g.voids.begin(), g.voids.end(), rng);
            const auto after = rasterize(g, RasterSettings{});
            CHECK(before.mass == after.mass);
            CHECK(before.alive == after.alive);
        }
    }

    TEST_CASE("mass is non-decreasing with distance from a single void") {
        DesignGenome g;
        g.workspace = Workspace{10.0, 0.5, 40, 2};
        g.body_mask = BodyMask::rectangle(40, 2);
        g.voids.push_back({Vec2(0.0, 0.125), 6.0, true});
        const auto f = rasterize_mass(g, 2, 0.1);
        for (int i = 1; i < 40; ++i) CHECK(f.smooth_mass[g.workspace.index(i, 0)] >= f.smooth_mass[g.workspace.index(i - 1, 0)]);
    }

    TEST_CASE("shifting patches and mask by a lattice offset shifts the alive set") {
        std::mt19937_64 rng(404);
        for (int trial = 0; trial < 20; ++trial) {
            auto g = oracle::random_genome(rng, 16, 10, 0.5, 6, 0);
            // restrict the body to the lower-left 10 x 6 block
            for (int j = 0; j < 10; ++j) {
                for (int i = 0; i < 16; ++i) g.body_mask.cells[static_cast<std::size_t>(j) * 16 + i] = i < 10 && j < 6;
            }
            const int di = 3, dj = 2;
            auto shifted = g;
            for (auto& v : shifted.voids) v.center += Vec2(di * 0.5, dj * 0.5);
            for (int j = 0; j < 10; ++j) {
                for (int i = 0; i < 16; ++i) {
                    shifted.body_mask.cells[static_cast<std::size_t>(j) * 16 + i] =
                        g.body_mask.at(i - di, j - dj) ? 1 : 0;
                }
            }
            const auto a = rasterize_mass(g, 2, 0.1);
            const auto b = rasterize_mass(shifted, 2, 0.1);
            for (int j = 0; j < 6; ++j) {
                for (int i = 0; i < 10; ++i) {
                    CHECK(a.alive[g.workspace.index(i, j)] == b.alive[g.workspace.index(i + di, j + dj)]);
                }
            }
        }
    }
}

TEST_SUITE("genome.constrained") {
    TEST_CASE("passive border silences particles near removed sites and edges") {
        DesignGenome g;
        g.workspace = Workspace{5.0, 5.0, 20, 20};
        g.body_mask = BodyMask::rectangle(20, 20);
        g.voids.push_back({Vec2(2.5, 2.5), 1.0, true});
        g.muscles.push_back({Vec2(2.5, 2.5), 4.0, Channel::Sine, true});
        RasterSettings rs;
        rs.constrained = true;
        const auto f = rasterize(g, rs);
        const auto& ws = g.workspace;
        for (int j = 0; j < 20; ++j) {
            for (int i = 0; i < 20; ++i) {
                const auto idx = ws.index(i, j);
                if (!f.alive[idx]) continue;
                const Vec2 p = ws.site(i, j);
                double nearest = std::min({p.x(), ws.width_cm - p.x(), p.y(), ws.height_cm - p.y()});
                for (int jj = 0; jj < 20; ++jj) {
                    for (int ii = 0; ii < 20; ++ii) {
                        if (!f.alive[ws.index(ii, jj)]) nearest = std::min(nearest, (ws.site(ii, jj) - p).norm());
                    }
                }
                if (nearest <= 0.3) {
                    CHECK(f.passive_border[idx]);
                    CHECK(f.amplitude[0][idx] == 0.0);
                } else {
                    CHECK_FALSE(f.passive_border[idx]);
                    CHECK(f.amplitude[0][idx] > 0.0);
                }
            }
        }
    }
}

TEST_SUITE("genome.backprop") {
    TEST_CASE("mass derivative with respect to radius") {
        auto g = single_site();
        g.voids.push_back({Vec2(2.6, 0.5), 0.8, true});  // d = 0.75
        const std::vector<double> gm{1.0};
        const std::array<std::vector<double>, 2> ga{std::vector<double>{0.0}, std::vector<double>{0.0}};
        const auto pg = backprop_patches(g, RasterSettings{}, gm, ga);
        const double d = 0.6 / 0.8;
        // m = (dist / r)^2, so dm/dr = -2 d dist / r^2
        CHECK(pg.void_radius[0] == doctest::Approx(-2.0 * d * 0.6 / (0.8 * 0.8)));
        const double h = 1e-6;
        auto plus = g, minus = g;
        plus.voids[0].radius += h;
        minus.voids[0].radius -= h;
        const double fd = (rasterize_mass(plus, 2, 0.1).smooth_mass[0] - rasterize_mass(minus, 2, 0.1).smooth_mass[0]) / (2 * h);
        CHECK(pg.void_radius[0] == doctest::Approx(fd).epsilon(1e-6));
    }

    TEST_CASE("three-particle toy matches central differences") {
        DesignGenome g;
        g.workspace = Workspace{3.0, 1.0, 3, 1};
        g.body_mask = BodyMask::rectangle(3, 1);
        g.voids.push_back({Vec2(0.9, 0.7), 1.1, true});
        g.voids.push_back({Vec2(2.4, 0.2), 0.9, true});
        g.muscles.push_back({Vec2(1.2, 0.4), 1.3, Channel::Sine, true});
        const std::vector<double> gm{0.7, -1.3, 0.4};
        const std::array<std::vector<double>, 2> ga{std::vector<double>{0.2, 0.9, -0.5}, std::vector<double>(3, 0.0)};
        const RasterSettings rs;
        const auto pg = backprop_patches(g, rs, gm, ga);

        const double h = 1e-6;
        auto fd = [&](auto mutate) {
            auto p = g, m = g;
            mutate(p, h);
            mutate(m, -h);
            return (loss_of(rasterize(p, rs), gm, ga) - loss_of(rasterize(m, rs), gm, ga)) / (2 * h);
        };
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(pg.void_center[k].x() == doctest::Approx(fd([k](DesignGenome& x, double e) { x.voids[k].center.x() += e; })).epsilon(1e-6));
            CHECK(pg.void_center[k].y() == doctest::Approx(fd([k](DesignGenome& x, double e) { x.voids[k].center.y() += e; })).epsilon(1e-6));
            CHECK(pg.void_radius[k] == doctest::Approx(fd([k](DesignGenome& x, double e) { x.voids[k].radius += e; })).epsilon(1e-6));
        }
        CHECK(pg.muscle_center[0].x() == doctest::Approx(fd([](DesignGenome& x, double e) { x.muscles[0].center.x() += e; })).epsilon(1e-6));
        CHECK(pg.muscle_center[0].y() == doctest::Approx(fd([](DesignGenome& x, double e) { x.muscles[0].center.y() += e; })).epsilon(1e-6));
        CHECK(pg.muscle_radius[0] == doctest::Approx(fd([](DesignGenome& x, double e) { x.muscles[0].radius += e; })).epsilon(1e-6));
    }

    TEST_CASE("random small genomes match central differences away from kinks") {
        std::mt19937_64 rng(505);
        std::normal_distribution<double> n01;
        int checked = 0;
        for (int trial = 0; trial < 400 && checked < 60; ++trial) {
            const auto g = oracle::random_genome(rng, 4, 2, 0.6, 1 + trial % 3, 1 + (trial / 3) % 3, trial % 2 == 1);
            if (kink_clearance(g) < 1e-3) continue;
            ++checked;
            RasterSettings rs;
            rs.void_power = 1 + trial % 3;
            rs.muscle_power = 1 + (trial / 5) % 3;
            std::vector<double> gm(8);
            std::array<std::vector<double>, 2> ga{std::vector<double>(8), std::vector<double>(8)};
            for (auto& x : gm) x = n01(rng);
            for (auto& c : ga) for (auto& x : c) x = n01(rng);
            const auto pg = backprop_patches(g, rs, gm, ga);
            const double h = 1e-6;
            auto fd = [&](auto mutate) {
                auto p = g, m = g;
                mutate(p, h);
                mutate(m, -h);
                return (loss_of(rasterize(p, rs), gm, ga) - loss_of(rasterize(m, rs), gm, ga)) / (2 * h);
            };
            auto close = [](double a, double b) {
                return std::abs(a - b) <= 1e-5 * std::max({std::abs(a), std::abs(b), 1e-3});
            };
            for (std::size_t k = 0; k < g.voids.size(); ++k) {
                CHECK(close(pg.void_center[k].x(), fd([k](DesignGenome& x, double e) { x.voids[k].center.x() += e; })));
                CHECK(close(pg.void_center[k].y(), fd([k](DesignGenome& x, double e) { x.voids[k].center.y() += e; })));
                CHECK(close(pg.void_radius[k], fd([k](DesignGenome& x, double e) { x.voids[k].radius += e; })));
            }
            for (std::size_t c = 0; c < g.muscles.size(); ++c) {
                CHECK(close(pg.muscle_center[c].x(), fd([c](DesignGenome& x, double e) { x.muscles[c].center.x() += e; })));
                CHECK(close(pg.muscle_center[c].y(), fd([c](DesignGenome& x, double e) { x.muscles[c].center.y() += e; })));
            }
        }
        CHECK(checked >= 30);
    }

    TEST_CASE("a patch that reaches no particle has exactly zero gradient") {
        std::mt19937_64 rng(606);
        auto g = oracle::random_genome(rng, 6, 4, 0.5, 3, 3);
        g.voids.push_back({Vec2(50.0, 50.0), 1.0, true});
        g.muscles.push_back({Vec2(-40.0, 3.0), 1.0, Channel::Sine, true});
        const std::vector<double> gm(24, 1.0);
        const std::array<std::vector<double>, 2> ga{std::vector<double>(24, 1.0), std::vector<double>(24, 1.0)};
        const auto pg = backprop_patches(g, RasterSettings{}, gm, ga);
        CHECK(pg.void_center.back() == Vec2::Zero());
        CHECK(pg.void_radius.back() == 0.0);
        CHECK(pg.muscle_center.back() == Vec2::Zero());
        CHECK(pg.void_magnitude(g.voids.size() - 1) == 0.0);
    }

    TEST_CASE("ties give all credit to the lowest index") {
        auto g = single_site();
        g.voids.push_back({Vec2(2.5, 0.5), 1.0, true});
        g.voids.push_back({Vec2(1.5, 0.5), 1.0, true});
        const std::array<std::vector<double>, 2> ga{std::vector<double>{0.0}, std::vector<double>{0.0}};
        const auto pg = backprop_patches(g, RasterSettings{}, std::vector<double>{1.0}, ga);
        CHECK(pg.void_radius[0] != 0.0);
        CHECK(pg.void_radius[1] == 0.0);
    }

    TEST_CASE("inactive patches receive no gradient") {
        auto g = single_site();
        g.voids.push_back({Vec2(2.5, 0.5), 1.0, false});
        const std::array<std::vector<double>, 2> ga{std::vector<double>{0.0}, std::vector<double>{0.0}};
        const auto pg = backprop_patches(g, RasterSettings{}, std::vector<double>{1.0}, ga);
        CHECK(pg.void_magnitude(0) == 0.0);
    }

    TEST_CASE("mismatched gradient length is an error") {
        auto g = single_site();
        const std::array<std::vector<double>, 2> ga{std::vector<double>{0.0}, std::vector<double>{0.0}};
        CHECK_THROWS_AS(backprop_patches(g, RasterSettings{}, std::vector<double>{1.0, 2.0}, ga), std::invalid_argument);
    }
}

TEST_SUITE("genome.replacement") {
    TEST_CASE("all-live genome is unchanged") {
        const auto s = default_settings();
        const auto g = sample_initial(s, 9);
        auto grads = PatchGradient::zeros(g);
        for (auto& c : grads.void_center) c = Vec2(1.0, 0.0);
        for (auto& c : grads.muscle_center) c = Vec2(0.0, 1.0);
        std::mt19937_64 rng(1);
        const auto r = replace_dead_patches(g, grads, s, rng);
        CHECK(r.genome == g);
        CHECK(r.replaced_voids.empty());
        CHECK(r.replaced_muscles.empty());
    }

    TEST_CASE("dead patches are re-placed inside the workspace") {
        auto s = default_settings();
        s.void_radius = RadiusDistribution{RadiusFamily::Constant, 0.91, 0.0};
        auto g = sample_initial(s, 9);
        auto grads = PatchGradient::zeros(g);
        for (auto& c : grads.void_center) c = Vec2(1.0, 0.0);
        for (auto& c : grads.muscle_center) c = Vec2(0.0, 1.0);
        g.voids[3].radius = 0.0;
        g.muscles[5].center = Vec2(-5.0, 4.0);
        grads.void_center[7] = Vec2::Zero();  // overlapped: no gradient over the last attempt
        refresh_activity(g);
        std::mt19937_64 rng(1);
        const auto r = replace_dead_patches(g, grads, s, rng);
        CHECK(r.replaced_voids == std::vector<std::size_t>{3, 7});
        CHECK(r.replaced_muscles == std::vector<std::size_t>{5});
        CHECK(r.genome.voids[3].radius == doctest::Approx(0.91));
        CHECK(r.genome.voids[3].active);
        CHECK(g.workspace.contains(r.genome.muscles[5].center));
        CHECK(r.genome.muscles[5].active);
        CHECK(r.genome.voids[0] == g.voids[0]);
    }
}

TEST_SUITE("genome.io") {
    TEST_CASE("snapshot round trip") {
        auto s = default_settings();
        s.antiphase = true;
        auto g = sample_initial(s, 21);
        g.voids[2].active = false;
        std::stringstream buf;
        write_genome(buf, g);
        const auto back = read_genome(buf);
        CHECK(back == g);
    }

    TEST_CASE("snapshot header lists counts and lattice") {
        const auto g = sample_initial(default_settings(), 2);
        std::stringstream buf;
        write_genome(buf, g);
        std::string first;
        std::getline(buf, first);
        CHECK(first.rfind("GENOME 64 64 64 44", 0) == 0);
    }

    TEST_CASE("malformed snapshot is rejected") {
        std::stringstream buf("GENOME 1 0 2 2 1 1\nV 0 0\n");
        CHECK_THROWS(read_genome(buf));
    }
}
