#include "morphogen/loss.hpp"
#include "morphogen/mpm.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace morphogen;

namespace {

// Solid block of nx x ny particles at the default lattice spacing.
ParticleField block(int nx, int ny, double amp_sin = 0.0, double amp_cos = 0.0) {
    DesignGenome g;
    g.workspace = Workspace{20.0 / 64 * nx, 14.0 / 44 * ny, nx, ny};
    g.body_mask = BodyMask::rectangle(nx, ny);
    auto f = rasterize(g, RasterSettings{});
    std::fill(f.amplitude[0].begin(), f.amplitude[0].end(), amp_sin);
    std::fill(f.amplitude[1].begin(), f.amplitude[1].end(), amp_cos);
    return f;
}

SimParams short_params(int steps) {
    SimParams p;
    p.steps = steps;
    return p;
}

double loss_of(const SceneSpec& scene, const SimParams& p) {
    return locomotion_loss(simulate(scene, p), scene).loss;
}

}  // namespace

TEST_SUITE("mpm.actuation") {
    TEST_CASE("peak drive of a full-mass sine particle") {
        SimParams p;
        p.dt = std::numbers::pi / (2.0 * p.actuation_freq);
        CHECK(actuation_state(1.0, 1.0, 0.0, 1, p) == doctest::Approx(4.0 * std::tanh(1.0)));
        CHECK(actuation_state(1.0, 1.0, 0.0, 1, p) == doctest::Approx(3.0464).epsilon(1e-4));
    }

    TEST_CASE("drive scales with mass and saturates through tanh") {
        SimParams p;
        p.dt = std::numbers::pi / (2.0 * p.actuation_freq);
        CHECK(actuation_state(0.0025, 2.5, 0.0, 1, p) == doctest::Approx(0.01 * std::tanh(2.5)));
        CHECK(actuation_state(1.0, 0.0, 1.0, 0, p) == doctest::Approx(4.0 * std::tanh(1.0)));
        CHECK(actuation_state(0.0, 1.0, 1.0, 3, p) == 0.0);
    }

    TEST_CASE("default schedule covers about six and a half cycles") {
        const SimParams p;
        const double span = p.steps * p.dt * p.actuation_freq;
        CHECK(span == doctest::Approx(40.96));
        CHECK(span / (2 * std::numbers::pi) == doctest::Approx(6.5).epsilon(0.01));
    }
}

TEST_SUITE("mpm.scene") {
    TEST_CASE("scene places the lowest row half a spacing above the floor") {
        const auto f = block(64, 44);
        const SimParams p;
        const auto scene = build_scene(f, SceneOptions{}, p);
        REQUIRE(scene.robot_count == 2816);
        CHECK_FALSE(scene.has_object());
        double min_x = 1.0, min_y = 1.0, max_x = 0.0;
        for (const auto& x : scene.position) {
            min_x = std::min(min_x, x.x());
            max_x = std::max(max_x, x.x());
            min_y = std::min(min_y, x.y());
        }
        const double half = 0.5 * (20.0 / 64) / 80.0;
        CHECK(min_x == doctest::Approx(0.04 + half));
        CHECK(max_x - min_x == doctest::Approx(0.25 - 2 * half));
        CHECK(min_y == doctest::Approx(p.floor_height() + 0.5 * (14.0 / 44) / 80.0));
    }

    TEST_CASE("removed particles are left out") {
        auto f = block(4, 3);
        f.alive[5] = 0;
        f.mass[5] = 0.0;
        const auto scene = build_scene(f, SceneOptions{}, SimParams{});
        CHECK(scene.robot_count == 11);
        for (auto src : scene.source) CHECK(src != 5);
    }

    TEST_CASE("object particles follow the robot") {
        const auto f = block(64, 44);
        SceneOptions o;
        o.object = ObjectConfig{};
        const auto scene = build_scene(f, o, SimParams{});
        CHECK(scene.object_count == 208);
        CHECK(scene.size() == 2816 + 208);
        for (std::size_t i = scene.robot_count; i < scene.size(); ++i) {
            CHECK(scene.source[i] == -1);
            CHECK(scene.mass[i] == 1.0);
        }
    }

    TEST_CASE("an empty body is degenerate") {
        auto f = block(3, 3);
        std::fill(f.alive.begin(), f.alive.end(), 0);
        CHECK_THROWS_AS(build_scene(f, SceneOptions{}, SimParams{}), DegenerateBody);
    }
}

TEST_SUITE("mpm.forward") {
    TEST_CASE("static equilibrium without gravity or actuation") {
        const auto scene = build_scene(block(10, 6), SceneOptions{}, SimParams{});
        auto p = short_params(300);
        p.gravity = 0.0;
        p.actuation_strength = 0.0;
        const auto traj = simulate(scene, p);
        for (std::size_t i = 0; i < scene.size(); ++i) {
            CHECK((traj.states.back().x[i] - scene.position[i]).norm() <= 1e-9);
            CHECK(traj.states.back().v[i].norm() <= 1e-9);
        }
    }

    TEST_CASE("free fall follows the damped ballistic curve") {
        SceneOptions o;
        o.lift = 0.3;
        const auto scene = build_scene(block(6, 4), o, SimParams{});
        auto p = short_params(200);
        const auto traj = simulate(scene, p);
        const double t = p.steps * p.dt;
        const double c = p.global_damping;
        const double drop = p.gravity / c * (t - (1.0 - std::exp(-c * t)) / c) * p.cm_per_unit;
        const double measured = traj.robot_com_cm.front().y() - traj.robot_com_cm.back().y();
        CHECK(measured == doctest::Approx(drop).epsilon(0.01));
        CHECK(traj.robot_com_cm.back().x() == doctest::Approx(traj.robot_com_cm.front().x()).epsilon(1e-9));
    }

    TEST_CASE("trajectory and traces have the documented lengths") {
        const auto scene = build_scene(block(4, 4), SceneOptions{}, SimParams{});
        auto p = short_params(50);
        p.substeps = 3;
        const auto traj = simulate(scene, p);
        CHECK(traj.states.size() == 151);
        CHECK(traj.stride == 3);
        CHECK(traj.robot_com_cm.size() == 51);
        CHECK(traj.object_com_cm.empty());
    }

    TEST_CASE("substeps match the equivalent fine schedule exactly") {
        const auto scene = build_scene(block(6, 4, 0.8), SceneOptions{}, SimParams{});
        auto coarse = short_params(100);
        coarse.substeps = 2;
        auto fine = short_params(200);
        fine.dt = coarse.dt / 2;
        fine.substeps = 1;
        const auto a = simulate(scene, coarse);
        const auto b = simulate(scene, fine);
        CHECK(a.states.back().x == b.states.back().x);
        CHECK(a.robot_com_cm.back() == b.robot_com_cm.back());
    }

    TEST_CASE("repeated rollouts are bitwise identical") {
        const auto scene = build_scene(block(8, 6, 0.7, 0.2), SceneOptions{}, SimParams{});
        const auto p = short_params(200);
        const auto a = simulate(scene, p);
        const auto b = simulate(scene, p);
        REQUIRE(a.states.size() == b.states.size());
        for (std::size_t t = 0; t < a.states.size(); ++t) {
            CHECK(a.states[t].x == b.states[t].x);
            CHECK(a.states[t].F == b.states[t].F);
        }
    }

    TEST_CASE("symmetric expansion keeps the centre of mass in place") {
        // odd width so a centred muscle is mirror-symmetric
        auto f = block(9, 6);
        const auto& ws = f.workspace;
        const Vec2 c(ws.width_cm / 2, ws.height_cm / 2);
        for (int j = 0; j < ws.ny; ++j) {
            for (int i = 0; i < ws.nx; ++i) {
                const double d = (ws.site(i, j) - c).norm() / 1.5;
                f.amplitude[0][ws.index(i, j)] = interpolated_amplitude(d, 2);
            }
        }
        SceneOptions o;
        o.lift = 0.1;
        auto p = short_params(300);
        p.gravity = 0.0;
        p.friction = 0.0;
        const auto traj = simulate(build_scene(f, o, p), p);
        CHECK(std::abs(traj.robot_com_cm.back().x() - traj.robot_com_cm.front().x()) <= 1e-6);
        CHECK(traj.robot_com_cm.back() != traj.robot_com_cm.front());
    }

    TEST_CASE("zero actuation strength ignores the muscle layout") {
        auto p = short_params(150);
        p.actuation_strength = 0.0;
        const auto a = simulate(build_scene(block(6, 5, 1.0, 0.0), SceneOptions{}, p), p);
        const auto b = simulate(build_scene(block(6, 5, 0.0, 0.6), SceneOptions{}, p), p);
        CHECK(a.states.back().x == b.states.back().x);
    }

    TEST_CASE("a particle outside the grid stencil fails fast") {
        SceneSpec scene;
        scene.position = {Vec2(0.001, 0.5)};
        scene.mass = {1.0};
        scene.elasticity = {20.0};
        scene.amplitude = {std::vector<double>{0.0}, std::vector<double>{0.0}};
        scene.source = {0};
        scene.robot_count = 1;
        CHECK_THROWS_WITH_AS(simulate(scene, short_params(5)), doctest::Contains("left the domain"), SimulationError);
    }

    TEST_CASE("invalid parameters are rejected") {
        const auto scene = build_scene(block(2, 2), SceneOptions{}, SimParams{});
        auto p = short_params(5);
        p.substeps = 0;
        CHECK_THROWS_AS(simulate(scene, p), std::invalid_argument);
        p = short_params(5);
        p.poisson = 0.5;
        CHECK_THROWS_AS(simulate(scene, p), std::invalid_argument);
        p = short_params(5);
        p.dt = 0.0;
        CHECK_THROWS_AS(simulate(scene, p), std::invalid_argument);
    }
}

TEST_SUITE("mpm.adjoint") {
    TEST_CASE("gradients with respect to mass, stiffness and amplitude match central differences") {
        auto f = block(6, 4);
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(0.3, 1.0);
        for (std::size_t i = 0; i < f.size(); ++i) {
            f.mass[i] = u(rng);
            f.elasticity[i] = 20.0 * u(rng);
            f.amplitude[0][i] = u(rng);
            f.amplitude[1][i] = 0.5 * u(rng);
        }
        const auto p = short_params(120);
        const auto scene = build_scene(f, SceneOptions{}, p);
        const auto traj = simulate(scene, p);
        const auto primary = locomotion_loss(traj, scene);
        const auto g = adjoint(traj, scene, p, primary.cotangent);

        const double h = 1e-6;
        auto check = [&](auto member, const std::vector<double>& analytic, std::size_t i) {
            auto plus = scene, minus = scene;
            member(plus)[i] += h;
            member(minus)[i] -= h;
            const double fd = (loss_of(plus, p) - loss_of(minus, p)) / (2 * h);
            CHECK(analytic[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
        };
        for (std::size_t i : {0u, 7u, 13u, 23u}) {
            check([](SceneSpec& s) -> std::vector<double>& { return s.mass; }, g.mass, i);
            check([](SceneSpec& s) -> std::vector<double>& { return s.elasticity; }, g.elasticity, i);
            check([](SceneSpec& s) -> std::vector<double>& { return s.amplitude[0]; }, g.amplitude[0], i);
            check([](SceneSpec& s) -> std::vector<double>& { return s.amplitude[1]; }, g.amplitude[1], i);
        }
    }

    TEST_CASE("centre-of-mass cotangents on outer steps") {
        auto f = block(5, 4, 0.9);
        auto p = short_params(60);
        p.substeps = 2;
        const auto scene = build_scene(f, SceneOptions{}, p);
        std::vector<double> weight(61);
        for (std::size_t t = 0; t < weight.size(); ++t) weight[t] = std::sin(0.1 * static_cast<double>(t));
        auto functional = [&](const SceneSpec& s) {
            const auto tr = simulate(s, p);
            double v = 0.0;
            for (std::size_t t = 0; t < weight.size(); ++t) v += weight[t] * tr.robot_com_cm[t].y();
            return v;
        };
        TrajectoryCotangent ct;
        for (double w : weight) ct.robot_com.push_back(Vec2(0.0, w));
        const auto g = adjoint(simulate(scene, p), scene, p, ct);
        const double h = 1e-6;
        for (std::size_t i : {0u, 9u, 19u}) {
            auto plus = scene, minus = scene;
            plus.mass[i] += h;
            minus.mass[i] -= h;
            CHECK(g.mass[i] == doctest::Approx((functional(plus) - functional(minus)) / (2 * h)).epsilon(1e-5).scale(1e-6));
        }
    }

    TEST_CASE("a lone passive particle in flight has no mass gradient") {
        SceneSpec scene;
        scene.position = {Vec2(0.5, 0.6)};
        scene.mass = {0.7};
        scene.elasticity = {14.0};
        scene.amplitude = {std::vector<double>{0.0}, std::vector<double>{0.0}};
        scene.source = {0};
        scene.robot_count = 1;
        const auto p = short_params(100);
        const auto traj = simulate(scene, p);
        const auto g = adjoint(traj, scene, p, locomotion_loss(traj, scene).cotangent);
        CHECK(std::abs(g.mass[0]) <= 1e-12);
    }

    TEST_CASE("mismatched cotangents are rejected") {
        const auto p = short_params(10);
        const auto scene = build_scene(block(3, 3), SceneOptions{}, p);
        const auto traj = simulate(scene, p);
        TrajectoryCotangent ct;
        ct.robot_com.assign(5, Vec2::Zero());
        CHECK_THROWS_AS(adjoint(traj, scene, p, ct), std::invalid_argument);
        auto other = p;
        other.steps = 11;
        CHECK_THROWS_AS(adjoint(traj, scene, other, TrajectoryCotangent{}), std::invalid_argument);
    }
}

TEST_SUITE("mpm.io") {
    TEST_CASE("state dump round trip") {
        const auto p = short_params(20);
        const auto scene = build_scene(block(4, 3, 0.5), SceneOptions{}, p);
        const auto traj = simulate(scene, p);
        const auto path = std::filesystem::temp_directory_path() / "morphogen_state_test.bin";
        write_state_dump(path, traj.states.back());
        const auto back = read_state_dump(path);
        CHECK(back.step == traj.states.back().step);
        CHECK(back.x == traj.states.back().x);
        CHECK(back.v == traj.states.back().v);
        CHECK(back.C == traj.states.back().C);
        CHECK(back.F == traj.states.back().F);
        CHECK(std::filesystem::file_size(path) == 8 + 16 + 12 * 8 * scene.size());
        std::filesystem::remove(path);
    }

    TEST_CASE("trajectory CSV has one row per outer step") {
        const auto p = short_params(10);
        SceneOptions o;
        o.object = ObjectConfig{2.0, 30};
        const auto scene = build_scene(block(64, 44), o, p);
        const auto traj = simulate(scene, p);
        const auto path = std::filesystem::temp_directory_path() / "morphogen_traj_test.csv";
        write_trajectory_csv(path, traj);
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "step,com_x_cm,com_y_cm,obj_x_cm,obj_y_cm");
        int rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 11);
        std::filesystem::remove(path);
    }
}
