#pragma once

#include "morphogen/genome.hpp"
#include "morphogen/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphogen {

/// Simulation constants. Lengths are in simulation units (the unit square), time in
/// seconds; gravity is expressed in simulation units per second squared.
struct SimParams {
    int steps = 1024;
    double dt = 1e-3;
    int grid = 128;
    double gravity = 5.4;
    double friction = 0.5;
    double internal_damping = 30.0;
    double global_damping = 2.0;
    double actuation_strength = 4.0;
    double actuation_freq = 40.0;  // rad/s
    double youngs = 20.0;
    double poisson = 0.25;
    double cm_per_unit = 80.0;  // 20 cm of workspace spans 0.25 units
    int boundary_cells = 3;
    double left_offset = 0.04;
    int substeps = 2;  // integrator steps per outer step, each of length dt / substeps

    double dx() const { return 1.0 / grid; }
    /// The fine schedule actually integrated: steps * substeps steps of dt / substeps.
    SimParams integration() const;
    double floor_height() const { return boundary_cells * dx(); }
    void validate() const;
};

/// Stress added on the vertical diagonal by the muscles of one particle at step t.
double actuation_state(double mass, double amp_sin, double amp_cos, int step, const SimParams& params);

struct ObjectConfig {
    double radius_cm = 2.5;
    int particle_count = 208;
};

struct SceneOptions {
    std::optional<ObjectConfig> object;
    double lift = 0.0;  // extra height above the floor, simulation units
};

/// Particles handed to the simulator: the alive robot particles followed by any
/// passive object particles.
struct SceneSpec {
    std::vector<Vec2> position;  // initial, simulation units
    std::vector<double> mass;
    std::vector<double> elasticity;
    std::array<std::vector<double>, kChannels> amplitude;
    std::vector<std::int64_t> source;  // lattice index of a robot particle, -1 for object particles
    std::size_t robot_count = 0;
    std::size_t object_count = 0;
    Vec2 origin{0.0, 0.0};  // simulation-space location of the workspace corner
    double cm_per_unit = 80.0;

    std::size_t size() const { return position.size(); }
    bool has_object() const { return object_count > 0; }
    Vec2 to_cm(const Vec2& sim) const { return (sim - origin) * cm_per_unit; }
};

SceneSpec build_scene(const ParticleField& field, const SceneOptions& options, const SimParams& params);

struct SimState {
    int step = 0;
    std::vector<Vec2> x;
    std::vector<Vec2> v;
    std::vector<Mat2> C;  // affine velocity
    std::vector<Mat2> F;  // deformation gradient
};

SimState initial_state(const SceneSpec& scene);

struct SimTrajectory {
    std::vector<SimState> states;    // steps * substeps + 1 entries
    int stride = 1;                  // states per outer step
    std::vector<Vec2> robot_com_cm;  // per outer step, steps + 1 entries
    std::vector<Vec2> object_com_cm;
    double min_jacobian = 1.0;
};

class SimulationError : public std::runtime_error {
public:
    SimulationError(int step, const std::string& why)
        : std::runtime_error("simulation failed at step " + std::to_string(step) + ": " + why), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

SimTrajectory simulate(const SceneSpec& scene, const SimParams& params);

/// Cotangent of a loss with respect to the trajectory, in centimetres. Any member
/// may be left empty.
struct TrajectoryCotangent {
    std::vector<Vec2> final_position;  // per scene particle
    std::vector<Vec2> robot_com;       // per outer step
    std::vector<Vec2> object_com;      // per outer step
};

/// d(loss)/d(per-particle parameter) for every scene particle.
struct ParticleGradients {
    std::vector<double> mass;
    std::vector<double> elasticity;
    std::array<std::vector<double>, kChannels> amplitude;
};

/// Reverse-mode pass through every step of `trajectory`.
ParticleGradients adjoint(const SimTrajectory& trajectory, const SceneSpec& scene, const SimParams& params,
                          const TrajectoryCotangent& cotangent);

/// CSV with columns step, com_x_cm, com_y_cm[, obj_x_cm, obj_y_cm].
void write_trajectory_csv(const std::filesystem::path& path, const SimTrajectory& trajectory);
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<Vec2>& robot_com_cm,
                          const std::vector<Vec2>& object_com_cm);

/// Binary dump of one state. Layout (little-endian): 8-byte magic "MGSTATE1",
/// uint64 particle count, uint64 step, then per particle 12 float64 values
/// x y vx vy C00 C01 C10 C11 F00 F01 F10 F11.
void write_state_dump(const std::filesystem::path& path, const SimState& state);
SimState read_state_dump(const std::filesystem::path& path);

}  // namespace morphogen
