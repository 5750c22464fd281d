#pragma once

#include "morphogen/genome.hpp"
#include "morphogen/loss.hpp"
#include "morphogen/mpm.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace morphogen {

struct AdamParams {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Every knob of a design run. Defaults reproduce the physical-robot settings.
struct RunConfig {
    // design space
    int lattice_x = 64;
    int lattice_y = 44;
    double workspace_width_cm = 20.0;
    double workspace_height_cm = 14.0;
    int num_voids = 64;
    int num_muscles = 64;
    std::string void_radius_dist = "normal_sq";
    double void_coverage = 0.60;
    std::string muscle_radius_dist = "constant";
    double muscle_coverage = 1.15;
    int void_power = 2;
    int muscle_power = 2;
    double threshold = 0.1;

    SimParams sim;
    AdamParams adam;

    PrimaryLoss primary = PrimaryLoss::Locomotion;
    bool erosion_enabled = false;
    ErosionSpec erosion;
    bool rot_moment_enabled = false;
    RotMomentSpec rot_moment;
    bool circle_enabled = false;
    CircleSpec circle;

    // experiment modes
    bool antiphase = false;
    bool constrained = false;
    double border_cm = 0.3;
    bool direct = false;
    bool replacement = false;
    bool object_enabled = false;
    ObjectConfig object;
    std::optional<std::filesystem::path> mask_path;

    int attempts = 10;
    int direct_attempts = 50;
    std::vector<std::uint64_t> seeds{1};
    std::filesystem::path output_dir = "out";

    Workspace workspace() const;
    BodyMask body_mask() const;
    DesignSettings design_settings() const;
    RasterSettings raster_settings() const;
    SceneOptions scene_options() const;
    LossSpec loss_spec() const;

    /// Cross-field checks; throws std::invalid_argument naming the offending key.
    void validate() const;
};

/// Parses flat `key = value` text; `#` starts a comment. Unknown keys and
/// out-of-range values are rejected. Constrained actuation switches the particle
/// lattice to 128 x 88.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

/// Applies one key/value pair to `config`.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Writes every key with its current value in the parseable format.
std::string format_config(const RunConfig& config);

std::vector<std::string> config_keys();

}  // namespace morphogen
