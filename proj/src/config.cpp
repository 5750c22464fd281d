#include "morphogen/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace morphogen {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
    throw std::invalid_argument("invalid value for '" + key + "': '" + value + "' (" + why + ")");
}

[[noreturn]] void out_of_range(const std::string& key, const std::string& value, const std::string& range) {
    throw std::invalid_argument("value out of range for '" + key + "': " + value + " (expected " + range + ")");
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, v, "not a number");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, v, "not an integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "not a boolean");
}

std::vector<std::uint64_t> to_seeds(const std::string& key, const std::string& v) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (const auto dash = item.find('-'); dash != std::string::npos && dash > 0) {
            const auto lo = to_int(key, trim(item.substr(0, dash)));
            const auto hi = to_int(key, trim(item.substr(dash + 1)));
            if (lo < 0 || hi < lo) out_of_range(key, item, "non-negative ascending range");
            for (auto s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
        } else {
            const auto s = to_int(key, item);
            if (s < 0) out_of_range(key, item, "non-negative seed");
            seeds.push_back(static_cast<std::uint64_t>(s));
        }
    }
    if (seeds.empty()) bad_value(key, v, "no seeds");
    return seeds;
}

std::string fmt_double(double v) {
    // shortest text that reads back to the same value
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

int positive_int(const std::string& key, const std::string& v, long long max = 1'000'000'000) {
    const auto n = to_int(key, v);
    if (n <= 0 || n > max) out_of_range(key, v, "a positive integer");
    return static_cast<int>(n);
}

double positive(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (!(d > 0.0)) out_of_range(key, v, "> 0");
    return d;
}

double non_negative(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (!(d >= 0.0)) out_of_range(key, v, ">= 0");
    return d;
}

int power(const std::string& key, const std::string& v) {
    const auto n = to_int(key, v);
    if (n < 1 || n > 3) out_of_range(key, v, "1, 2 or 3");
    return static_cast<int>(n);
}

std::string distribution(const std::string& key, const std::string& v) {
    static const char* names[] = {"normal", "normal_sq", "uniform", "uniform_sq", "constant"};
    for (const char* n : names) {
        if (v == n) return v;
    }
    bad_value(key, v, "expected normal, normal_sq, uniform, uniform_sq or constant");
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> t;
        auto b = [](bool v) { return std::string(v ? "true" : "false"); };

        t["lattice_x"] = {[](RunConfig& c, auto& k, auto& v) { c.lattice_x = positive_int(k, v, 4096); },
                          [](const RunConfig& c) { return std::to_string(c.lattice_x); }};
        t["lattice_y"] = {[](RunConfig& c, auto& k, auto& v) { c.lattice_y = positive_int(k, v, 4096); },
                          [](const RunConfig& c) { return std::to_string(c.lattice_y); }};
        t["workspace_width_cm"] = {[](RunConfig& c, auto& k, auto& v) { c.workspace_width_cm = positive(k, v); },
                                   [](const RunConfig& c) { return fmt_double(c.workspace_width_cm); }};
        t["workspace_height_cm"] = {[](RunConfig& c, auto& k, auto& v) { c.workspace_height_cm = positive(k, v); },
                                    [](const RunConfig& c) { return fmt_double(c.workspace_height_cm); }};
        t["num_voids"] = {[](RunConfig& c, auto& k, auto& v) { c.num_voids = positive_int(k, v, 100000); },
                          [](const RunConfig& c) { return std::to_string(c.num_voids); }};
        t["num_muscles"] = {[](RunConfig& c, auto& k, auto& v) { c.num_muscles = positive_int(k, v, 100000); },
                            [](const RunConfig& c) { return std::to_string(c.num_muscles); }};
        t["void_radius_dist"] = {[](RunConfig& c, auto& k, auto& v) { c.void_radius_dist = distribution(k, v); },
                                 [](const RunConfig& c) { return c.void_radius_dist; }};
        t["void_coverage"] = {[](RunConfig& c, auto& k, auto& v) { c.void_coverage = non_negative(k, v); },
                              [](const RunConfig& c) { return fmt_double(c.void_coverage); }};
        t["muscle_radius_dist"] = {[](RunConfig& c, auto& k, auto& v) { c.muscle_radius_dist = distribution(k, v); },
                                   [](const RunConfig& c) { return c.muscle_radius_dist; }};
        t["muscle_coverage"] = {[](RunConfig& c, auto& k, auto& v) { c.muscle_coverage = non_negative(k, v); },
                                [](const RunConfig& c) { return fmt_double(c.muscle_coverage); }};
        t["void_power"] = {[](RunConfig& c, auto& k, auto& v) { c.void_power = power(k, v); },
                           [](const RunConfig& c) { return std::to_string(c.void_power); }};
        t["muscle_power"] = {[](RunConfig& c, auto& k, auto& v) { c.muscle_power = power(k, v); },
                             [](const RunConfig& c) { return std::to_string(c.muscle_power); }};
        t["threshold"] = {[](RunConfig& c, auto& k, auto& v) {
                              const double d = to_double(k, v);
                              if (!(d > 0.0 && d < 1.0)) out_of_range(k, v, "(0, 1)");
                              c.threshold = d;
                          },
                          [](const RunConfig& c) { return fmt_double(c.threshold); }};

        t["steps"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.steps = positive_int(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.sim.steps); }};
        t["substeps"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.substeps = positive_int(k, v, 64); },
                         [](const RunConfig& c) { return std::to_string(c.sim.substeps); }};
        t["dt"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.dt = positive(k, v); },
                   [](const RunConfig& c) { return fmt_double(c.sim.dt); }};
        t["mpm_grid"] = {[](RunConfig& c, auto& k, auto& v) {
                             c.sim.grid = positive_int(k, v, 4096);
                             if (c.sim.grid < 8) out_of_range(k, v, ">= 8");
                         },
                         [](const RunConfig& c) { return std::to_string(c.sim.grid); }};
        t["gravity"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.gravity = non_negative(k, v); },
                        [](const RunConfig& c) { return fmt_double(c.sim.gravity); }};
        t["friction"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.friction = non_negative(k, v); },
                         [](const RunConfig& c) { return fmt_double(c.sim.friction); }};
        t["internal_damping"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.internal_damping = non_negative(k, v); },
                                 [](const RunConfig& c) { return fmt_double(c.sim.internal_damping); }};
        t["global_damping"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.global_damping = non_negative(k, v); },
                               [](const RunConfig& c) { return fmt_double(c.sim.global_damping); }};
        t["actuation_strength"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.actuation_strength = non_negative(k, v); },
                                   [](const RunConfig& c) { return fmt_double(c.sim.actuation_strength); }};
        t["actuation_freq"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.actuation_freq = non_negative(k, v); },
                               [](const RunConfig& c) { return fmt_double(c.sim.actuation_freq); }};
        t["youngs_modulus"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.youngs = positive(k, v); },
                               [](const RunConfig& c) { return fmt_double(c.sim.youngs); }};
        t["poisson"] = {[](RunConfig& c, auto& k, auto& v) {
                            const double d = to_double(k, v);
                            if (!(d > -1.0 && d < 0.5)) out_of_range(k, v, "(-1, 0.5)");
                            c.sim.poisson = d;
                        },
                        [](const RunConfig& c) { return fmt_double(c.sim.poisson); }};
        t["cm_per_unit"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.cm_per_unit = positive(k, v); },
                            [](const RunConfig& c) { return fmt_double(c.sim.cm_per_unit); }};
        t["left_offset"] = {[](RunConfig& c, auto& k, auto& v) { c.sim.left_offset = positive(k, v); },
                            [](const RunConfig& c) { return fmt_double(c.sim.left_offset); }};

        t["learning_rate"] = {[](RunConfig& c, auto& k, auto& v) { c.adam.learning_rate = positive(k, v); },
                              [](const RunConfig& c) { return fmt_double(c.adam.learning_rate); }};
        t["adam_beta1"] = {[](RunConfig& c, auto& k, auto& v) {
                               const double d = to_double(k, v);
                               if (!(d >= 0.0 && d < 1.0)) out_of_range(k, v, "[0, 1)");
                               c.adam.beta1 = d;
                           },
                           [](const RunConfig& c) { return fmt_double(c.adam.beta1); }};
        t["adam_beta2"] = {[](RunConfig& c, auto& k, auto& v) {
                               const double d = to_double(k, v);
                               if (!(d >= 0.0 && d < 1.0)) out_of_range(k, v, "[0, 1)");
                               c.adam.beta2 = d;
                           },
                           [](const RunConfig& c) { return fmt_double(c.adam.beta2); }};
        t["adam_epsilon"] = {[](RunConfig& c, auto& k, auto& v) { c.adam.epsilon = positive(k, v); },
                             [](const RunConfig& c) { return fmt_double(c.adam.epsilon); }};

        t["primary_loss"] = {[](RunConfig& c, auto& k, auto& v) {
                                 try {
                                     c.primary = primary_loss_from_string(v);
                                 } catch (const std::invalid_argument&) {
                                     bad_value(k, v, "expected locomotion, transport or eject");
                                 }
                             },
                             [](const RunConfig& c) { return to_string(c.primary); }};
        t["erosion"] = {[](RunConfig& c, auto& k, auto& v) { c.erosion_enabled = to_bool(k, v); },
                        [b](const RunConfig& c) { return b(c.erosion_enabled); }};
        t["erosion_alpha"] = {[](RunConfig& c, auto& k, auto& v) { c.erosion.alpha = non_negative(k, v); },
                              [](const RunConfig& c) { return fmt_double(c.erosion.alpha); }};
        t["erosion_beta"] = {[](RunConfig& c, auto& k, auto& v) { c.erosion.beta = non_negative(k, v); },
                             [](const RunConfig& c) { return fmt_double(c.erosion.beta); }};
        t["erosion_target"] = {[](RunConfig& c, auto& k, auto& v) {
                                   const double d = to_double(k, v);
                                   if (!(d >= 0.0 && d <= 1.0)) out_of_range(k, v, "[0, 1]");
                                   c.erosion.target = d;
                               },
                               [](const RunConfig& c) { return fmt_double(c.erosion.target); }};
        t["rot_moment"] = {[](RunConfig& c, auto& k, auto& v) { c.rot_moment_enabled = to_bool(k, v); },
                           [b](const RunConfig& c) { return b(c.rot_moment_enabled); }};
        t["rot_moment_gamma"] = {[](RunConfig& c, auto& k, auto& v) { c.rot_moment.gamma = non_negative(k, v); },
                                 [](const RunConfig& c) { return fmt_double(c.rot_moment.gamma); }};
        t["circle"] = {[](RunConfig& c, auto& k, auto& v) { c.circle_enabled = to_bool(k, v); },
                       [b](const RunConfig& c) { return b(c.circle_enabled); }};
        t["circle_gamma"] = {[](RunConfig& c, auto& k, auto& v) { c.circle.gamma = non_negative(k, v); },
                             [](const RunConfig& c) { return fmt_double(c.circle.gamma); }};
        t["circle_center_cm"] = {[](RunConfig& c, auto& k, auto& v) {
                                     if (v == "auto") {
                                         c.circle.center_cm.reset();
                                         return;
                                     }
                                     const auto comma = v.find(',');
                                     if (comma == std::string::npos) bad_value(k, v, "expected 'x,y' or auto");
                                     c.circle.center_cm = Vec2(to_double(k, trim(v.substr(0, comma))),
                                                               to_double(k, trim(v.substr(comma + 1))));
                                 },
                                 [](const RunConfig& c) {
                                     if (!c.circle.center_cm) return std::string("auto");
                                     return fmt_double(c.circle.center_cm->x()) + "," + fmt_double(c.circle.center_cm->y());
                                 }};
        t["circle_radius_cm"] = {[](RunConfig& c, auto& k, auto& v) {
                                     if (v == "auto") {
                                         c.circle.radius_cm.reset();
                                         return;
                                     }
                                     c.circle.radius_cm = positive(k, v);
                                 },
                                 [](const RunConfig& c) {
                                     return c.circle.radius_cm ? fmt_double(*c.circle.radius_cm) : std::string("auto");
                                 }};

        t["antiphase"] = {[](RunConfig& c, auto& k, auto& v) { c.antiphase = to_bool(k, v); },
                          [b](const RunConfig& c) { return b(c.antiphase); }};
        t["constrained"] = {[](RunConfig& c, auto& k, auto& v) { c.constrained = to_bool(k, v); },
                            [b](const RunConfig& c) { return b(c.constrained); }};
        t["border_cm"] = {[](RunConfig& c, auto& k, auto& v) { c.border_cm = non_negative(k, v); },
                          [](const RunConfig& c) { return fmt_double(c.border_cm); }};
        t["direct"] = {[](RunConfig& c, auto& k, auto& v) { c.direct = to_bool(k, v); },
                       [b](const RunConfig& c) { return b(c.direct); }};
        t["replacement"] = {[](RunConfig& c, auto& k, auto& v) { c.replacement = to_bool(k, v); },
                            [b](const RunConfig& c) { return b(c.replacement); }};
        t["object"] = {[](RunConfig& c, auto& k, auto& v) { c.object_enabled = to_bool(k, v); },
                       [b](const RunConfig& c) { return b(c.object_enabled); }};
        t["object_radius_cm"] = {[](RunConfig& c, auto& k, auto& v) { c.object.radius_cm = positive(k, v); },
                                 [](const RunConfig& c) { return fmt_double(c.object.radius_cm); }};
        t["object_particles"] = {[](RunConfig& c, auto& k, auto& v) { c.object.particle_count = positive_int(k, v, 1000000); },
                                 [](const RunConfig& c) { return std::to_string(c.object.particle_count); }};
        t["mask"] = {[](RunConfig& c, auto&, auto& v) {
                         if (v.empty() || v == "none") {
                             c.mask_path.reset();
                         } else {
                             c.mask_path = v;
                         }
                     },
                     [](const RunConfig& c) { return c.mask_path ? c.mask_path->string() : std::string("none"); }};

        t["attempts"] = {[](RunConfig& c, auto& k, auto& v) { c.attempts = positive_int(k, v, 100000); },
                         [](const RunConfig& c) { return std::to_string(c.attempts); }};
        t["direct_attempts"] = {[](RunConfig& c, auto& k, auto& v) { c.direct_attempts = positive_int(k, v, 100000); },
                                [](const RunConfig& c) { return std::to_string(c.direct_attempts); }};
        t["seeds"] = {[](RunConfig& c, auto& k, auto& v) { c.seeds = to_seeds(k, v); },
                      [](const RunConfig& c) {
                          std::string s;
                          for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
                          return s;
                      }};
        t["output_dir"] = {[](RunConfig& c, auto&, auto& v) { c.output_dir = v; },
                           [](const RunConfig& c) { return c.output_dir.string(); }};
        return t;
    }();
    return table;
}

}  // namespace

Workspace RunConfig::workspace() const {
    return Workspace{workspace_width_cm, workspace_height_cm, lattice_x, lattice_y};
}

BodyMask RunConfig::body_mask() const {
    if (mask_path) return load_mask(*mask_path, lattice_x, lattice_y);
    return BodyMask::rectangle(lattice_x, lattice_y);
}

DesignSettings RunConfig::design_settings() const {
    DesignSettings d;
    d.workspace = workspace();
    d.body_mask = body_mask();
    d.num_voids = num_voids;
    d.num_muscles = num_muscles;
    d.void_radius = RadiusDistribution::from_coverage(void_radius_dist, void_coverage, d.workspace, num_voids);
    d.muscle_radius = RadiusDistribution::from_coverage(muscle_radius_dist, muscle_coverage, d.workspace, num_muscles);
    d.antiphase = antiphase;
    return d;
}

RasterSettings RunConfig::raster_settings() const {
    RasterSettings r;
    r.void_power = void_power;
    r.muscle_power = muscle_power;
    r.threshold = threshold;
    r.youngs_modulus = sim.youngs;
    r.constrained = constrained;
    r.border_cm = border_cm;
    return r;
}

SceneOptions RunConfig::scene_options() const {
    SceneOptions o;
    if (object_enabled) o.object = object;
    return o;
}

LossSpec RunConfig::loss_spec() const {
    LossSpec l;
    l.primary = primary;
    if (erosion_enabled) l.erosion = erosion;
    if (rot_moment_enabled) l.rot_moment = rot_moment;
    if (circle_enabled) l.circle = circle;
    return l;
}

void RunConfig::validate() const {
    sim.validate();
    loss_spec().validate();
    if (primary != PrimaryLoss::Locomotion && !object_enabled) {
        throw std::invalid_argument("primary_loss '" + to_string(primary) + "' requires object = true");
    }
    if (constrained && (lattice_x != 128 || lattice_y != 88)) {
        throw std::invalid_argument("constrained actuation requires a 128 x 88 particle lattice");
    }
    if (direct && replacement) throw std::invalid_argument("replacement has no meaning in direct mode");
    // the robot must fit inside the simulation domain
    const double span_x = workspace_width_cm / sim.cm_per_unit + sim.left_offset;
    const double span_y = workspace_height_cm / sim.cm_per_unit + sim.floor_height();
    if (span_x >= 1.0 - sim.boundary_cells * sim.dx() || span_y >= 1.0 - sim.boundary_cells * sim.dx()) {
        throw std::invalid_argument("workspace does not fit in the simulation domain (check cm_per_unit)");
    }
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
    const auto& table = fields();
    const auto it = table.find(key);
    if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    it->second.set(config, key, value);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (config.constrained) {
        config.lattice_x = 128;
        config.lattice_y = 88;
    }
    config.validate();
    return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    RunConfig config = parse_config_text(buffer.str());
    if (config.mask_path && config.mask_path->is_relative()) {
        config.mask_path = path.parent_path() / *config.mask_path;
    }
    return config;
}

std::string format_config(const RunConfig& config) {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [key, field] : fields()) keys.push_back(key);
    return keys;
}

}  // namespace morphogen
