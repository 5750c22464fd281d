#include "morphogen/config.hpp"
#include "morphogen/optimizer.hpp"
#include "morphogen/render.hpp"
#include "morphogen/report.hpp"
#include "morphogen/sweep.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace morphogen;

namespace {

struct Common {
    std::string config;
    std::string seeds;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c, const char* seeds_help = "seed list, e.g. 1-10,15") {
    app->add_option("--config", c.config, "key = value config file");
    app->add_option("--seeds,--seed", c.seeds, seeds_help);
    app->add_option("--out", c.out, "output location");
    app->add_option("--set", c.overrides, "extra key=value settings, applied after the file");
}

RunConfig load(const Common& c) {
    RunConfig cfg = c.config.empty() ? parse_config_text("") : parse_config(c.config);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.seeds.empty()) apply_setting(cfg, "seeds", c.seeds);
    if (cfg.constrained) {
        cfg.lattice_x = 128;
        cfg.lattice_y = 88;
    }
    cfg.validate();
    return cfg;
}

fs::path output_dir(const Common& c, const RunConfig& cfg) {
    if (!c.out.empty()) return c.out;
    if (const char* env = std::getenv("MORPHOGEN_OUT"); env && *env) return env;
    return cfg.output_dir;
}

int run_batch(const Common& c, bool direct) {
    const RunConfig cfg = load(c);
    const fs::path dir = output_dir(c, cfg);
    std::vector<std::vector<AttemptRecord>> runs;
    bool ok = true;
    for (auto seed : cfg.seeds) {
        auto records = direct ? run_direct(cfg, seed) : run_attempts(cfg, seed);
        for (const auto& r : records) {
            std::cout << "seed " << seed << " attempt " << r.attempt;
            if (r.failed) {
                std::cout << " FAILED: " << r.error << '\n';
                ok = false;
            } else {
                std::cout << std::fixed << std::setprecision(3) << " fitness " << r.fitness_cm << " cm, alive "
                          << r.alive_particles << '\n';
            }
        }
        runs.push_back(std::move(records));
    }
    write_run_outputs(dir, runs);
    std::cout << "wrote " << dir.string() << '\n';
    return ok ? 0 : 1;
}

int run_init(const Common& c) {
    const RunConfig cfg = load(c);
    const fs::path dir = output_dir(c, cfg);
    fs::create_directories(dir);
    std::ofstream(dir / "config.txt") << format_config(cfg);
    const DesignSettings ds = cfg.design_settings();
    for (auto seed : cfg.seeds) {
        std::ofstream out(dir / ("seed" + std::to_string(seed) + "_initial.genome"));
        write_genome(out, sample_initial(ds, seed));
    }
    std::cout << "wrote " << (dir / "config.txt").string() << " and " << cfg.seeds.size() << " initial genome(s)\n";
    return 0;
}

int run_gradcheck(const Common& c, int steps, double h, double margin) {
    const RunConfig base = load(c);
    const RunConfig cfg = reduced_config(base, steps);
    const fs::path dir = output_dir(c, base);
    fs::create_directories(dir);
    bool ok = true;
    std::ofstream csv(dir / "gradcheck.csv");
    csv << "seed,parameter,analytic,numeric,rel_error,excluded\n" << std::setprecision(10);
    for (auto seed : cfg.seeds) {
        const GradcheckReport r = gradcheck(cfg, seed, h, margin);
        for (const auto& e : r.entries) {
            csv << seed << ',' << e.name << ',' << e.analytic << ',' << e.numeric << ',' << e.rel_error << ','
                << (e.excluded ? 1 : 0) << '\n';
        }
        const bool pass = r.median_rel <= 1e-3 && r.p95_rel <= 1e-2;
        ok = ok && pass;
        std::cout << "seed " << seed << ": checked " << r.checked << " of " << r.entries.size() << ", median "
                  << r.median_rel << ", p95 " << r.p95_rel << ", max " << r.max_rel << (pass ? " PASS" : " FAIL")
                  << '\n';
        for (const auto& name : r.offenders) std::cout << "  above 1e-2: " << name << '\n';
    }
    return ok ? 0 : 1;
}

int run_sweep_cmd(const Common& c, int parallelism) {
    if (c.config.empty()) throw std::invalid_argument("sweep needs --config <sweep file>");
    SweepSpec spec = parse_sweep(c.config);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        apply_setting(spec.base, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.seeds.empty()) apply_setting(spec.base, "seeds", c.seeds);
    const fs::path dir = output_dir(c, spec.base);
    fs::create_directories(dir);
    const auto runs = run_sweep(spec, parallelism, {}, [](const std::string& msg) { std::cerr << msg << '\n'; });
    std::ofstream(dir / "aggregate.csv") << aggregate_csv(spec, runs);
    std::ofstream per_run(dir / "runs.csv");
    per_run << "condition,seed,attempt,fitness_cm,alive_particles\n" << std::setprecision(10);
    bool ok = true;
    for (const auto& r : runs) {
        ok = ok && !r.failed;
        for (std::size_t a = 0; a < r.fitness.size(); ++a) {
            per_run << r.condition << ',' << r.seed << ',' << a + 1 << ',' << r.fitness[a] << ',' << r.alive[a] << '\n';
        }
    }
    std::cout << "wrote " << (dir / "aggregate.csv").string() << '\n';
    return ok ? 0 : 1;
}

int run_render(const Common& c, const std::string& genome_path, bool simulate_trace) {
    const RunConfig cfg = load(c);
    AttemptRecord rec;
    rec.seed = cfg.seeds.front();
    rec.attempt = 1;
    if (genome_path.empty()) {
        rec.genome = sample_initial(cfg.design_settings(), rec.seed);
    } else {
        std::ifstream in(genome_path);
        if (!in) throw std::runtime_error("cannot read genome file: " + genome_path);
        rec.genome = read_genome(in);
    }
    rec.field = rasterize(rec.genome, cfg.raster_settings());
    rec.alive_particles = rec.field.alive_count();
    if (simulate_trace) {
        const auto ev = evaluate_design(rec.field, cfg, rec.genome.body_mask, false);
        rec.fitness_cm = -ev.primary.loss;
        rec.com_trace_cm = ev.trajectory.robot_com_cm;
        rec.object_trace_cm = ev.trajectory.object_com_cm;
    }
    const fs::path out = c.out.empty() ? output_dir(c, cfg) / "render.svg" : fs::path(c.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << render_svg(rec);
    std::cout << "wrote " << out.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"morphogen: differentiable soft-robot design"};
    app.require_subcommand(1);

    Common init_c, run_c, direct_c, grad_c, sweep_c, render_c;
    auto* init = app.add_subcommand("init", "write a resolved config and initial genomes");
    add_common(init, init_c);
    auto* run = app.add_subcommand("run", "patch-based design runs, one per seed");
    add_common(run, run_c);
    auto* direct = app.add_subcommand("direct", "direct-particle baseline runs");
    add_common(direct, direct_c);

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check on the reduced scene");
    add_common(grad, grad_c);
    int steps = 128;
    double h = 1e-4;
    double margin = 1e-3;
    grad->add_option("--steps", steps, "simulation steps")->check(CLI::PositiveNumber);
    grad->add_option("--fd-step", h, "central-difference step, cm")->check(CLI::PositiveNumber);
    grad->add_option("--margin", margin, "exclusion margin around kinks")->check(CLI::NonNegativeNumber);

    auto* sweep = app.add_subcommand("sweep", "cross-product hyperparameter sweep");
    add_common(sweep, sweep_c);
    int parallelism = 1;
    sweep->add_option("--parallelism,-j", parallelism, "worker threads")->check(CLI::PositiveNumber);

    auto* render = app.add_subcommand("render", "SVG of a genome (sampled from the seed when none is given)");
    add_common(render, render_c);
    std::string genome_path;
    bool no_sim = false;
    render->add_option("--genome", genome_path, "genome snapshot");
    render->add_flag("--no-sim", no_sim, "skip the rollout and draw the body only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*init) return run_init(init_c);
        if (*run) return run_batch(run_c, false);
        if (*direct) return run_batch(direct_c, true);
        if (*grad) return run_gradcheck(grad_c, steps, h, margin);
        if (*sweep) return run_sweep_cmd(sweep_c, parallelism);
        if (*render) return run_render(render_c, genome_path, !no_sim);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
