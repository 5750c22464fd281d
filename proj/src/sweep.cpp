#include "morphogen/sweep.hpp"

#include "morphogen/stats.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace morphogen {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

SweepSpec parse_sweep_text(const std::string& text) {
    SweepSpec spec;
    std::string base;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        const auto eq = line.find('=');
        const std::string key = eq == std::string::npos ? line : trim(line.substr(0, eq));
        const std::string value = eq == std::string::npos ? "" : trim(line.substr(eq + 1));
        if (key.rfind("axis ", 0) == 0) {
            SweepAxis axis;
            axis.key = trim(key.substr(5));
            std::istringstream vs(value);
            std::string v;
            while (std::getline(vs, v, '|')) {
                v = trim(v);
                if (!v.empty()) axis.values.push_back(v);
            }
            if (axis.values.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": axis has no values");
            spec.axes.push_back(std::move(axis));
        } else if (key == "sweep_confidence") {
            spec.confidence = std::stod(value);
            if (!(spec.confidence > 0.0 && spec.confidence < 1.0)) {
                throw std::invalid_argument("value out of range for 'sweep_confidence': " + value);
            }
        } else if (key == "sweep_comparisons") {
            spec.comparisons = std::stoi(value);
            if (spec.comparisons < 1) throw std::invalid_argument("value out of range for 'sweep_comparisons': " + value);
        } else {
            base += raw + "\n";
        }
    }
    spec.base = parse_config_text(base);
    expand_conditions(spec);  // validates every axis value
    return spec;
}

SweepSpec parse_sweep(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read sweep file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_sweep_text(buffer.str());
}

std::vector<SweepCondition> expand_conditions(const SweepSpec& spec) {
    std::vector<SweepCondition> out{SweepCondition{{}, spec.base}};
    for (const auto& axis : spec.axes) {
        std::vector<SweepCondition> next;
        for (const auto& cond : out) {
            for (const auto& value : axis.values) {
                SweepCondition c = cond;
                apply_setting(c.config, axis.key, value);
                c.settings.emplace_back(axis.key, value);
                next.push_back(std::move(c));
            }
        }
        out = std::move(next);
    }
    for (auto& c : out) {
        if (c.config.constrained) {
            c.config.lattice_x = 128;
            c.config.lattice_y = 88;
        }
        c.config.validate();
    }
    return out;
}

std::vector<SweepRun> run_sweep(const SweepSpec& spec, int parallelism, const SweepRunner& runner,
                                const std::function<void(const std::string&)>& log) {
    const auto conditions = expand_conditions(spec);
    const auto& seeds = spec.base.seeds;
    std::vector<SweepRun> runs(conditions.size() * seeds.size());
    for (std::size_t c = 0; c < conditions.size(); ++c) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            runs[c * seeds.size() + s].condition = c;
            runs[c * seeds.size() + s].seed = seeds[s];
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto report = [&](const std::string& msg) {
        if (!log) return;
        std::lock_guard<std::mutex> lock(log_mutex);
        log(msg);
    };
    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= runs.size()) return;
            SweepRun& run = runs[job];
            const RunConfig& cfg = conditions[run.condition].config;
            try {
                const auto records = runner ? runner(cfg, run.seed)
                                            : (cfg.direct ? run_direct(cfg, run.seed) : run_attempts(cfg, run.seed));
                for (const auto& r : records) {
                    if (r.failed) {
                        run.failed = true;
                        run.error = r.error;
                        break;
                    }
                    run.fitness.push_back(r.fitness_cm);
                    run.alive.push_back(r.alive_particles);
                }
            } catch (const std::exception& e) {
                run.failed = true;
                run.error = e.what();
            }
            if (run.failed) {
                report("condition " + std::to_string(run.condition) + " seed " + std::to_string(run.seed) +
                       " failed: " + run.error);
            } else {
                report("condition " + std::to_string(run.condition) + " seed " + std::to_string(run.seed) + " done");
            }
        }
    };

    const int threads = std::max(1, std::min<int>(parallelism, static_cast<int>(runs.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return runs;
}

std::string aggregate_csv(const SweepSpec& spec, std::vector<SweepRun> runs) {
    const auto conditions = expand_conditions(spec);
    // a failed run contributes nothing, not just its completed attempts
    std::erase_if(runs, [](const SweepRun& r) { return r.failed; });
    std::sort(runs.begin(), runs.end(), [](const SweepRun& a, const SweepRun& b) {
        return a.condition != b.condition ? a.condition < b.condition : a.seed < b.seed;
    });

    std::ostringstream out;
    out << std::setprecision(10);
    out << "condition";
    for (const auto& axis : spec.axes) out << ',' << axis.key;
    out << ",attempt,runs,mean_fitness_cm,ci_low_cm,ci_high_cm\n";
    for (std::size_t c = 0; c < conditions.size(); ++c) {
        std::size_t attempts = 0;
        for (const auto& r : runs) {
            if (r.condition == c) attempts = std::max(attempts, r.fitness.size());
        }
        for (std::size_t a = 0; a < attempts; ++a) {
            std::vector<double> xs;
            for (const auto& r : runs) {
                if (r.condition == c && a < r.fitness.size()) xs.push_back(r.fitness[a]);
            }
            const Interval ci = normal_ci(xs, spec.confidence, spec.comparisons);
            out << c;
            for (const auto& [key, value] : conditions[c].settings) out << ',' << value;
            out << ',' << a + 1 << ',' << xs.size() << ',' << ci.mean << ',' << ci.low << ',' << ci.high << '\n';
        }
    }
    return out.str();
}

}  // namespace morphogen
