#include "morphogen/report.hpp"

#include "morphogen/render.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace morphogen {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(10);
    return out;
}

}  // namespace

void write_fitness_header(std::ostream& out) { out << "seed,attempt,fitness_cm,loss_total,alive_particles\n"; }

void write_fitness_rows(std::ostream& out, const std::vector<AttemptRecord>& records) {
    for (const auto& r : records) {
        out << r.seed << ',' << r.attempt << ',';
        if (r.failed) {
            out << "nan,nan," << r.alive_particles << '\n';
        } else {
            out << r.fitness_cm << ',' << r.loss.total << ',' << r.alive_particles << '\n';
        }
    }
}

void write_loss_header(std::ostream& out) { out << "attempt,loss_total,loss_sim,loss_I,loss_circle,mean_mass\n"; }

void write_loss_rows(std::ostream& out, const std::vector<AttemptRecord>& records) {
    for (const auto& r : records) {
        if (r.failed) continue;
        out << r.attempt << ',' << r.loss.total << ',' << r.loss.sim << ',' << r.loss.rot_moment << ','
            << r.loss.circle << ',' << r.loss.mean_mass << '\n';
    }
}

std::string attempt_stem(const AttemptRecord& record) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "seed%llu_attempt%02d", static_cast<unsigned long long>(record.seed),
                  record.attempt);
    return buf;
}

void write_attempt_files(const std::filesystem::path& dir, const AttemptRecord& record) {
    const std::string stem = attempt_stem(record);
    {
        auto out = open_out(dir / (stem + ".genome"));
        write_genome(out, record.genome);
    }
    write_trajectory_csv(dir / (stem + "_trajectory.csv"), record.com_trace_cm, record.object_trace_cm);
    auto svg = open_out(dir / (stem + ".svg"));
    svg << render_svg(record);
}

void write_run_outputs(const std::filesystem::path& dir, const std::vector<std::vector<AttemptRecord>>& runs) {
    std::filesystem::create_directories(dir);
    auto fitness = open_out(dir / "fitness.csv");
    write_fitness_header(fitness);
    for (const auto& records : runs) {
        write_fitness_rows(fitness, records);
        if (records.empty()) continue;
        auto losses = open_out(dir / ("seed" + std::to_string(records.front().seed) + "_losses.csv"));
        write_loss_header(losses);
        write_loss_rows(losses, records);
        for (const auto& r : records) write_attempt_files(dir, r);
    }
}

}  // namespace morphogen
