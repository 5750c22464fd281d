#pragma once

#include "morphogen/optimizer.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace morphogen {

/// `seed,attempt,fitness_cm,loss_total,alive_particles`
void write_fitness_header(std::ostream& out);
void write_fitness_rows(std::ostream& out, const std::vector<AttemptRecord>& records);

/// `attempt,loss_total,loss_sim,loss_I,loss_circle,mean_mass`
void write_loss_header(std::ostream& out);
void write_loss_rows(std::ostream& out, const std::vector<AttemptRecord>& records);

/// Stem shared by the per-attempt files, e.g. "seed3_attempt07".
std::string attempt_stem(const AttemptRecord& record);

/// Genome snapshot, trajectory CSV and SVG of one attempt.
void write_attempt_files(const std::filesystem::path& dir, const AttemptRecord& record);

/// Every output of a batch of runs: fitness.csv over all seeds, one loss
/// breakdown CSV per seed, and the per-attempt files.
void write_run_outputs(const std::filesystem::path& dir, const std::vector<std::vector<AttemptRecord>>& runs);

}  // namespace morphogen
