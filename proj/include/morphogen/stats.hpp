#pragma once

#include <span>

namespace morphogen {

double mean(std::span<const double> xs);
double median(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

struct Interval {
    double mean = 0.0;
    double low = 0.0;
    double high = 0.0;
};

/// Normal-theory interval for the mean at `confidence`, Bonferroni-corrected for
/// `comparisons` simultaneous intervals.
Interval normal_ci(std::span<const double> xs, double confidence = 0.99, int comparisons = 1);

/// Mann-Whitney U of `x` against `y` (ties count one half).
double mann_whitney_u(std::span<const double> x, std::span<const double> y);

/// One-sided p-value for "x tends to exceed y". Exact null distribution when there
/// are no ties, tie-corrected normal approximation otherwise.
double mann_whitney_greater(std::span<const double> x, std::span<const double> y);

}  // namespace morphogen
