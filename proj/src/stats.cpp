#include "morphogen/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace morphogen {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

Interval normal_ci(std::span<const double> xs, double confidence, int comparisons) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
    if (comparisons < 1) throw std::invalid_argument("comparisons must be at least 1");
    Interval ci;
    ci.mean = mean(xs);
    const double tail = (1.0 - confidence) / (2.0 * comparisons);
    const double z = boost::math::quantile(boost::math::normal(), 1.0 - tail);
    const double half = xs.empty() ? 0.0 : z * sample_sd(xs) / std::sqrt(static_cast<double>(xs.size()));
    ci.low = ci.mean - half;
    ci.high = ci.mean + half;
    return ci;
}

double mann_whitney_u(std::span<const double> x, std::span<const double> y) {
    double u = 0.0;
    for (double a : x) {
        for (double b : y) {
            if (a > b) u += 1.0;
            else if (a == b) u += 0.5;
        }
    }
    return u;
}

namespace {

// counts[u] = number of orderings of m x-values among n y-values with U = u
std::vector<double> u_distribution(std::size_t m, std::size_t n) {
    const std::size_t max_u = m * n;
    std::vector<std::vector<double>> prev(n + 1, std::vector<double>(max_u + 1, 0.0));
    for (std::size_t j = 0; j <= n; ++j) prev[j][0] = 1.0;  // zero x-values
    for (std::size_t i = 1; i <= m; ++i) {
        std::vector<std::vector<double>> cur(n + 1, std::vector<double>(max_u + 1, 0.0));
        cur[0][0] = 1.0;
        for (std::size_t j = 1; j <= n; ++j) {
            for (std::size_t u = 0; u <= i * j; ++u) {
                // largest element is an x (beats all j y-values) or a y
                double c = cur[j - 1][u];
                if (u >= j) c += prev[j][u - j];
                cur[j][u] = c;
            }
        }
        prev = std::move(cur);
    }
    return prev[n];
}

}  // namespace

double mann_whitney_greater(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw std::invalid_argument("Mann-Whitney needs two non-empty samples");
    const double u = mann_whitney_u(x, y);
    const std::size_t m = x.size();
    const std::size_t n = y.size();

    std::map<double, int> ranks;
    for (double a : x) ++ranks[a];
    for (double b : y) ++ranks[b];
    const bool ties = std::any_of(ranks.begin(), ranks.end(), [](const auto& kv) { return kv.second > 1; });

    if (!ties) {
        const auto counts = u_distribution(m, n);
        double total = 0.0;
        double upper = 0.0;
        const auto u_obs = static_cast<std::size_t>(std::llround(u));
        for (std::size_t k = 0; k < counts.size(); ++k) {
            total += counts[k];
            if (k >= u_obs) upper += counts[k];
        }
        return upper / total;
    }

    const double N = static_cast<double>(m + n);
    double tie_term = 0.0;
    for (const auto& [value, t] : ranks) tie_term += static_cast<double>(t) * t * t - t;
    const double mu = 0.5 * static_cast<double>(m * n);
    const double var = static_cast<double>(m * n) / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
    if (!(var > 0.0)) return u > mu ? 0.0 : 1.0;
    const double z = (u - mu - 0.5) / std::sqrt(var);
    return boost::math::cdf(boost::math::complement(boost::math::normal(), z));
}

}  // namespace morphogen
