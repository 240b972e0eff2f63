#include "spincant/hermite.hpp"

#include <cmath>

#include "spincant/errors.hpp"

namespace spincant {

namespace {

constexpr double kQuarterRootPi = 0.75112554446494248285870300477623; // pi^{-1/4}

}

double hermite_u(int n, double z) {
    if (n < 0) throw ValidationError("hermite_u: n must be >= 0");
    if (z * z > 1490.0) return 0.0;
    double prev = 0.0;
    double cur = kQuarterRootPi * std::exp(-0.5 * z * z);
    for (int k = 0; k < n; ++k) {
        double next = z * std::sqrt(2.0 / (k + 1)) * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

std::vector<double> hermite_table(const Grid& grid, int n_max) {
    if (n_max < 1) throw ValidationError("hermite_table: n_max must be >= 1");
    std::vector<double> t(static_cast<size_t>(grid.m) * n_max);
    for (int i = 0; i < grid.m; ++i) {
        const double z = grid.point(i);
        double* row = t.data() + static_cast<size_t>(i) * n_max;
        if (z * z > 1490.0) {
            for (int n = 0; n < n_max; ++n) row[n] = 0.0;
            continue;
        }
        double prev = 0.0;
        double cur = kQuarterRootPi * std::exp(-0.5 * z * z);
        row[0] = cur;
        for (int n = 1; n < n_max; ++n) {
            double next = z * std::sqrt(2.0 / n) * cur - std::sqrt((n - 1.0) / n) * prev;
            prev = cur;
            cur = next;
            row[n] = cur;
        }
    }
    return t;
}

}
