#include "spincant/grid.hpp"

#include <cmath>

#include "spincant/errors.hpp"

namespace spincant {

Grid::Grid(double lo_, double hi_, int m_) : lo(lo_), hi(hi_), m(m_) {
    if (!(hi > lo)) throw ValidationError("grid: hi must be > lo");
    if (m < 2) throw ValidationError("grid: needs at least 2 points");
}

Grid Grid::symmetric(double half_width, int m) {
    if (!(half_width > 0.0)) throw ValidationError("grid: half width must be > 0");
    return Grid(-half_width, half_width, m);
}

Grid Grid::for_energy(double energy_mean, int m, double margin) {
    if (!(energy_mean >= 0.0)) throw ValidationError("grid: energy must be >= 0");
    return symmetric(std::sqrt(2.0 * energy_mean) + margin, m);
}

std::vector<double> Grid::points() const {
    std::vector<double> z(m);
    for (int i = 0; i < m; ++i) z[i] = point(i);
    return z;
}

double trapezoid(const std::vector<double>& f, double dz) {
    if (f.size() < 2) return 0.0;
    double acc = 0.5 * (f.front() + f.back());
    for (size_t i = 1; i + 1 < f.size(); ++i) acc += f[i];
    return acc * dz;
}

double trapezoid_range(const std::vector<double>& f, double dz, int i0, int i1) {
    if (i0 < 0 || i1 >= static_cast<int>(f.size()) || i1 <= i0)
        throw ValidationError("trapezoid_range: bad index range");
    double acc = 0.5 * (f[i0] + f[i1]);
    for (int i = i0 + 1; i < i1; ++i) acc += f[i];
    return acc * dz;
}

}
