#pragma once

#include <vector>

namespace spincant {

// Uniform position grid with endpoints included.
struct Grid {
    double lo = 0.0;
    double hi = 0.0;
    int m = 0;

    Grid() = default;
    Grid(double lo_, double hi_, int m_);

    static Grid symmetric(double half_width, int m);

    // Covers +-(sqrt(2 E) + margin), the swing of a state with mean
    // oscillator energy E plus tail room.
    static Grid for_energy(double energy_mean, int m = 1024, double margin = 8.0);

    double dz() const { return (hi - lo) / (m - 1); }
    double point(int i) const { return lo + dz() * i; }
    std::vector<double> points() const;
};

// Trapezoid quadrature over grid samples.
double trapezoid(const std::vector<double>& f, double dz);

// Trapezoid over the inclusive index range [i0, i1].
double trapezoid_range(const std::vector<double>& f, double dz, int i0, int i1);

}
