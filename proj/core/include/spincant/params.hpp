#pragma once

namespace spincant {

// Dimensionless model parameters. Lengths are in units of Z_q = sqrt(hbar
// omega_c / k_c), momenta in hbar/Z_q, forces in k_c Z_q, time in 1/omega_c.
struct SimParams {
    double eta = 0.0;       // spin-cantilever coupling, g F / (2 F_q)
    double epsilon = 0.0;   // rotating-frame transverse field, gamma B_1 / omega_c
    double beta = 0.0;      // cantilever friction, 1 / Q
    double big_d = 0.0;     // thermal occupation scale, k_B T / (hbar omega_c)
    int n_basis = 0;        // number of oscillator eigenfunctions kept

    void validate() const;
};

// Laboratory-frame quantities in SI units.
struct PhysicalParams {
    double omega_c = 0.0;      // cantilever angular frequency, rad/s
    double k_c = 0.0;          // cantilever spring constant, N/m
    double force = 0.0;        // tip-spin magnetic force at z = 0, N
    double g_factor = 0.0;     // electron g-factor
    double b1 = 0.0;           // rotating transverse field amplitude, T
    double quality = 0.0;      // cantilever quality factor
    double temperature = 0.0;  // environment temperature, K
};

namespace constants {
inline constexpr double hbar = 1.054571817e-34;     // J s
inline constexpr double k_boltzmann = 1.380649e-23; // J/K
inline constexpr double mu_bohr = 9.2740100783e-24; // J/T
}

// Oscillator length unit Z_q in meters.
double oscillator_length(double omega_c, double k_c);

// Maps lab quantities to the dimensionless group. n_basis is a numerical
// choice, not a physical one, and is passed through unchanged.
SimParams dimensionless_from_physical(const PhysicalParams& phys, int n_basis);

}
