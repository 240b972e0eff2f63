#include "spincant/params.hpp"

#include <cmath>
#include <string>

#include "spincant/errors.hpp"

namespace spincant {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

}

void SimParams::validate() const {
    require(std::isfinite(eta) && eta >= 0.0, "eta must be finite and >= 0");
    require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be finite and >= 0");
    require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0");
    require(std::isfinite(big_d) && big_d >= 0.0, "D must be finite and >= 0");
    require(beta == 0.0 || big_d > 0.0, "open dynamics needs D > 0 when beta > 0");
    require(n_basis >= 1, "n_basis must be >= 1");
}

double oscillator_length(double omega_c, double k_c) {
    require(omega_c > 0.0, "omega_c must be > 0");
    require(k_c > 0.0, "k_c must be > 0");
    return std::sqrt(constants::hbar * omega_c / k_c);
}

SimParams dimensionless_from_physical(const PhysicalParams& phys, int n_basis) {
    const double z_q = oscillator_length(phys.omega_c, phys.k_c);
    const double f_q = phys.k_c * z_q;
    require(phys.force >= 0.0, "force must be >= 0");
    require(phys.g_factor > 0.0, "g_factor must be > 0");
    require(phys.b1 >= 0.0, "b1 must be >= 0");
    require(phys.quality > 0.0, "quality must be > 0");
    require(phys.temperature >= 0.0, "temperature must be >= 0");

    const double gamma = phys.g_factor * constants::mu_bohr / constants::hbar;

    SimParams p;
    p.eta = phys.g_factor * phys.force / (2.0 * f_q);
    p.epsilon = gamma * phys.b1 / phys.omega_c;
    p.beta = 1.0 / phys.quality;
    p.big_d = constants::k_boltzmann * phys.temperature / (constants::hbar * phys.omega_c);
    p.n_basis = n_basis;
    p.validate();
    return p;
}

}
