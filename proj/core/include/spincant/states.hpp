#pragma once

#include <array>
#include <complex>
#include <vector>

namespace spincant {

using cdouble = std::complex<double>;

// Spin-cantilever wave function in the truncated oscillator eigenbasis:
// Psi = sum_n up[n] u_n |+1/2> + down[n] u_n |-1/2>.
struct SpinorState {
    int n_basis = 0;
    std::vector<cdouble> up;
    std::vector<cdouble> down;

    SpinorState() = default;
    explicit SpinorState(int n);

    double norm2() const;
    void normalize();

    double z_mean() const;
    double p_mean() const;
    double z2_mean() const;
    double energy_mean() const;            // oscillator part, sum (n+1/2)|c_n|^2
    std::array<double, 3> bloch() const;   // (2 Re rho_ud, 2 Im rho_du, rho_uu - rho_dd)
    std::array<cdouble, 4> spin_matrix() const; // reduced 2x2, row-major (uu, ud, du, dd)
    double tail_occupation() const;        // population of the topmost basis state
};

// Truncated coherent state amplitudes <n|alpha>, renormalized to unit norm
// after truncation. Requires n_basis to cover the Poisson bulk; callers are
// expected to validate coverage via tail_occupation.
std::vector<cdouble> coherent_amplitudes(cdouble alpha, int n_basis);

// Product state: coherent cantilever times a pure spin pointing along the
// Bloch direction (theta from +z, azimuth phi).
SpinorState coherent_spinor(cdouble alpha, double spin_theta, double spin_phi, int n_basis);

// Spin-cantilever density operator in the same basis. Block (s, s') holds
// <n, s| rho |m, s'> row-major; s = 0 is spin +1/2, s = 1 is spin -1/2.
struct DensityState {
    int n_basis = 0;
    std::vector<cdouble> a; // 4 * n_basis * n_basis

    DensityState() = default;
    explicit DensityState(int n);

    cdouble& at(int s, int sp, int n, int m);
    const cdouble& at(int s, int sp, int n, int m) const;
    cdouble* block(int s, int sp);
    const cdouble* block(int s, int sp) const;

    double trace() const;
    double purity() const;         // Tr rho^2
    double herm_defect() const;    // max |A[s,s',n,m] - conj(A[s',s,m,n])|
    double z_mean() const;
    double p_mean() const;
    double z2_mean() const;
    double p2_mean() const;
    double n_mean() const;         // oscillator occupation
    std::array<double, 3> bloch() const;
    double tail_occupation() const;

    // Smallest eigenvalue of the full 2N x 2N matrix; rho must be close to
    // Hermitian for the value to be meaningful.
    double min_eigenvalue() const;
};

// rho = |psi><psi|.
DensityState initial_density(const SpinorState& psi);

}
