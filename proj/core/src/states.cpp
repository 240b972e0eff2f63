#include "spincant/states.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "spincant/errors.hpp"

namespace spincant {

namespace {

void check_basis(int n_basis) {
    if (n_basis < 1) throw ValidationError("n_basis must be >= 1");
}

double pair_sum_z(const std::vector<cdouble>& c) {
    double acc = 0.0;
    for (size_t n = 0; n + 1 < c.size(); ++n)
        acc += std::sqrt(static_cast<double>(n + 1)) * (std::conj(c[n]) * c[n + 1]).real();
    return acc;
}

double pair_sum_p(const std::vector<cdouble>& c) {
    double acc = 0.0;
    for (size_t n = 0; n + 1 < c.size(); ++n)
        acc += std::sqrt(static_cast<double>(n + 1)) * (std::conj(c[n]) * c[n + 1]).imag();
    return acc;
}

}

SpinorState::SpinorState(int n) : n_basis(n) {
    check_basis(n);
    up.assign(n, cdouble{0.0, 0.0});
    down.assign(n, cdouble{0.0, 0.0});
}

double SpinorState::norm2() const {
    double acc = 0.0;
    for (const auto& x : up) acc += std::norm(x);
    for (const auto& x : down) acc += std::norm(x);
    return acc;
}

void SpinorState::normalize() {
    double n2 = norm2();
    if (n2 <= 0.0) throw ValidationError("cannot normalize a zero state");
    double inv = 1.0 / std::sqrt(n2);
    for (auto& x : up) x *= inv;
    for (auto& x : down) x *= inv;
}

double SpinorState::z_mean() const {
    return std::sqrt(2.0) * (pair_sum_z(up) + pair_sum_z(down));
}

double SpinorState::p_mean() const {
    return std::sqrt(2.0) * (pair_sum_p(up) + pair_sum_p(down));
}

double SpinorState::z2_mean() const {
    double acc = 0.0;
    for (const auto* c : {&up, &down}) {
        for (size_t n = 0; n < c->size(); ++n) acc += (n + 0.5) * std::norm((*c)[n]);
        for (size_t n = 0; n + 2 < c->size(); ++n)
            acc += std::sqrt(static_cast<double>((n + 1) * (n + 2))) *
                   (std::conj((*c)[n]) * (*c)[n + 2]).real();
    }
    return acc;
}

double SpinorState::energy_mean() const {
    double acc = 0.0;
    for (const auto* c : {&up, &down})
        for (size_t n = 0; n < c->size(); ++n) acc += (n + 0.5) * std::norm((*c)[n]);
    return acc;
}

std::array<cdouble, 4> SpinorState::spin_matrix() const {
    cdouble uu{0.0, 0.0}, ud{0.0, 0.0}, dd{0.0, 0.0};
    for (int n = 0; n < n_basis; ++n) {
        uu += up[n] * std::conj(up[n]);
        ud += up[n] * std::conj(down[n]);
        dd += down[n] * std::conj(down[n]);
    }
    return {uu, ud, std::conj(ud), dd};
}

std::array<double, 3> SpinorState::bloch() const {
    auto m = spin_matrix();
    return {2.0 * m[1].real(), 2.0 * m[2].imag(), m[0].real() - m[3].real()};
}

double SpinorState::tail_occupation() const {
    if (n_basis == 0) return 0.0;
    return std::norm(up[n_basis - 1]) + std::norm(down[n_basis - 1]);
}

std::vector<cdouble> coherent_amplitudes(cdouble alpha, int n_basis) {
    check_basis(n_basis);
    if (std::norm(alpha) > 1000.0)
        throw ValidationError("coherent amplitude |alpha|^2 > 1000 exceeds the supported range");
    // Unnormalized recurrence t_{n+1} = t_n alpha / sqrt(n+1) starting from
    // t_0 = 1 avoids underflow of exp(-|alpha|^2 / 2); the final rescale
    // also absorbs the truncated tail.
    std::vector<cdouble> c(n_basis);
    c[0] = cdouble{1.0, 0.0};
    for (int n = 0; n + 1 < n_basis; ++n)
        c[n + 1] = c[n] * alpha / std::sqrt(static_cast<double>(n + 1));
    double n2 = 0.0;
    for (const auto& x : c) n2 += std::norm(x);
    double inv = 1.0 / std::sqrt(n2);
    for (auto& x : c) x *= inv;
    return c;
}

SpinorState coherent_spinor(cdouble alpha, double spin_theta, double spin_phi, int n_basis) {
    auto c = coherent_amplitudes(alpha, n_basis);
    cdouble wu = std::cos(spin_theta / 2.0);
    cdouble wd = std::polar(std::sin(spin_theta / 2.0), spin_phi);
    SpinorState psi(n_basis);
    for (int n = 0; n < n_basis; ++n) {
        psi.up[n] = wu * c[n];
        psi.down[n] = wd * c[n];
    }
    return psi;
}

DensityState::DensityState(int n) : n_basis(n) {
    check_basis(n);
    a.assign(4 * static_cast<size_t>(n) * n, cdouble{0.0, 0.0});
}

cdouble& DensityState::at(int s, int sp, int n, int m) {
    return a[((static_cast<size_t>(s) * 2 + sp) * n_basis + n) * n_basis + m];
}

const cdouble& DensityState::at(int s, int sp, int n, int m) const {
    return a[((static_cast<size_t>(s) * 2 + sp) * n_basis + n) * n_basis + m];
}

cdouble* DensityState::block(int s, int sp) {
    return a.data() + (static_cast<size_t>(s) * 2 + sp) * n_basis * n_basis;
}

const cdouble* DensityState::block(int s, int sp) const {
    return a.data() + (static_cast<size_t>(s) * 2 + sp) * n_basis * n_basis;
}

double DensityState::trace() const {
    double acc = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int n = 0; n < n_basis; ++n) acc += at(s, s, n, n).real();
    return acc;
}

double DensityState::purity() const {
    cdouble acc{0.0, 0.0};
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            for (int n = 0; n < n_basis; ++n)
                for (int m = 0; m < n_basis; ++m) acc += at(s, sp, n, m) * at(sp, s, m, n);
    return acc.real();
}

double DensityState::herm_defect() const {
    double worst = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            for (int n = 0; n < n_basis; ++n)
                for (int m = 0; m < n_basis; ++m)
                    worst = std::max(worst, std::abs(at(s, sp, n, m) - std::conj(at(sp, s, m, n))));
    return worst;
}

double DensityState::z_mean() const {
    double acc = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int n = 0; n + 1 < n_basis; ++n)
            acc += std::sqrt(n + 1.0) * (at(s, s, n, n + 1) + at(s, s, n + 1, n)).real();
    return acc / std::sqrt(2.0);
}

double DensityState::p_mean() const {
    double acc = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int n = 0; n + 1 < n_basis; ++n)
            acc += std::sqrt(n + 1.0) * (at(s, s, n, n + 1) - at(s, s, n + 1, n)).imag();
    return -acc / std::sqrt(2.0);
}

double DensityState::z2_mean() const {
    double acc = 0.0;
    for (int s = 0; s < 2; ++s) {
        for (int n = 0; n < n_basis; ++n) acc += (n + 0.5) * at(s, s, n, n).real();
        for (int n = 0; n + 2 < n_basis; ++n)
            acc += 0.5 * std::sqrt(static_cast<double>((n + 1) * (n + 2))) *
                   (at(s, s, n, n + 2) + at(s, s, n + 2, n)).real();
    }
    return acc;
}

double DensityState::p2_mean() const {
    double acc = 0.0;
    for (int s = 0; s < 2; ++s) {
        for (int n = 0; n < n_basis; ++n) acc += (n + 0.5) * at(s, s, n, n).real();
        for (int n = 0; n + 2 < n_basis; ++n)
            acc -= 0.5 * std::sqrt(static_cast<double>((n + 1) * (n + 2))) *
                   (at(s, s, n, n + 2) + at(s, s, n + 2, n)).real();
    }
    return acc;
}

double DensityState::n_mean() const {
    double acc = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int n = 0; n < n_basis; ++n) acc += n * at(s, s, n, n).real();
    return acc;
}

std::array<double, 3> DensityState::bloch() const {
    cdouble ud{0.0, 0.0}, du{0.0, 0.0};
    double uu = 0.0, dd = 0.0;
    for (int n = 0; n < n_basis; ++n) {
        uu += at(0, 0, n, n).real();
        dd += at(1, 1, n, n).real();
        ud += at(0, 1, n, n);
        du += at(1, 0, n, n);
    }
    return {2.0 * ud.real(), 2.0 * du.imag(), uu - dd};
}

double DensityState::tail_occupation() const {
    int n = n_basis - 1;
    return std::abs(at(0, 0, n, n).real()) + std::abs(at(1, 1, n, n).real());
}

double DensityState::min_eigenvalue() const {
    const int dim = 2 * n_basis;
    Eigen::MatrixXcd m(dim, dim);
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            for (int n = 0; n < n_basis; ++n)
                for (int mm = 0; mm < n_basis; ++mm)
                    m(s * n_basis + n, sp * n_basis + mm) = at(s, sp, n, mm);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw PhysicsError("eigenvalue computation failed");
    return solver.eigenvalues().minCoeff();
}

DensityState initial_density(const SpinorState& psi) {
    DensityState rho(psi.n_basis);
    const std::vector<cdouble>* comp[2] = {&psi.up, &psi.down};
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp) {
            cdouble* blk = rho.block(s, sp);
            for (int n = 0; n < psi.n_basis; ++n)
                for (int m = 0; m < psi.n_basis; ++m)
                    blk[static_cast<size_t>(n) * psi.n_basis + m] =
                        (*comp[s])[n] * std::conj((*comp[sp])[m]);
        }
    return rho;
}

}
