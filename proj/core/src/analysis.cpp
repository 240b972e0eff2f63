#include "spincant/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>

#include "spincant/errors.hpp"
#include "spincant/hermite.hpp"

namespace spincant {

namespace {

using RowMatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatC = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapD = Eigen::Map<const RowMatD>;
using MapC = Eigen::Map<const RowMatC>;

// Trapezoid quadrature weight for grid point i.
double quad_weight(const Grid& grid, int i, int i_lo, int i_hi) {
    const double dz = grid.dz();
    return (i == i_lo || i == i_hi) ? 0.5 * dz : dz;
}

std::vector<cdouble> evaluate_component(const std::vector<double>& table, int m, int n_basis,
                                        const std::vector<cdouble>& amps) {
    std::vector<cdouble> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double* row = table.data() + static_cast<std::size_t>(i) * n_basis;
        cdouble acc = 0.0;
        for (int n = 0; n < n_basis; ++n) acc += row[n] * amps[static_cast<std::size_t>(n)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

// Diagonal of T A T^T for one spin block: d_i = sum_nm T[i,n] A[n,m] T[i,m].
std::vector<cdouble> block_diagonal(const std::vector<double>& table, int m, int n_basis,
                                    const cdouble* block) {
    std::vector<cdouble> out(static_cast<std::size_t>(m));
    std::vector<cdouble> tmp(static_cast<std::size_t>(n_basis));
    for (int i = 0; i < m; ++i) {
        const double* t = table.data() + static_cast<std::size_t>(i) * n_basis;
        for (int n = 0; n < n_basis; ++n) {
            const cdouble* row = block + static_cast<std::size_t>(n) * n_basis;
            cdouble acc = 0.0;
            for (int k = 0; k < n_basis; ++k) acc += row[k] * t[k];
            tmp[static_cast<std::size_t>(n)] = acc;
        }
        cdouble d = 0.0;
        for (int n = 0; n < n_basis; ++n) d += t[n] * tmp[static_cast<std::size_t>(n)];
        out[static_cast<std::size_t>(i)] = d;
    }
    return out;
}

std::vector<cdouble> contract_block(const std::vector<double>& table, int m, int n_basis,
                                    const cdouble* block) {
    MapD t(table.data(), m, n_basis);
    MapC a(block, n_basis, n_basis);
    RowMatC left = t.cast<cdouble>() * a;
    RowMatC full = left * t.transpose().cast<cdouble>();
    return {full.data(), full.data() + full.size()};
}

struct SpinAccumulator {
    cdouble uu = 0.0, ud = 0.0, dd = 0.0;
};

SpinSummary summarize_spin(const SpinAccumulator& acc, const std::array<double, 3>& axis) {
    const double weight = acc.uu.real() + acc.dd.real();
    if (!(weight > 1e-12))
        throw ValidationError("peak interval carries no probability mass; cannot normalize spin state");
    SpinSummary s;
    s.weight = weight;
    const cdouble uu = acc.uu / weight;
    const cdouble ud = acc.ud / weight;
    const cdouble dd = acc.dd / weight;
    s.matrix = {uu, ud, std::conj(ud), dd};
    s.bloch = {2.0 * ud.real(), 2.0 * std::conj(ud).imag(), uu.real() - dd.real()};
    s.purity = uu.real() * uu.real() + dd.real() * dd.real() + 2.0 * std::norm(ud);
    s.factorization_residual = 1.0 - s.purity;
    // Zero field or a fully mixed spin leaves the alignment undefined.
    const double axis_norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    const double bloch_norm =
        std::sqrt(s.bloch[0] * s.bloch[0] + s.bloch[1] * s.bloch[1] + s.bloch[2] * s.bloch[2]);
    s.alignment_angle = axis_norm > 0.0 && bloch_norm > 0.0
                            ? angle_between(s.bloch, axis)
                            : std::numeric_limits<double>::quiet_NaN();
    return s;
}

}

std::array<std::vector<cdouble>, 2> wavefunctions(const SpinorState& psi, const Grid& grid) {
    const auto table = hermite_table(grid, psi.n_basis);
    return {evaluate_component(table, grid.m, psi.n_basis, psi.up),
            evaluate_component(table, grid.m, psi.n_basis, psi.down)};
}

PositionField position_density(const SpinorState& psi, const Grid& grid) {
    const auto comps = wavefunctions(psi, grid);
    PositionField field{grid, 0.0, std::vector<double>(static_cast<std::size_t>(grid.m))};
    for (int i = 0; i < grid.m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        field.values[k] = std::norm(comps[0][k]) + std::norm(comps[1][k]);
    }
    return field;
}

PositionField position_density(const DensityState& rho, const Grid& grid) {
    const auto table = hermite_table(grid, rho.n_basis);
    const auto up = block_diagonal(table, grid.m, rho.n_basis, rho.block(0, 0));
    const auto down = block_diagonal(table, grid.m, rho.n_basis, rho.block(1, 1));
    PositionField field{grid, 0.0, std::vector<double>(static_cast<std::size_t>(grid.m))};
    for (int i = 0; i < grid.m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        field.values[k] = up[k].real() + down[k].real();
    }
    return field;
}

PositionMatrix position_density_matrix(const DensityState& rho, const Grid& grid) {
    const auto table = hermite_table(grid, rho.n_basis);
    PositionMatrix out;
    out.grid = grid;
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            out.blocks[static_cast<std::size_t>(s * 2 + sp)] =
                contract_block(table, grid.m, rho.n_basis, rho.block(s, sp));
    return out;
}

PositionMatrix position_density_matrix(const SpinorState& psi, const Grid& grid) {
    const auto comps = wavefunctions(psi, grid);
    const auto m = static_cast<std::size_t>(grid.m);
    PositionMatrix out;
    out.grid = grid;
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp) {
            auto& blk = out.blocks[static_cast<std::size_t>(s * 2 + sp)];
            blk.resize(m * m);
            const auto& a = comps[static_cast<std::size_t>(s)];
            const auto& b = comps[static_cast<std::size_t>(sp)];
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) blk[i * m + j] = a[i] * std::conj(b[j]);
        }
    return out;
}

std::vector<cdouble> spin_traced_matrix(const DensityState& rho, const Grid& grid) {
    const auto table = hermite_table(grid, rho.n_basis);
    const int n = rho.n_basis;
    std::vector<cdouble> traced(static_cast<std::size_t>(n) * n);
    const cdouble* up = rho.block(0, 0);
    const cdouble* down = rho.block(1, 1);
    for (std::size_t k = 0; k < traced.size(); ++k) traced[k] = up[k] + down[k];
    return contract_block(table, grid.m, n, traced.data());
}

std::vector<double> spin_traced_abs(const PositionMatrix& m) {
    const auto& uu = m.blocks[0];
    const auto& dd = m.blocks[3];
    std::vector<double> out(uu.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(uu[k] + dd[k]);
    return out;
}

std::vector<double> spin_offdiag_abs(const PositionMatrix& m) {
    const auto& ud = m.blocks[1];
    const auto& du = m.blocks[2];
    std::vector<double> out(ud.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(ud[k] + du[k]);
    return out;
}

void check_boundary_mass(const PositionField& field, double rel) {
    if (field.values.empty()) throw ValidationError("position field is empty");
    const double peak = *std::max_element(field.values.begin(), field.values.end());
    if (!(peak > 0.0)) throw ValidationError("position field vanishes everywhere");
    const double edge = std::max(field.values.front(), field.values.back());
    if (edge > rel * peak)
        throw PhysicsError("state reaches the grid boundary; widen the position grid");
}

PeakReport detect_peaks(const PositionField& field, const PeakOptions& opt) {
    const int m = field.grid.m;
    if (static_cast<int>(field.values.size()) != m)
        throw ValidationError("position field size does not match its grid");
    if (opt.smooth_width < 1 || opt.smooth_width % 2 == 0)
        throw ValidationError("smooth_width must be a positive odd number of grid points");

    // Moving average; window shrinks near the edges.
    const int half = opt.smooth_width / 2;
    std::vector<double> sm(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(m - 1, i + half);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += field.values[static_cast<std::size_t>(j)];
        sm[static_cast<std::size_t>(i)] = acc / (hi - lo + 1);
    }

    const double top = *std::max_element(sm.begin(), sm.end());
    if (!(top > 0.0)) throw ValidationError("position field vanishes everywhere");
    const double floor = opt.floor_rel * top;

    // Strictly-rising left edge makes plateau maxima count once.
    std::vector<int> maxima;
    for (int i = 0; i < m; ++i) {
        const double v = sm[static_cast<std::size_t>(i)];
        if (v <= floor) continue;
        const bool left_ok = (i == 0) || v > sm[static_cast<std::size_t>(i - 1)];
        const bool right_ok = (i == m - 1) || v >= sm[static_cast<std::size_t>(i + 1)];
        if (left_ok && right_ok) maxima.push_back(i);
    }
    if (maxima.empty()) throw ValidationError("no local maxima above the noise floor");

    // Split at the deepest smoothed minimum between neighbouring maxima.
    std::vector<int> bounds{0};
    for (std::size_t k = 0; k + 1 < maxima.size(); ++k) {
        int best = maxima[k];
        double best_v = sm[static_cast<std::size_t>(best)];
        for (int i = maxima[k]; i <= maxima[k + 1]; ++i)
            if (sm[static_cast<std::size_t>(i)] < best_v) {
                best_v = sm[static_cast<std::size_t>(i)];
                best = i;
            }
        bounds.push_back(best);
    }
    bounds.push_back(m - 1);

    PeakReport report;
    report.tau = field.tau;
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
        PeakInterval peak;
        peak.i_lo = bounds[k];
        peak.i_hi = bounds[k + 1];
        peak.z_lo = field.grid.point(peak.i_lo);
        peak.z_hi = field.grid.point(peak.i_hi);
        double mass = 0.0, first = 0.0;
        for (int i = peak.i_lo; i <= peak.i_hi; ++i) {
            const double w = quad_weight(field.grid, i, peak.i_lo, peak.i_hi);
            const double v = field.values[static_cast<std::size_t>(i)];
            mass += w * v;
            first += w * v * field.grid.point(i);
        }
        peak.weight = mass;
        peak.centroid = mass > 0.0 ? first / mass : 0.5 * (peak.z_lo + peak.z_hi);
        peak.argmax = peak.i_lo;
        for (int i = peak.i_lo; i <= peak.i_hi; ++i)
            if (sm[static_cast<std::size_t>(i)] > sm[static_cast<std::size_t>(peak.argmax)])
                peak.argmax = i;
        peak.height = sm[static_cast<std::size_t>(peak.argmax)];
        report.peaks.push_back(peak);
    }
    std::stable_sort(report.peaks.begin(), report.peaks.end(),
                     [](const PeakInterval& a, const PeakInterval& b) { return a.weight > b.weight; });

    double total = 0.0;
    for (int i = 0; i < m; ++i)
        total += quad_weight(field.grid, i, 0, m - 1) * field.values[static_cast<std::size_t>(i)];
    report.total_weight = total;

    if (report.peaks.size() >= 2) {
        const auto& a = report.peaks[0];
        const auto& b = report.peaks[1];
        const int lo = std::min(a.argmax, b.argmax);
        const int hi = std::max(a.argmax, b.argmax);
        double valley = sm[static_cast<std::size_t>(lo)];
        for (int i = lo; i <= hi; ++i)
            valley = std::min(valley, sm[static_cast<std::size_t>(i)]);
        report.valley = valley;
        const double smaller = std::min(a.height, b.height);
        report.separated = valley < opt.separation_rel * smaller;
    }
    return report;
}

SpinSummary peak_spin_state(const SpinorState& psi, const Grid& grid, const PeakInterval& peak,
                            const std::array<double, 3>& axis) {
    const auto comps = wavefunctions(psi, grid);
    SpinAccumulator acc;
    for (int i = peak.i_lo; i <= peak.i_hi; ++i) {
        const double w = quad_weight(grid, i, peak.i_lo, peak.i_hi);
        const auto k = static_cast<std::size_t>(i);
        acc.uu += w * comps[0][k] * std::conj(comps[0][k]);
        acc.ud += w * comps[0][k] * std::conj(comps[1][k]);
        acc.dd += w * comps[1][k] * std::conj(comps[1][k]);
    }
    return summarize_spin(acc, axis);
}

SpinSummary peak_spin_state(const DensityState& rho, const Grid& grid, const PeakInterval& peak,
                            const std::array<double, 3>& axis) {
    const auto table = hermite_table(grid, rho.n_basis);
    const auto uu = block_diagonal(table, grid.m, rho.n_basis, rho.block(0, 0));
    const auto ud = block_diagonal(table, grid.m, rho.n_basis, rho.block(0, 1));
    const auto dd = block_diagonal(table, grid.m, rho.n_basis, rho.block(1, 1));
    SpinAccumulator acc;
    for (int i = peak.i_lo; i <= peak.i_hi; ++i) {
        const double w = quad_weight(grid, i, peak.i_lo, peak.i_hi);
        const auto k = static_cast<std::size_t>(i);
        acc.uu += w * uu[k];
        acc.ud += w * ud[k];
        acc.dd += w * dd[k];
    }
    return summarize_spin(acc, axis);
}

double peak_ratio(const PeakReport& report) {
    if (report.peaks.size() < 2)
        throw ValidationError("peak ratio needs at least two detected peaks");
    const double big = report.peaks[0].weight;
    if (!(big > 0.0)) throw ValidationError("dominant peak has no weight");
    return report.peaks[1].weight / big;
}

double predicted_ratio(const SimParams& p, const PhaseSchedule& sched) {
    const double rate0 = sched.rate(0.0);
    if (p.epsilon == 0.0 && rate0 == 0.0)
        return std::numeric_limits<double>::quiet_NaN(); // no field, no branches
    const double theta = std::atan2(p.epsilon, -rate0);
    const double t = std::tan(0.5 * theta);
    return t * t;
}

CoherenceValue coherence_norm(const std::vector<cdouble>& matrix, const Grid& grid,
                              double mask_width) {
    const auto m = static_cast<std::size_t>(grid.m);
    if (matrix.size() != m * m)
        throw ValidationError("density matrix size does not match the grid");
    CoherenceValue out;
    out.pre_separation = mask_width < 0.0;
    const double w = out.pre_separation ? 0.0 : mask_width;
    const double dz = grid.dz();
    // |z_i - z_j| = |i - j| dz on a uniform grid; skip rows by offset.
    const int min_off = out.pre_separation ? 1 : static_cast<int>(std::floor(w / dz)) + 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double wi = quad_weight(grid, static_cast<int>(i), 0, grid.m - 1);
        const std::size_t j_hi = i >= static_cast<std::size_t>(min_off) ? i - min_off + 1 : 0;
        for (std::size_t j = 0; j < j_hi; ++j)
            acc += wi * quad_weight(grid, static_cast<int>(j), 0, grid.m - 1) *
                   std::abs(matrix[i * m + j]);
    }
    out.value = 2.0 * acc; // |rho(z,z')| is symmetric under swap for hermitian rho
    return out;
}

double coherence_sup(const std::vector<cdouble>& matrix, const Grid& grid, double mask_width) {
    const auto m = static_cast<std::size_t>(grid.m);
    if (matrix.size() != m * m)
        throw ValidationError("density matrix size does not match the grid");
    const double w = std::max(mask_width, 0.0);
    const double dz = grid.dz();
    const int min_off = mask_width < 0.0 ? 1 : static_cast<int>(std::floor(w / dz)) + 1;
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j_hi = i >= static_cast<std::size_t>(min_off) ? i - min_off + 1 : 0;
        for (std::size_t j = 0; j < j_hi; ++j)
            best = std::max(best, std::abs(matrix[i * m + j]));
    }
    return best;
}

double branch_coherence(const DensityState& rho, const std::vector<cdouble>& b1,
                        const std::vector<cdouble>& b2) {
    const auto n = static_cast<std::size_t>(rho.n_basis);
    if (b1.size() != n || b2.size() != n)
        throw ValidationError("branch vectors must match the Fock basis size");

    // Spin-traced oscillator density.
    std::vector<cdouble> osc(n * n);
    const cdouble* up = rho.block(0, 0);
    const cdouble* down = rho.block(1, 1);
    for (std::size_t k = 0; k < osc.size(); ++k) osc[k] = up[k] + down[k];

    auto inner = [n](const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
        cdouble acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += std::conj(a[k]) * b[k];
        return acc;
    };
    auto sandwich = [&](const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
        cdouble acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cdouble row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += osc[i * n + j] * b[j];
            acc += std::conj(a[i]) * row;
        }
        return acc;
    };

    Eigen::Matrix2cd g, mm;
    g << inner(b1, b1), inner(b1, b2), inner(b2, b1), inner(b2, b2);
    mm << sandwich(b1, b1), sandwich(b1, b2), sandwich(b2, b1), sandwich(b2, b2);
    if (std::abs(g.determinant()) < 1e-12)
        throw ValidationError("branch states are (numerically) parallel; coherence is undefined");
    const Eigen::Matrix2cd gi = g.inverse();
    const Eigen::Matrix2cd c = gi * mm * gi; // coefficients of rho over |b_i><b_j|
    const double w1 = c(0, 0).real();
    const double w2 = c(1, 1).real();
    if (!(w1 > 1e-14) || !(w2 > 1e-14))
        throw ValidationError("branch weights vanish; coherence is undefined");
    return std::abs(c(0, 1)) / std::sqrt(w1 * w2);
}

void DecayTracker::push(double tau, double value) {
    if (!std::isfinite(tau) || !std::isfinite(value))
        throw ValidationError("decay samples must be finite");
    samples_.push_back({tau, value});
}

DecayFit DecayTracker::fit(double keep_above_fraction) const {
    double top = 0.0;
    for (const auto& s : samples_) top = std::max(top, s.value);
    const double cut = keep_above_fraction * top;

    std::vector<DecaySample> used;
    for (const auto& s : samples_)
        if (s.value > 0.0 && s.value >= cut) used.push_back(s);
    if (used.size() < 3)
        throw ValidationError("decay fit needs at least three positive samples");

    double st = 0.0, sy = 0.0;
    for (const auto& s : used) {
        st += s.tau;
        sy += std::log(s.value);
    }
    const double n = static_cast<double>(used.size());
    const double mt = st / n, my = sy / n;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (const auto& s : used) {
        const double dt = s.tau - mt;
        const double dy = std::log(s.value) - my;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if (!(stt > 0.0)) throw ValidationError("decay fit needs samples at distinct times");
    const double slope = sty / stt;
    DecayFit f;
    f.rate = -slope;
    f.intercept = my - slope * mt;
    f.r2 = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
    f.n_used = static_cast<int>(used.size());
    return f;
}

double predicted_decoherence_rate(const SimParams& p, double separation) {
    return p.big_d * p.beta * separation * separation;
}

double angle_between(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    if (!(na > 0.0) || !(nb > 0.0))
        throw ValidationError("alignment angle between zero vectors is undefined");
    const double c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
    return std::acos(std::clamp(c, -1.0, 1.0));
}

}
