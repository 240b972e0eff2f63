#include "spincant/master.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>

#include "spincant/errors.hpp"
#include "spincant/schrodinger.hpp" // snapshot_times

namespace spincant {

namespace {

constexpr double spin_value(int s) { return s == 0 ? 0.5 : -0.5; }

}

MasterRhs::MasterRhs(const SimParams& p, const PhaseSchedule& sched)
    : n_(p.n_basis), eta_(p.eta), epsilon_(p.epsilon), beta_(p.beta), big_d_(p.big_d), sched_(sched) {
    p.validate();
    const int top = n_ + 2;
    r_.resize(top + 1);
    sq2_.resize(top + 1);
    dd2_.resize(top + 1);
    uu2_.resize(top + 1);
    for (int k = 0; k <= top; ++k) {
        r_[k] = std::sqrt(static_cast<double>(k));
        sq2_[k] = std::sqrt(2.0 * k);
        dd2_[k] = std::sqrt(static_cast<double>(k) * (k - 1.0));
        uu2_[k] = std::sqrt((k + 1.0) * (k + 2.0));
    }
    const size_t pp = static_cast<size_t>(n_ + 4) * (n_ + 4);
    pad_.assign(4 * pp, cdouble{0.0, 0.0});
}

void MasterRhs::operator()(double tau, std::span<const cdouble> y, std::span<cdouble> dy) const {
    const double rate = sched_.rate(tau);
    const int nn = n_;
    const int pstride = nn + 4;
    const size_t pp = static_cast<size_t>(pstride) * pstride;

    for (int b = 0; b < 4; ++b) {
        const cdouble* src = y.data() + static_cast<size_t>(b) * nn * nn;
        cdouble* dst = pad_.data() + b * pp;
        for (int n = 0; n < nn; ++n)
            std::memcpy(dst + (n + 2) * static_cast<size_t>(pstride) + 2, src + static_cast<size_t>(n) * nn,
                        sizeof(cdouble) * nn);
    }

    if (beta_ > 0.0)
        apply<true>(rate, y.data(), dy.data());
    else
        apply<false>(rate, y.data(), dy.data());
}

template <bool dissipative>
void MasterRhs::apply(double rate, const cdouble* y, cdouble* dy) const {
    const int nn = n_;
    const int pstride = nn + 4;
    const size_t pp = static_cast<size_t>(pstride) * pstride;
    const size_t bsize = static_cast<size_t>(nn) * nn;

    const double half_eps = 0.5 * epsilon_;
    const double d_beta = big_d_ * beta_;
    const double dp_beta = (big_d_ + 0.5) * beta_;
    const double dm_beta = (big_d_ - 0.5) * beta_;

    for (int s = 0; s < 2; ++s) {
        for (int sp = 0; sp < 2; ++sp) {
            const int b = s * 2 + sp;
            const cdouble* pb = pad_.data() + b * pp;
            const cdouble* flip_sp = y + (static_cast<size_t>(s) * 2 + (1 - sp)) * bsize;
            const cdouble* flip_s = y + (static_cast<size_t>(1 - s) * 2 + sp) * bsize;
            cdouble* out = dy + static_cast<size_t>(b) * bsize;

            const double sv = spin_value(s);
            const double svp = spin_value(sp);
            const double eta_s = eta_ * sv;
            const double eta_sp = eta_ * svp;
            const double diag_rot = rate * (svp - sv);

            for (int n = 0; n < nn; ++n) {
                const cdouble* row0 = pb + (n + 2) * static_cast<size_t>(pstride) + 2;
                const cdouble* rowm1 = row0 - pstride;
                const cdouble* rowp1 = row0 + pstride;
                const cdouble* rowm2 = row0 - 2 * pstride;
                const cdouble* rowp2 = row0 + 2 * pstride;
                cdouble* orow = out + static_cast<size_t>(n) * nn;
                const cdouble* frow_sp = flip_sp + static_cast<size_t>(n) * nn;
                const cdouble* frow_s = flip_s + static_cast<size_t>(n) * nn;

                const double hop_dn = sq2_[n];     // sqrt(2n), row n-1
                const double hop_up = sq2_[n + 1]; // sqrt(2n+2), row n+1
                const double rn = r_[n];
                const double rn1 = r_[n + 1];
                const double row_dd = dd2_[n];
                const double row_uu = uu2_[n];

                for (int m = 0; m < nn; ++m) {
                    const cdouble c = row0[m];

                    // commutator part: diagonal plus the four spin-weighted hops
                    cdouble h = eta_s * (hop_dn * rowm1[m] + hop_up * rowp1[m]) -
                                eta_sp * (sq2_[m] * row0[m - 1] + sq2_[m + 1] * row0[m + 1]) +
                                half_eps * (frow_s[m] - frow_sp[m]);
                    double diag_im = diag_rot + (m - n);
                    cdouble acc{-h.imag() - diag_im * c.imag(), h.real() + diag_im * c.real()};

                    if constexpr (dissipative) {
                        const double diag_re = 0.5 * beta_ - (n + m + 1) * d_beta;
                        acc += diag_re * c;
                        cdouble dis =
                            d_beta * (r_[m] * rn1 * rowp1[m - 1] + rn * r_[m + 1] * rowm1[m + 1]) +
                            dp_beta * (rn1 * r_[m + 1]) * rowp1[m + 1] +
                            dm_beta * (rn * r_[m]) * rowm1[m - 1] -
                            0.5 * dm_beta * row_dd * rowm2[m] - 0.5 * dp_beta * row_uu * rowp2[m] -
                            0.5 * dm_beta * dd2_[m] * row0[m - 2] - 0.5 * dp_beta * uu2_[m] * row0[m + 2];
                        acc += dis;
                    }

                    orow[m] = acc;
                }
            }
        }
    }
}

double master_memory_estimate_bytes(int n_basis) {
    const double state = 4.0 * n_basis * n_basis * sizeof(cdouble);
    // integrator keeps 13 stage rows plus scratch, the rhs keeps one padded copy
    return state * 18.0;
}

DensityState evolve_density(const DensityState& rho0, const SimParams& p, const PhaseSchedule& sched,
                            const MasterEvolveOptions& opt, const DensityObserver& observer) {
    p.validate();
    if (rho0.n_basis != p.n_basis)
        throw ValidationError("evolve_density: state basis size does not match n_basis");
    const double need = master_memory_estimate_bytes(p.n_basis);
    if (need > opt.memory_budget_mb * 1024.0 * 1024.0)
        throw MemoryError("evolve_density: needs about " + std::to_string(need / 1048576.0) +
                          " MiB, budget is " + std::to_string(opt.memory_budget_mb) + " MiB");

    MasterRhs rhs(p, sched);
    std::vector<cdouble> y = rho0.a;
    Integrator<MasterRhs&> integ(rhs, opt.integrator, rhs.dim());

    const double trace0 = rho0.trace();
    bool warned_negative = false;

    DensityState rho(p.n_basis);
    auto emit = [&](double tau) {
        rho.a = y;
        const double drift = std::abs(rho.trace() - trace0);
        if (drift > opt.max_trace_drift)
            throw PhysicsError("trace drift " + std::to_string(drift) + " at tau = " + std::to_string(tau) +
                               " exceeds " + std::to_string(opt.max_trace_drift));
        const double defect = rho.herm_defect();
        if (defect > opt.max_herm_defect)
            throw PhysicsError("hermiticity defect " + std::to_string(defect) + " at tau = " +
                               std::to_string(tau));
        if (rho.tail_occupation() > opt.truncation_threshold)
            throw PhysicsError("basis truncation: top-state population " +
                               std::to_string(rho.tail_occupation()) + " at tau = " + std::to_string(tau) +
                               "; increase n_basis");
        if (opt.check_positivity) {
            const double lam = rho.min_eigenvalue();
            if (lam < opt.min_eig_error)
                throw PhysicsError("density matrix eigenvalue " + std::to_string(lam) + " at tau = " +
                                   std::to_string(tau));
            if (lam < opt.min_eig_warn && !warned_negative) {
                std::cerr << "warning: density matrix eigenvalue " << lam << " at tau = " << tau << "\n";
                warned_negative = true;
            }
        }
        if (observer) observer(tau, rho, integ.stats());
    };

    const auto snaps = snapshot_times(opt.tau_begin, opt.tau_end, opt.snapshot_cadence);
    emit(snaps.front());
    for (size_t i = 0; i + 1 < snaps.size(); ++i) {
        double a = snaps[i];
        double b = snaps[i + 1];
        double t = a;
        for (double brk : sched.breakpoints(a, b)) {
            integ.advance(y, t, brk);
            integ.reset();
            t = brk;
        }
        integ.advance(y, t, b);
        emit(b);
    }
    rho.a = std::move(y);
    return rho;
}

}
