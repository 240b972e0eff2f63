#include "spincant/schrodinger.hpp"

#include <algorithm>
#include <cmath>

#include "spincant/errors.hpp"

namespace spincant {

SchrodingerRhs::SchrodingerRhs(const SimParams& p, const PhaseSchedule& sched, bool use_rotating_basis)
    : n_(p.n_basis),
      eta_over_sqrt2_(p.eta / std::sqrt(2.0)),
      half_epsilon_(0.5 * p.epsilon),
      sched_(sched),
      rotating_(use_rotating_basis) {
    p.validate();
    sqrt_n_.resize(n_ + 1);
    for (int k = 0; k <= n_; ++k) sqrt_n_[k] = std::sqrt(static_cast<double>(k));
}

void SchrodingerRhs::operator()(double tau, std::span<const cdouble> y, std::span<cdouble> dy) const {
    const int n = n_;
    const cdouble* a = y.data();
    const cdouble* b = y.data() + n;
    cdouble* da = dy.data();
    cdouble* db = dy.data() + n;

    const double rate = sched_.rate(tau);
    const double half_rate = 0.5 * rate;
    const cdouble up_phase = rotating_ ? std::polar(1.0, tau) : cdouble{1.0, 0.0};
    const cdouble dn_phase = std::conj(up_phase);

    for (int k = 0; k < n; ++k) {
        const double base = rotating_ ? 0.0 : k + 0.5;
        cdouble hop_a{0.0, 0.0}, hop_b{0.0, 0.0};
        if (k > 0) {
            hop_a += sqrt_n_[k] * up_phase * a[k - 1];
            hop_b += sqrt_n_[k] * up_phase * b[k - 1];
        }
        if (k + 1 < n) {
            hop_a += sqrt_n_[k + 1] * dn_phase * a[k + 1];
            hop_b += sqrt_n_[k + 1] * dn_phase * b[k + 1];
        }
        // i da/dt = (base + rate/2) a - eta/sqrt(2) hop_a - eps/2 b
        const cdouble rhs_a = (base + half_rate) * a[k] - eta_over_sqrt2_ * hop_a - half_epsilon_ * b[k];
        const cdouble rhs_b = (base - half_rate) * b[k] + eta_over_sqrt2_ * hop_b - half_epsilon_ * a[k];
        da[k] = cdouble{rhs_a.imag(), -rhs_a.real()};
        db[k] = cdouble{rhs_b.imag(), -rhs_b.real()};
    }
}

void SchrodingerRhs::to_lab_frame(double tau, std::span<cdouble> y) const {
    if (!rotating_) return;
    for (int k = 0; k < n_; ++k) {
        const cdouble ph = std::polar(1.0, -(k + 0.5) * tau);
        y[k] *= ph;
        y[n_ + k] *= ph;
    }
}

void SchrodingerRhs::from_lab_frame(double tau, std::span<cdouble> y) const {
    if (!rotating_) return;
    for (int k = 0; k < n_; ++k) {
        const cdouble ph = std::polar(1.0, (k + 0.5) * tau);
        y[k] *= ph;
        y[n_ + k] *= ph;
    }
}

std::vector<double> snapshot_times(double tau_begin, double tau_end, double cadence) {
    if (!(tau_end >= tau_begin)) throw ValidationError("evolve: tau_end must be >= tau_begin");
    std::vector<double> times{tau_begin};
    if (cadence > 0.0) {
        const double span = tau_end - tau_begin;
        const long count = static_cast<long>(std::floor(span / cadence * (1.0 + 1e-12)));
        for (long k = 1; k <= count; ++k) times.push_back(tau_begin + cadence * static_cast<double>(k));
    }
    if (times.back() < tau_end - 1e-12 * std::max(1.0, std::abs(tau_end)))
        times.push_back(tau_end);
    else
        times.back() = tau_end;
    return times;
}

namespace {

SpinorState unpack(const std::vector<cdouble>& y, int n) {
    SpinorState psi(n);
    std::copy(y.begin(), y.begin() + n, psi.up.begin());
    std::copy(y.begin() + n, y.end(), psi.down.begin());
    return psi;
}

}

SpinorState evolve(const SpinorState& psi0, const SimParams& p, const PhaseSchedule& sched,
                   const EvolveOptions& opt, const SpinorObserver& observer) {
    p.validate();
    if (psi0.n_basis != p.n_basis)
        throw ValidationError("evolve: state basis size does not match n_basis");

    SchrodingerRhs rhs(p, sched, opt.use_rotating_basis);
    std::vector<cdouble> y(rhs.dim());
    std::copy(psi0.up.begin(), psi0.up.end(), y.begin());
    std::copy(psi0.down.begin(), psi0.down.end(), y.begin() + p.n_basis);
    rhs.from_lab_frame(opt.tau_begin, std::span<cdouble>(y));

    Integrator<SchrodingerRhs&> integ(rhs, opt.integrator, rhs.dim());

    const double norm0 = std::sqrt(psi0.norm2());
    auto emit = [&](double tau) {
        std::vector<cdouble> lab = y;
        rhs.to_lab_frame(tau, std::span<cdouble>(lab));
        SpinorState psi = unpack(lab, p.n_basis);
        const double drift = std::abs(std::sqrt(psi.norm2()) - norm0);
        if (drift > opt.max_norm_drift)
            throw PhysicsError("norm drift " + std::to_string(drift) + " at tau = " + std::to_string(tau) +
                               " exceeds " + std::to_string(opt.max_norm_drift));
        if (psi.tail_occupation() > opt.truncation_threshold)
            throw PhysicsError("basis truncation: top-state population " +
                               std::to_string(psi.tail_occupation()) + " at tau = " + std::to_string(tau) +
                               "; increase n_basis");
        if (observer) observer(tau, psi, integ.stats());
        return psi;
    };

    const auto snaps = snapshot_times(opt.tau_begin, opt.tau_end, opt.snapshot_cadence);
    SpinorState last = emit(snaps.front());
    for (size_t i = 0; i + 1 < snaps.size(); ++i) {
        double a = snaps[i];
        double b = snaps[i + 1];
        auto kinks = sched.breakpoints(a, b);
        double t = a;
        for (double brk : kinks) {
            integ.advance(y, t, brk);
            integ.reset();
            t = brk;
        }
        integ.advance(y, t, b);
        last = emit(b);
    }
    return last;
}

}
