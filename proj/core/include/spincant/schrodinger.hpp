#pragma once

#include <functional>
#include <span>

#include "spincant/integrate.hpp"
#include "spincant/params.hpp"
#include "spincant/schedule.hpp"
#include "spincant/states.hpp"

namespace spincant {

// Right-hand side of the amplitude equations in the truncated basis. The
// flat layout is [up[0..N-1], down[0..N-1]]. With use_rotating_basis the
// amplitudes carry the free-oscillator phase exp(i (n+1/2) tau), which
// removes the large diagonal term at the cost of oscillatory couplings.
class SchrodingerRhs {
  public:
    SchrodingerRhs(const SimParams& p, const PhaseSchedule& sched, bool use_rotating_basis = false);

    void operator()(double tau, std::span<const cdouble> y, std::span<cdouble> dy) const;

    size_t dim() const { return 2 * static_cast<size_t>(n_); }
    bool rotating_basis() const { return rotating_; }

    // Conversions between the stored amplitudes and the lab frame.
    void to_lab_frame(double tau, std::span<cdouble> y) const;
    void from_lab_frame(double tau, std::span<cdouble> y) const;

  private:
    int n_;
    double eta_over_sqrt2_;
    double half_epsilon_;
    PhaseSchedule sched_;
    bool rotating_;
    std::vector<double> sqrt_n_;
};

struct EvolveOptions {
    double tau_begin = 0.0;
    double tau_end = 0.0;
    double snapshot_cadence = 0.05; // <= 0 emits only the endpoints
    IntegratorConfig integrator;
    bool use_rotating_basis = false;
    double truncation_threshold = 1e-8; // allowed population of the top basis state
    double max_norm_drift = 1e-5;
};

// Called at every snapshot time with the lab-frame state.
using SpinorObserver = std::function<void(double tau, const SpinorState& psi, const StepStats& stats)>;

// Integrates the amplitude equations from tau_begin to tau_end and returns
// the final state. Norm drift and basis-tail occupation are checked at each
// snapshot; violations throw PhysicsError.
SpinorState evolve(const SpinorState& psi0, const SimParams& p, const PhaseSchedule& sched,
                   const EvolveOptions& opt, const SpinorObserver& observer = {});

// Snapshot times used by evolve for a given options block, endpoints included.
std::vector<double> snapshot_times(double tau_begin, double tau_end, double cadence);

}
