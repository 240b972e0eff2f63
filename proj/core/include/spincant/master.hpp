#pragma once

#include <functional>
#include <span>

#include "spincant/integrate.hpp"
#include "spincant/params.hpp"
#include "spincant/schedule.hpp"
#include "spincant/states.hpp"

namespace spincant {

// Right-hand side of the high-temperature master equation for the amplitude
// matrix A[s,s'][n,m]. The flat layout matches DensityState::a. Friction and
// diffusion enter through beta and D; beta = 0 reduces exactly to the closed
// commutator dynamics.
class MasterRhs {
  public:
    MasterRhs(const SimParams& p, const PhaseSchedule& sched);

    void operator()(double tau, std::span<const cdouble> y, std::span<cdouble> dy) const;

    size_t dim() const { return 4 * static_cast<size_t>(n_) * n_; }

  private:
    int n_;
    double eta_, epsilon_, beta_, big_d_;
    PhaseSchedule sched_;
    std::vector<double> r_;   // sqrt(k)
    std::vector<double> sq2_; // sqrt(2k)
    std::vector<double> dd2_; // sqrt(k(k-1))
    std::vector<double> uu2_; // sqrt((k+1)(k+2))
    mutable std::vector<cdouble> pad_;

    template <bool dissipative>
    void apply(double rate, const cdouble* y, cdouble* dy) const;
};

struct MasterEvolveOptions {
    double tau_begin = 0.0;
    double tau_end = 0.0;
    double snapshot_cadence = 0.25;
    IntegratorConfig integrator;
    double truncation_threshold = 1e-8;
    double max_trace_drift = 1e-5;
    double max_herm_defect = 1e-4;
    bool check_positivity = true;     // eigenvalue scan at snapshots
    double min_eig_warn = -1e-4;      // tolerated transient negativity
    double min_eig_error = -1e-2;     // hard failure
    double memory_budget_mb = 8192.0; // state plus integrator workspace
};

using DensityObserver = std::function<void(double tau, const DensityState& rho, const StepStats& stats)>;

// Integrates the master equation from tau_begin to tau_end. Trace drift,
// hermiticity, positivity, and basis-tail occupation are checked at each
// snapshot; violations throw PhysicsError.
DensityState evolve_density(const DensityState& rho0, const SimParams& p, const PhaseSchedule& sched,
                            const MasterEvolveOptions& opt, const DensityObserver& observer = {});

// Workspace bytes evolve_density will need for a given basis size.
double master_memory_estimate_bytes(int n_basis);

}
