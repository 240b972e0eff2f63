#pragma once

#include <array>
#include <vector>

#include "spincant/grid.hpp"
#include "spincant/params.hpp"
#include "spincant/schedule.hpp"
#include "spincant/states.hpp"

namespace spincant {

// Real density sampled on a position grid.
struct PositionField {
    Grid grid;
    double tau = 0.0;
    std::vector<double> values;
};

// Complex position-space density matrix blocks rho_ss'(z_i, z_j), row-major.
struct PositionMatrix {
    Grid grid;
    double tau = 0.0;
    std::array<std::vector<cdouble>, 4> blocks;

    const std::vector<cdouble>& block(int s, int sp) const { return blocks[s * 2 + sp]; }
};

// Component wavefunctions psi_s(z_i) reconstructed from the amplitudes.
std::array<std::vector<cdouble>, 2> wavefunctions(const SpinorState& psi, const Grid& grid);

// P(z) = |psi_up|^2 + |psi_down|^2, or the spin-traced diagonal of rho.
PositionField position_density(const SpinorState& psi, const Grid& grid);
PositionField position_density(const DensityState& rho, const Grid& grid);

PositionMatrix position_density_matrix(const DensityState& rho, const Grid& grid);
PositionMatrix position_density_matrix(const SpinorState& psi, const Grid& grid);

// Spin-traced rho(z, z') = rho_uu + rho_dd, the one field the coherence
// tracking needs; much cheaper than all four blocks.
std::vector<cdouble> spin_traced_matrix(const DensityState& rho, const Grid& grid);

// Magnitude of the spin-traced (Fig. 3 style) or spin-flip (Fig. 5 style)
// combination of a reconstructed matrix.
std::vector<double> spin_traced_abs(const PositionMatrix& m);
std::vector<double> spin_offdiag_abs(const PositionMatrix& m);

// The grid must be wide enough that the state has no support at the edges.
void check_boundary_mass(const PositionField& field, double rel = 1e-10);

struct PeakOptions {
    int smooth_width = 5;         // moving-average window, grid points
    double floor_rel = 1e-6;      // maxima below floor_rel * max are noise
    double separation_rel = 1e-3; // valley below separation_rel * smaller max
};

struct PeakInterval {
    int i_lo = 0;
    int i_hi = 0; // inclusive
    double z_lo = 0.0;
    double z_hi = 0.0;
    double weight = 0.0;
    double centroid = 0.0;
    double height = 0.0; // smoothed peak height
    int argmax = 0;
};

struct PeakReport {
    double tau = 0.0;
    std::vector<PeakInterval> peaks; // ordered by weight, descending
    bool separated = false;          // the two heaviest peaks
    double valley = 0.0;             // smoothed minimum between them
    double total_weight = 0.0;
};

// Splits the support of a 1-D density at the deepest smoothed minima between
// local maxima. Intervals partition the full grid, so their weights add up
// to the total quadrature exactly.
PeakReport detect_peaks(const PositionField& field, const PeakOptions& opt = {});

struct SpinSummary {
    std::array<cdouble, 4> matrix{}; // normalized 2x2, row-major (uu, ud, du, dd)
    std::array<double, 3> bloch{};
    double purity = 0.0;
    double weight = 0.0;                 // interval probability mass
    double alignment_angle = 0.0;        // radians between bloch and the reference axis
    double factorization_residual = 0.0; // 1 - purity; 0 for a product state
};

// Reduced spin state of the wavepacket restricted to one peak interval,
// compared against a reference axis (usually the effective field direction).
SpinSummary peak_spin_state(const SpinorState& psi, const Grid& grid, const PeakInterval& peak,
                            const std::array<double, 3>& axis);
SpinSummary peak_spin_state(const DensityState& rho, const Grid& grid, const PeakInterval& peak,
                            const std::array<double, 3>& axis);

// Small/big weight ratio of the two heaviest peaks.
double peak_ratio(const PeakReport& report);

// tan^2(Theta/2) for the initial effective-field angle; the weight the
// adiabatic decomposition assigns to the branch anti-parallel to the field
// when the spin starts along +z.
double predicted_ratio(const SimParams& p, const PhaseSchedule& sched);

struct CoherenceValue {
    double value = 0.0;
    bool pre_separation = false;
};

// Integrated |rho(z, z')| over the region |z - z'| > mask_width. A negative
// mask_width marks the pre-separation regime and integrates everything off
// the exact diagonal.
CoherenceValue coherence_norm(const std::vector<cdouble>& matrix, const Grid& grid, double mask_width);

// Largest |rho(z, z')| in the masked region.
double coherence_sup(const std::vector<cdouble>& matrix, const Grid& grid, double mask_width);

// Magnitude of the |b1><b2| coefficient when the spin-traced oscillator
// density is expanded over two known branch states (Fock amplitude vectors),
// normalized by the geometric mean of the branch weights. Uses the dual
// (Gram-inverse) projection, so non-orthogonal branches are handled exactly.
double branch_coherence(const DensityState& rho, const std::vector<cdouble>& b1,
                        const std::vector<cdouble>& b2);

struct DecaySample {
    double tau = 0.0;
    double value = 0.0;
};

struct DecayFit {
    double rate = 0.0;      // lambda in value ~ exp(-lambda tau)
    double intercept = 0.0; // log value at tau = 0
    double r2 = 0.0;
    int n_used = 0;
};

// Collects (tau, value) samples of a positive decaying quantity and fits
// log(value) against tau by least squares.
class DecayTracker {
  public:
    void push(double tau, double value);
    const std::vector<DecaySample>& samples() const { return samples_; }

    // keep_above_fraction restricts the fit to samples at or above that
    // fraction of the largest sample, which bounds the influence of late
    // plateaus and estimator floors.
    DecayFit fit(double keep_above_fraction = 0.0) const;

  private:
    std::vector<DecaySample> samples_;
};

// High-temperature prediction for the decay rate of coherence between
// branches separated by d in position.
double predicted_decoherence_rate(const SimParams& p, double separation);

double angle_between(const std::array<double, 3>& a, const std::array<double, 3>& b);

}
