#pragma once

#include <array>
#include <string>
#include <vector>

#include "spincant/params.hpp"

namespace spincant {

// One piece of the rf frequency-modulation program. The rate is the
// instantaneous detuning phi-dot in units of omega_c.
struct ScheduleSegment {
    enum class Kind { linear, sine };
    Kind kind = Kind::linear;
    double tau_lo = 0.0;
    double tau_hi = 0.0; // +inf marks an open-ended final segment

    // linear: rate = c0 + c1 * tau
    double c0 = 0.0;
    double c1 = 0.0;

    // sine: rate = amp * sin(omega * (tau - tref))
    double amp = 0.0;
    double omega = 0.0;
    double tref = 0.0;

    double rate(double tau) const;
    double accel(double tau) const;
    double max_abs_accel(double a, double b) const;
};

// Piecewise frequency-modulation schedule covering [0, inf). Segments must
// be contiguous and ordered; the last one must be open-ended.
class PhaseSchedule {
  public:
    PhaseSchedule() = default;
    explicit PhaseSchedule(std::vector<ScheduleSegment> segments);

    // Cyclic adiabatic inversion program used throughout: a linear sweep
    // rate0 + slope * tau for tau <= t_switch, then amp * sin(tau - t_switch).
    static PhaseSchedule cai(double rate0, double slope, double t_switch, double amp);

    // cai(-6000, 300, 20, 1000)
    static PhaseSchedule standard();

    // Paper program with all rates divided by `factor`; sweep geometry
    // (t_switch, angles) is preserved because rates scale uniformly.
    static PhaseSchedule standard_scaled(double factor);

    static PhaseSchedule constant(double rate);

    // Text form used in config files: either a preset name ("standard",
    // "standard_scaled/<factor>", "constant/<rate>") or semicolon-separated
    // segments "linear(t0,t1,c0,c1); sine(t0,t1,amp,omega,tref)" with "inf"
    // allowed as the final t1.
    static PhaseSchedule parse(const std::string& text);
    std::string format() const;

    double rate(double tau) const;
    double accel(double tau) const;

    // Exact bound of |accel| over [a, b].
    double max_abs_accel(double a, double b) const;

    // Interior segment boundaries in (a, b); integrators stop at these so a
    // step never straddles a kink in the schedule.
    std::vector<double> breakpoints(double a, double b) const;

    const std::vector<ScheduleSegment>& segments() const { return segments_; }

  private:
    std::vector<ScheduleSegment> segments_;
    const ScheduleSegment& segment_at(double tau) const;
};

// Rotating-frame effective field acting on the spin, (epsilon, 0, -phi-dot).
std::array<double, 3> effective_field(const SimParams& p, const PhaseSchedule& s, double tau);

// Polar angle of the effective field measured from +z; lies in [0, pi].
double field_angle(const SimParams& p, const PhaseSchedule& s, double tau);

struct AdiabaticityReport {
    double accel_ratio = 0.0;    // max |phi-ddot| / epsilon^2 over the horizon
    double coupling_ratio = 0.0; // 2 eta z_extent / epsilon
    double threshold = 0.1;
    bool pass = false;
};

// Checks the slow-sweep conditions: the field must turn slowly compared to
// the precession rate, and the cantilever back-action field must stay small
// against the rf amplitude. z_extent is the expected swing of <z>.
AdiabaticityReport adiabaticity_check(const SimParams& p, const PhaseSchedule& s, double z_extent,
                                      double horizon, double threshold = 0.1);

}
