#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "spincant/errors.hpp"
#include "spincant/schedule.hpp"

using namespace spincant;

namespace {

// Hand-evaluated reference for the standard sweep: rate -6000 + 300 tau up to
// tau = 20, then 1000 sin(tau - 20).
double reference_rate(double tau) {
    return tau <= 20.0 ? -6000.0 + 300.0 * tau : 1000.0 * std::sin(tau - 20.0);
}

double reference_accel(double tau) {
    // at the seam the oscillating branch takes over, so accel(20) = 1000, not 300
    return tau < 20.0 ? 300.0 : 1000.0 * std::cos(tau - 20.0);
}

}

TEST_CASE("standard sweep rate and acceleration match the closed forms") {
    const PhaseSchedule s = PhaseSchedule::standard();
    for (double tau : {0.0, 1.0, 7.5, 19.999, 20.0, 20.5, 21.57, 26.28, 45.0}) {
        CAPTURE(tau);
        CHECK(s.rate(tau) == doctest::Approx(reference_rate(tau)).epsilon(1e-14));
        CHECK(s.accel(tau) == doctest::Approx(reference_accel(tau)).epsilon(1e-12));
    }
    CHECK(s.rate(0.0) == -6000.0);
    CHECK(s.rate(20.0) == 0.0);                                // sweep crosses resonance
    CHECK(s.rate(20.0 + 0.5 * M_PI) == doctest::Approx(1000.0)); // first sine crest
}

TEST_CASE("rate is continuous across the sweep-to-sine seam") {
    const PhaseSchedule s = PhaseSchedule::standard();
    const double below = s.rate(20.0 - 1e-9);
    const double above = s.rate(20.0 + 1e-9);
    CHECK(std::abs(below - above) < 1e-5);
    CHECK(s.breakpoints(0.0, 45.0) == std::vector<double>{20.0});
    CHECK(s.breakpoints(0.0, 15.0).empty());
    CHECK(s.breakpoints(25.0, 45.0).empty());
}

TEST_CASE("max_abs_accel returns exact bounds on both segment kinds") {
    const PhaseSchedule s = PhaseSchedule::standard();
    CHECK(s.max_abs_accel(0.0, 19.0) == 300.0);
    CHECK(s.max_abs_accel(0.0, 45.0) == 1000.0);          // cos = 1 right at the seam
    // On [22, 23] the cosine is monotone, so the bound sits at an endpoint.
    const double expect = 1000.0 * std::max(std::abs(std::cos(2.0)), std::abs(std::cos(3.0)));
    CHECK(s.max_abs_accel(22.0, 23.0) == doctest::Approx(expect).epsilon(1e-14));
    // Intervals containing tau - 20 = pi include the |cos| = 1 trough.
    CHECK(s.max_abs_accel(22.0, 24.0) == doctest::Approx(1000.0));
    CHECK(s.max_abs_accel(20.0 + M_PI - 0.5, 20.0 + M_PI + 0.5) == doctest::Approx(1000.0));
}

TEST_CASE("scaled preset divides every rate but keeps the geometry") {
    const PhaseSchedule full = PhaseSchedule::standard();
    const PhaseSchedule tenth = PhaseSchedule::standard_scaled(10.0);
    for (double tau : {0.0, 5.0, 19.0, 22.0, 30.0}) {
        CAPTURE(tau);
        CHECK(tenth.rate(tau) == doctest::Approx(full.rate(tau) / 10.0).epsilon(1e-14));
        CHECK(tenth.accel(tau) == doctest::Approx(full.accel(tau) / 10.0).epsilon(1e-14));
    }
}

TEST_CASE("effective field and its angle track the rate") {
    SimParams p;
    p.epsilon = 400.0;
    const PhaseSchedule s = PhaseSchedule::standard();

    const auto b0 = effective_field(p, s, 0.0);
    CHECK(b0[0] == 400.0);
    CHECK(b0[1] == 0.0);
    CHECK(b0[2] == 6000.0); // field along +z while the sweep is far below resonance

    // Initial polar angle: tan(Theta) = epsilon / 6000 = 1/15.
    CHECK(std::tan(field_angle(p, s, 0.0)) == doctest::Approx(1.0 / 15.0).epsilon(1e-14));
    // At resonance the field lies along +x.
    CHECK(field_angle(p, s, 20.0) == doctest::Approx(M_PI / 2).epsilon(1e-14));
    // At the sine crest the rate is +1000 so the field tips past the equator.
    const double theta_crest = field_angle(p, s, 20.0 + 0.5 * M_PI);
    CHECK(theta_crest == doctest::Approx(M_PI - std::atan(400.0 / 1000.0)).epsilon(1e-12));
    // The angle stays within [0, pi] everywhere.
    for (double tau = 0.0; tau <= 45.0; tau += 0.1) {
        const double th = field_angle(p, s, tau);
        CHECK(th >= 0.0);
        CHECK(th <= M_PI);
    }
}

TEST_CASE("schedule text forms round-trip through parse and format") {
    for (const char* text : {"standard", "standard_scaled/10", "constant/0", "constant/-250.5"}) {
        CAPTURE(text);
        const PhaseSchedule s = PhaseSchedule::parse(text);
        const PhaseSchedule again = PhaseSchedule::parse(s.format());
        for (double tau : {0.0, 3.0, 20.0, 33.3})
            CHECK(s.rate(tau) == again.rate(tau));
    }
}

TEST_CASE("explicit segment lists parse with an open-ended tail") {
    const PhaseSchedule s =
        PhaseSchedule::parse("linear(0, 2, -10, 5); sine(2, inf, 7, 1.5, 2)");
    CHECK(s.rate(0.0) == -10.0);
    CHECK(s.rate(2.0 - 1e-12) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.rate(2.0 + M_PI / 3.0) == doctest::Approx(7.0 * std::sin(M_PI / 2.0)));
    CHECK(s.breakpoints(0.0, 10.0) == std::vector<double>{2.0});
}

TEST_CASE("malformed schedules are rejected") {
    CHECK_THROWS_AS(PhaseSchedule::parse("no_such_preset"), ValidationError);
    CHECK_THROWS_AS(PhaseSchedule::parse("standard_scaled/0"), ValidationError);
    CHECK_THROWS_AS(PhaseSchedule::parse("linear(0, 2, -10, 5)"), ValidationError); // no tail
    CHECK_THROWS_AS(PhaseSchedule::parse("linear(0, 2, -10, 5); sine(3, inf, 7, 1, 2)"),
                    ValidationError); // gap between segments
}

TEST_CASE("adiabaticity report reproduces the slow-sweep ratios") {
    SimParams p;
    p.eta = 0.3;
    p.epsilon = 400.0;
    const PhaseSchedule s = PhaseSchedule::standard();

    // max |rate-dot| / epsilon^2 = 1000 / 160000 and 2 eta z / epsilon with z = 20.
    const AdiabaticityReport rep = adiabaticity_check(p, s, 20.0, 45.0);
    CHECK(rep.accel_ratio == doctest::Approx(0.00625).epsilon(1e-12));
    CHECK(rep.coupling_ratio == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(rep.pass);

    // A sweep 100x faster violates the slow-turning condition.
    SimParams fast = p;
    fast.epsilon = 40.0;
    const AdiabaticityReport bad = adiabaticity_check(fast, s, 20.0, 45.0);
    CHECK(bad.accel_ratio == doctest::Approx(0.625).epsilon(1e-12));
    CHECK_FALSE(bad.pass);
}
