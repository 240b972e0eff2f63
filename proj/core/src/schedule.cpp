#include "spincant/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spincant/errors.hpp"

namespace spincant {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.141592653589793238462643383279502884;

}

double ScheduleSegment::rate(double tau) const {
    if (kind == Kind::linear) return c0 + c1 * tau;
    return amp * std::sin(omega * (tau - tref));
}

double ScheduleSegment::accel(double tau) const {
    if (kind == Kind::linear) return c1;
    return amp * omega * std::cos(omega * (tau - tref));
}

double ScheduleSegment::max_abs_accel(double a, double b) const {
    if (kind == Kind::linear) return std::abs(c1);
    if (omega == 0.0 || amp == 0.0) return 0.0;
    double xa = omega * (a - tref);
    double xb = omega * (b - tref);
    if (xa > xb) std::swap(xa, xb);
    // |cos| attains 1 at multiples of pi
    if (std::floor(xb / kPi) >= std::ceil(xa / kPi)) return std::abs(amp * omega);
    return std::abs(amp * omega) * std::max(std::abs(std::cos(xa)), std::abs(std::cos(xb)));
}

PhaseSchedule::PhaseSchedule(std::vector<ScheduleSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw ValidationError("schedule: needs at least one segment");
    if (segments_.front().tau_lo != 0.0) throw ValidationError("schedule: first segment must start at tau = 0");
    for (size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        if (!(s.tau_hi > s.tau_lo)) throw ValidationError("schedule: segment bounds must increase");
        if (i + 1 < segments_.size()) {
            if (s.tau_hi != segments_[i + 1].tau_lo)
                throw ValidationError("schedule: segments must be contiguous");
            if (!std::isfinite(s.tau_hi))
                throw ValidationError("schedule: only the last segment may be open-ended");
        }
    }
    if (std::isfinite(segments_.back().tau_hi))
        throw ValidationError("schedule: last segment must extend to inf");
}

PhaseSchedule PhaseSchedule::cai(double rate0, double slope, double t_switch, double amp) {
    ScheduleSegment sweep;
    sweep.kind = ScheduleSegment::Kind::linear;
    sweep.tau_lo = 0.0;
    sweep.tau_hi = t_switch;
    sweep.c0 = rate0;
    sweep.c1 = slope;

    ScheduleSegment cyc;
    cyc.kind = ScheduleSegment::Kind::sine;
    cyc.tau_lo = t_switch;
    cyc.tau_hi = kInf;
    cyc.amp = amp;
    cyc.omega = 1.0;
    cyc.tref = t_switch;

    return PhaseSchedule({sweep, cyc});
}

PhaseSchedule PhaseSchedule::standard() {
    return cai(-6000.0, 300.0, 20.0, 1000.0);
}

PhaseSchedule PhaseSchedule::standard_scaled(double factor) {
    if (!(factor > 0.0)) throw ValidationError("schedule: scale factor must be > 0");
    return cai(-6000.0 / factor, 300.0 / factor, 20.0, 1000.0 / factor);
}

PhaseSchedule PhaseSchedule::constant(double rate) {
    ScheduleSegment s;
    s.kind = ScheduleSegment::Kind::linear;
    s.tau_lo = 0.0;
    s.tau_hi = kInf;
    s.c0 = rate;
    s.c1 = 0.0;
    return PhaseSchedule({s});
}

namespace {

double parse_number(const std::string& tok, const std::string& ctx) {
    std::string t = tok;
    t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }), t.end());
    if (t == "inf" || t == "+inf") return kInf;
    try {
        size_t pos = 0;
        double x = std::stod(t, &pos);
        if (pos != t.size()) throw std::invalid_argument(t);
        return x;
    } catch (const std::exception&) {
        throw ValidationError("schedule: bad number '" + tok + "' in " + ctx);
    }
}

std::vector<double> parse_args(const std::string& inner, size_t expected, const std::string& ctx) {
    std::vector<double> out;
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_number(tok, ctx));
    if (out.size() != expected)
        throw ValidationError("schedule: " + ctx + " expects " + std::to_string(expected) + " arguments");
    return out;
}

}

PhaseSchedule PhaseSchedule::parse(const std::string& text) {
    std::string t = text;
    t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }), t.end());
    if (t.empty()) throw ValidationError("schedule: empty specification");

    if (t == "standard") return standard();
    if (t.rfind("standard_scaled/", 0) == 0)
        return standard_scaled(parse_number(t.substr(16), "standard_scaled"));
    if (t.rfind("constant/", 0) == 0)
        return constant(parse_number(t.substr(9), "constant"));

    std::vector<ScheduleSegment> segs;
    std::stringstream ss(t);
    std::string piece;
    while (std::getline(ss, piece, ';')) {
        if (piece.empty()) continue;
        auto open = piece.find('(');
        auto close = piece.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw ValidationError("schedule: malformed segment '" + piece + "'");
        std::string name = piece.substr(0, open);
        std::string inner = piece.substr(open + 1, close - open - 1);
        ScheduleSegment s;
        if (name == "linear") {
            auto a = parse_args(inner, 4, "linear");
            s.kind = ScheduleSegment::Kind::linear;
            s.tau_lo = a[0];
            s.tau_hi = a[1];
            s.c0 = a[2];
            s.c1 = a[3];
        } else if (name == "sine") {
            auto a = parse_args(inner, 5, "sine");
            s.kind = ScheduleSegment::Kind::sine;
            s.tau_lo = a[0];
            s.tau_hi = a[1];
            s.amp = a[2];
            s.omega = a[3];
            s.tref = a[4];
        } else {
            throw ValidationError("schedule: unknown segment kind '" + name + "'");
        }
        segs.push_back(s);
    }
    return PhaseSchedule(std::move(segs));
}

std::string PhaseSchedule::format() const {
    std::ostringstream out;
    out.precision(17);
    for (size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        if (i) out << "; ";
        if (s.kind == ScheduleSegment::Kind::linear) {
            out << "linear(" << s.tau_lo << ",";
            if (std::isfinite(s.tau_hi)) out << s.tau_hi; else out << "inf";
            out << "," << s.c0 << "," << s.c1 << ")";
        } else {
            out << "sine(" << s.tau_lo << ",";
            if (std::isfinite(s.tau_hi)) out << s.tau_hi; else out << "inf";
            out << "," << s.amp << "," << s.omega << "," << s.tref << ")";
        }
    }
    return out.str();
}

const ScheduleSegment& PhaseSchedule::segment_at(double tau) const {
    if (tau < 0.0) throw ValidationError("schedule: tau must be >= 0");
    for (const auto& s : segments_)
        if (tau < s.tau_hi) return s;
    return segments_.back();
}

double PhaseSchedule::rate(double tau) const {
    return segment_at(tau).rate(tau);
}

double PhaseSchedule::accel(double tau) const {
    return segment_at(tau).accel(tau);
}

double PhaseSchedule::max_abs_accel(double a, double b) const {
    if (!(b >= a)) throw ValidationError("schedule: bad interval for accel bound");
    double m = 0.0;
    for (const auto& s : segments_) {
        double lo = std::max(a, s.tau_lo);
        double hi = std::min(b, s.tau_hi);
        if (lo > hi) continue;
        m = std::max(m, s.max_abs_accel(lo, hi));
    }
    return m;
}

std::vector<double> PhaseSchedule::breakpoints(double a, double b) const {
    std::vector<double> out;
    for (size_t i = 0; i + 1 < segments_.size(); ++i) {
        double t = segments_[i].tau_hi;
        if (t > a && t < b) out.push_back(t);
    }
    return out;
}

std::array<double, 3> effective_field(const SimParams& p, const PhaseSchedule& s, double tau) {
    return {p.epsilon, 0.0, -s.rate(tau)};
}

double field_angle(const SimParams& p, const PhaseSchedule& s, double tau) {
    return std::atan2(p.epsilon, -s.rate(tau));
}

AdiabaticityReport adiabaticity_check(const SimParams& p, const PhaseSchedule& s, double z_extent,
                                      double horizon, double threshold) {
    if (!(p.epsilon > 0.0)) throw ValidationError("adiabaticity check needs epsilon > 0");
    if (!(horizon > 0.0)) throw ValidationError("adiabaticity check needs horizon > 0");
    AdiabaticityReport r;
    r.threshold = threshold;
    r.accel_ratio = s.max_abs_accel(0.0, horizon) / (p.epsilon * p.epsilon);
    r.coupling_ratio = 2.0 * p.eta * std::abs(z_extent) / p.epsilon;
    r.pass = r.accel_ratio < threshold && r.coupling_ratio < threshold;
    return r;
}

}
