#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "spincant/dop853_tableau.hpp"
#include "spincant/errors.hpp"
#include "spincant/states.hpp"

namespace spincant {

struct IntegratorConfig {
    enum class Method { dop853, rk4 };
    Method method = Method::dop853;
    double rtol = 1e-8;
    double atol = 1e-10;
    double dt = 1e-3; // fixed-step target for rk4
    double max_step = std::numeric_limits<double>::infinity();
    long max_steps = 200000000;

    void validate() const {
        if (!(rtol > 0.0) || !(atol >= 0.0)) throw ValidationError("integrator: rtol must be > 0, atol >= 0");
        if (method == Method::rk4 && !(dt > 0.0)) throw ValidationError("integrator: rk4 needs dt > 0");
        if (!(max_step > 0.0)) throw ValidationError("integrator: max_step must be > 0");
        if (max_steps < 1) throw ValidationError("integrator: max_steps must be >= 1");
    }
};

struct StepStats {
    long n_steps = 0;
    long n_rejected = 0;
    long n_rhs = 0;
};

template <class F>
concept RhsFn = std::invocable<F, double, std::span<const cdouble>, std::span<cdouble>>;

// Drives a complex ODE system y' = f(t, y) forward in time. advance() may be
// called repeatedly over consecutive stretches; the working step size and the
// first-same-as-last derivative cache carry over. Call reset() whenever y is
// mutated externally or f changes discontinuously.
template <RhsFn F>
class Integrator {
  public:
    Integrator(F f, IntegratorConfig cfg, size_t dim) : f_(std::forward<F>(f)), cfg_(cfg), dim_(dim) {
        cfg_.validate();
        if (cfg_.method == IntegratorConfig::Method::dop853) {
            for (int s = 0; s < dop853::n_stages; ++s) {
                for (int j = 0; j < s; ++j)
                    if (dop853::a[s][j] != 0.0) a_nz_[s].push_back({j, dop853::a[s][j]});
            }
            k_.assign(dop853::n_stages + 1, std::vector<cdouble>(dim_));
            y_stage_.resize(dim_);
            y_new_.resize(dim_);
        } else {
            k_.assign(4, std::vector<cdouble>(dim_));
            y_stage_.resize(dim_);
        }
    }

    void advance(std::vector<cdouble>& y, double a, double b) {
        if (y.size() != dim_) throw ValidationError("integrator: state dimension mismatch");
        if (b < a) throw ValidationError("integrator: backward integration is not supported");
        if (b == a) return;
        if (cfg_.method == IntegratorConfig::Method::rk4)
            advance_rk4(y, a, b);
        else
            advance_dop853(y, a, b);
    }

    void reset() { fsal_valid_ = false; }

    const StepStats& stats() const { return stats_; }

  private:
    F f_;
    IntegratorConfig cfg_;
    size_t dim_;
    StepStats stats_;

    std::vector<std::pair<int, double>> a_nz_[dop853::n_stages];
    std::vector<std::vector<cdouble>> k_;
    std::vector<cdouble> y_stage_;
    std::vector<cdouble> y_new_;
    double h_ = 0.0;
    bool fsal_valid_ = false;

    static constexpr double kSafety = 0.9;
    static constexpr double kMinFactor = 0.2;
    static constexpr double kMaxFactor = 10.0;
    static constexpr double kErrExponent = -1.0 / 8.0;

    void eval(double t, const std::vector<cdouble>& y, std::vector<cdouble>& dydt) {
        f_(t, std::span<const cdouble>(y), std::span<cdouble>(dydt));
        ++stats_.n_rhs;
    }

    double rms(const std::vector<cdouble>& v, const std::vector<double>& scale) const {
        double acc = 0.0;
        for (size_t i = 0; i < v.size(); ++i) {
            double m = std::abs(v[i]) / scale[i];
            acc += m * m;
        }
        return std::sqrt(acc / static_cast<double>(v.size()));
    }

    std::vector<double> error_scale(const std::vector<cdouble>& y0, const std::vector<cdouble>& y1) const {
        std::vector<double> scale(dim_);
        for (size_t i = 0; i < dim_; ++i)
            scale[i] = cfg_.atol + cfg_.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        return scale;
    }

    double initial_step(double t0, const std::vector<cdouble>& y, double span) {
        std::vector<double> scale(dim_);
        for (size_t i = 0; i < dim_; ++i) scale[i] = cfg_.atol + cfg_.rtol * std::abs(y[i]);
        double d0 = rms(y, scale);
        double d1 = rms(k_[0], scale);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, span);

        for (size_t i = 0; i < dim_; ++i) y_stage_[i] = y[i] + h0 * k_[0][i];
        eval(t0 + h0, y_stage_, k_[1]);
        for (size_t i = 0; i < dim_; ++i) y_stage_[i] = k_[1][i] - k_[0][i];
        double d2 = rms(y_stage_, scale) / h0;

        double h1;
        if (d1 <= 1e-15 && d2 <= 1e-15)
            h1 = std::max(1e-6, h0 * 1e-3);
        else
            h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
        return std::min({100.0 * h0, h1, cfg_.max_step, span});
    }

    void advance_dop853(std::vector<cdouble>& y, double a, double b) {
        double t = a;
        if (!fsal_valid_) {
            eval(t, y, k_[0]);
            fsal_valid_ = true;
        }
        if (h_ <= 0.0) h_ = initial_step(t, y, b - a);

        bool rejected = false;
        while (t < b) {
            const double min_step =
                10.0 * std::abs(std::nextafter(t, std::numeric_limits<double>::infinity()) - t);
            double h = std::clamp(h_, min_step, cfg_.max_step);
            bool clamped_to_end = false;
            if (t + h >= b) {
                h = b - t;
                clamped_to_end = true;
            }

            for (int s = 1; s < dop853::n_stages; ++s) {
                for (size_t i = 0; i < dim_; ++i) {
                    cdouble acc{0.0, 0.0};
                    for (const auto& [j, aij] : a_nz_[s]) acc += aij * k_[j][i];
                    y_stage_[i] = y[i] + h * acc;
                }
                eval(t + dop853::c[s] * h, y_stage_, k_[s]);
            }
            for (size_t i = 0; i < dim_; ++i) {
                cdouble acc{0.0, 0.0};
                for (int j = 0; j < dop853::n_stages; ++j)
                    if (dop853::b[j] != 0.0) acc += dop853::b[j] * k_[j][i];
                y_new_[i] = y[i] + h * acc;
            }

            auto scale = error_scale(y, y_new_);
            double err_acc = 0.0;
            for (size_t i = 0; i < dim_; ++i) {
                cdouble e5{0.0, 0.0}, e3{0.0, 0.0};
                for (int j = 0; j < dop853::n_stages; ++j) {
                    if (dop853::e5[j] != 0.0) e5 += dop853::e5[j] * k_[j][i];
                    if (dop853::e3[j] != 0.0) e3 += dop853::e3[j] * k_[j][i];
                }
                double a5 = std::abs(e5);
                double denom = std::hypot(a5, 0.1 * std::abs(e3));
                double corr = denom > 0.0 ? a5 / denom : 1.0;
                double v = a5 * corr * h / scale[i];
                err_acc += v * v;
            }
            double error_norm = std::sqrt(err_acc / static_cast<double>(dim_));

            if (error_norm < 1.0) {
                double factor = error_norm == 0.0
                                    ? kMaxFactor
                                    : std::min(kMaxFactor, kSafety * std::pow(error_norm, kErrExponent));
                if (rejected) factor = std::min(1.0, factor);
                rejected = false;

                t = clamped_to_end ? b : t + h;
                eval(t, y_new_, k_[dop853::n_stages]);
                std::swap(y, y_new_);
                std::swap(k_[0], k_[dop853::n_stages]);
                // A step shortened only to land on the stretch end says nothing
                // about the error at full length; keep the working step.
                if (!clamped_to_end) h_ = h * factor;
                ++stats_.n_steps;
            } else {
                rejected = true;
                ++stats_.n_rejected;
                h_ = h * std::max(kMinFactor, kSafety * std::pow(error_norm, kErrExponent));
                if (h_ < min_step)
                    throw IntegratorError("step size underflow at tau = " + std::to_string(t));
            }
            if (stats_.n_steps + stats_.n_rejected > cfg_.max_steps)
                throw IntegratorError("step budget exhausted at tau = " + std::to_string(t));
        }
    }

    void advance_rk4(std::vector<cdouble>& y, double a, double b) {
        const double span = b - a;
        const long n = std::max(1L, static_cast<long>(std::ceil(span / cfg_.dt - 1e-12)));
        if (stats_.n_steps + n > cfg_.max_steps)
            throw IntegratorError("step budget exhausted");
        const double h = span / static_cast<double>(n);
        for (long step = 0; step < n; ++step) {
            const double t = a + h * static_cast<double>(step);
            eval(t, y, k_[0]);
            for (size_t i = 0; i < dim_; ++i) y_stage_[i] = y[i] + 0.5 * h * k_[0][i];
            eval(t + 0.5 * h, y_stage_, k_[1]);
            for (size_t i = 0; i < dim_; ++i) y_stage_[i] = y[i] + 0.5 * h * k_[1][i];
            eval(t + 0.5 * h, y_stage_, k_[2]);
            for (size_t i = 0; i < dim_; ++i) y_stage_[i] = y[i] + h * k_[2][i];
            eval(t + h, y_stage_, k_[3]);
            for (size_t i = 0; i < dim_; ++i)
                y[i] += h / 6.0 * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
            ++stats_.n_steps;
        }
    }
};

}
