#include "spincant/scenario.hpp"

#include <cmath>
#include <numbers>

#include "spincant/errors.hpp"

namespace spincant {

RunMode parse_run_mode(const std::string& text) {
    if (text == "closed") return RunMode::closed;
    if (text == "open") return RunMode::open;
    throw ValidationError("mode must be 'closed' or 'open', got '" + text + "'");
}

Scenario Scenario::from_config(const KeyValueConfig& cfg) {
    Scenario sc;
    sc.name = cfg.get_string("name", "scenario");
    sc.mode = parse_run_mode(cfg.get_string("mode"));

    sc.params.eta = cfg.get_double("eta");
    sc.params.epsilon = cfg.get_double("epsilon");
    sc.params.beta = cfg.get_double("beta", 0.0);
    sc.params.big_d = cfg.get_double("D", 0.0);
    sc.params.n_basis = static_cast<int>(cfg.get_int("n_basis"));

    sc.schedule = PhaseSchedule::parse(cfg.get_string("schedule", "constant/0"));

    const std::string kind = cfg.get_string("initial", "coherent");
    if (kind == "coherent")
        sc.initial = InitialKind::coherent;
    else if (kind == "cat")
        sc.initial = InitialKind::cat;
    else
        throw ValidationError("initial must be 'coherent' or 'cat', got '" + kind + "'");

    sc.alpha = {cfg.get_double("alpha_re", 0.0), cfg.get_double("alpha_im", 0.0)};
    sc.spin_theta = cfg.get_double("spin_theta", 0.0);
    sc.spin_phi = cfg.get_double("spin_phi", 0.0);

    sc.tau_end = cfg.get_double("tau_end");
    sc.cadence = cfg.get_double("cadence", 0.05);
    sc.analysis_cadence = cfg.get_double("analysis_cadence", 0.25);
    sc.snapshots = static_cast<int>(cfg.get_int("snapshots", 5));

    sc.grid_points = static_cast<int>(cfg.get_int("grid_points", 1024));
    sc.grid_half = cfg.get_double("grid_half", 0.0);

    const std::string method = cfg.get_string("method", "dop853");
    if (method == "dop853")
        sc.integrator.method = IntegratorConfig::Method::dop853;
    else if (method == "rk4")
        sc.integrator.method = IntegratorConfig::Method::rk4;
    else
        throw ValidationError("method must be 'dop853' or 'rk4', got '" + method + "'");
    sc.integrator.rtol = cfg.get_double("rtol", sc.integrator.rtol);
    sc.integrator.atol = cfg.get_double("atol", sc.integrator.atol);
    sc.integrator.dt = cfg.get_double("dt", sc.integrator.dt);
    if (cfg.has("max_step")) sc.integrator.max_step = cfg.get_double("max_step", 0.0);

    sc.rotating_basis = cfg.get_bool("rotating_basis", false);
    sc.truncation_threshold = cfg.get_double("truncation_threshold", 1e-8);
    sc.max_norm_drift = cfg.get_double("max_norm_drift", 1e-5);
    sc.max_trace_drift = cfg.get_double("max_trace_drift", 1e-5);
    sc.memory_budget_mb = cfg.get_double("memory_budget_mb", 8192.0);

    const auto extra = cfg.unconsumed();
    if (!extra.empty()) {
        std::string msg = "unknown config keys in " + cfg.origin() + ":";
        for (const auto& k : extra) msg += " " + k;
        throw ValidationError(msg);
    }

    sc.validate();
    return sc;
}

Scenario Scenario::from_file(const std::filesystem::path& path) {
    return from_config(KeyValueConfig::from_file(path.string()));
}

void Scenario::validate() const {
    params.validate();
    integrator.validate();
    if (name.empty() || name.find('/') != std::string::npos)
        throw ValidationError("scenario name must be nonempty and contain no '/'");
    if (!(tau_end > 0.0) || !std::isfinite(tau_end))
        throw ValidationError("tau_end must be positive and finite");
    if (!(cadence > 0.0) || !(analysis_cadence > 0.0))
        throw ValidationError("cadences must be positive");
    if (snapshots < 0) throw ValidationError("snapshots must be >= 0");
    if (grid_points < 16) throw ValidationError("grid_points must be at least 16");
    if (grid_half > 0.0 && !std::isfinite(grid_half))
        throw ValidationError("grid_half must be finite");
    if (!(truncation_threshold > 0.0))
        throw ValidationError("truncation_threshold must be positive");
    if (!(max_norm_drift > 0.0) || !(max_trace_drift > 0.0))
        throw ValidationError("drift tolerances must be positive");
    if (!(memory_budget_mb > 0.0)) throw ValidationError("memory budget must be positive");
    if (initial == InitialKind::cat) {
        if (std::abs(alpha) == 0.0)
            throw ValidationError("cat initial state needs a nonzero alpha");
        if (alpha.imag() != 0.0)
            throw ValidationError("cat initial state requires real alpha (branches at rest)");
    }
}

SpinorState Scenario::initial_state() const {
    if (initial == InitialKind::coherent)
        return coherent_spinor(alpha, spin_theta, spin_phi, params.n_basis);

    auto plus = coherent_amplitudes(alpha, params.n_basis);
    const auto minus = coherent_amplitudes(-alpha, params.n_basis);
    double norm2 = 0.0;
    for (std::size_t k = 0; k < plus.size(); ++k) {
        plus[k] += minus[k];
        norm2 += std::norm(plus[k]);
    }
    const double inv = 1.0 / std::sqrt(norm2);
    const double c = std::cos(0.5 * spin_theta);
    const cdouble s = std::polar(std::sin(0.5 * spin_theta), spin_phi);
    SpinorState psi(params.n_basis);
    for (std::size_t k = 0; k < plus.size(); ++k) {
        const cdouble amp = plus[k] * inv;
        psi.up[k] = c * amp;
        psi.down[k] = s * amp;
    }
    return psi;
}

Grid Scenario::make_grid() const {
    if (grid_half > 0.0) return Grid::symmetric(grid_half, grid_points);
    const double energy = std::norm(alpha) + 0.5;
    return Grid::for_energy(energy, grid_points);
}

double Scenario::branch_separation() const {
    return 2.0 * std::numbers::sqrt2 * std::abs(alpha);
}

}
