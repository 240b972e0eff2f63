#pragma once

#include <filesystem>
#include <string>

#include "spincant/config.hpp"
#include "spincant/grid.hpp"
#include "spincant/integrate.hpp"
#include "spincant/params.hpp"
#include "spincant/schedule.hpp"
#include "spincant/states.hpp"

namespace spincant {

enum class RunMode { closed, open };

enum class InitialKind {
    coherent, // displaced ground state times a pure spin
    cat       // even superposition of +alpha and -alpha, same spin factor
};

// One complete simulation request: physics, schedule, initial condition,
// horizon, output cadences, numerics, and analysis grid.
struct Scenario {
    std::string name = "scenario";
    RunMode mode = RunMode::closed;
    SimParams params;
    PhaseSchedule schedule = PhaseSchedule::constant(0.0);

    InitialKind initial = InitialKind::coherent;
    cdouble alpha{0.0, 0.0};
    double spin_theta = 0.0; // Bloch angles of the initial spin
    double spin_phi = 0.0;

    double tau_end = 1.0;
    double cadence = 0.05;          // trajectory CSV rows
    double analysis_cadence = 0.25; // peak/coherence analysis snapshots
    int snapshots = 5;              // evenly spaced full-state dumps

    int grid_points = 1024;
    double grid_half = 0.0; // <= 0 derives the half-width from <E> at tau=0

    IntegratorConfig integrator;
    bool rotating_basis = false;
    double truncation_threshold = 1e-8;
    double max_norm_drift = 1e-5;
    double max_trace_drift = 1e-5;
    double memory_budget_mb = 8192.0;

    static Scenario from_config(const KeyValueConfig& cfg);
    static Scenario from_file(const std::filesystem::path& path);

    void validate() const;

    SpinorState initial_state() const;
    Grid make_grid() const;

    // Initial position-space distance between the two cat branches.
    double branch_separation() const;
};

RunMode parse_run_mode(const std::string& text);

}
