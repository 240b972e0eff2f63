#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spincant/analysis.hpp"
#include "spincant/integrate.hpp"
#include "spincant/scenario.hpp"
#include "spincant/schedule.hpp"
#include "spincant/states.hpp"

namespace spincant {

// Versioned binary snapshot files (native endianness).
void save_spinor(const std::filesystem::path& path, double tau, const SpinorState& psi);
void save_density(const std::filesystem::path& path, double tau, const DensityState& rho);

struct SpinorSnapshot {
    double tau = 0.0;
    SpinorState psi;
};
struct DensitySnapshot {
    double tau = 0.0;
    DensityState rho;
};
SpinorSnapshot load_spinor(const std::filesystem::path& path);
DensitySnapshot load_density(const std::filesystem::path& path);

// IEEE 802.3 CRC-32 (the zlib/gzip polynomial), used for manifest checksums.
std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len, std::uint32_t crc = 0);
std::uint32_t file_crc32(const std::filesystem::path& path);

// Writes `manifest.txt` listing every regular file directly inside the
// directory (sorted by name) as "<crc32 hex> <size> <name>".
std::filesystem::path write_manifest(const std::filesystem::path& dir);

// One trajectory CSV row. `weight` is the norm for closed runs and the trace
// for open runs; purity/herm_defect/n_occ stay at their defaults for closed.
struct TrajectoryPoint {
    double tau = 0.0;
    double weight = 1.0;
    double purity = 1.0;
    double herm_defect = 0.0;
    double z = 0.0, p = 0.0, z2 = 0.0, n_occ = 0.0;
    double sx = 0.0, sy = 0.0, sz = 0.0;
    double tail = 0.0;
    long long steps = 0;
};

// One peak/coherence analysis row; absent quantities are NaN.
struct AnalysisRow {
    double tau = 0.0;
    int n_peaks = 0;
    bool separated = false;
    double total_weight = 0.0;
    double big_weight = 0.0, small_weight = 0.0;
    double ratio = 0.0, predicted = 0.0;
    double big_purity = 0.0, small_purity = 0.0;
    double big_alignment = 0.0, small_alignment = 0.0;
    double big_centroid = 0.0, small_centroid = 0.0;
    double mask_width = -1.0;
    double coherence = 0.0;
    bool coherence_pre = true;
};

struct RunSummary {
    RunMode mode = RunMode::closed;
    StepStats stats;
    double max_weight_drift = 0.0; // max |norm - 1| or |trace - 1| over the run
    std::vector<TrajectoryPoint> series;
    std::vector<AnalysisRow> analysis;

    // Cat runs: fitted branch-coherence decay against D beta d^2.
    bool has_branch_fit = false;
    DecayFit branch_fit;
    double branch_separation = 0.0;
    double predicted_branch_rate = 0.0;

    std::vector<std::filesystem::path> files;
};

// Runs the scenario, streams series.csv / analysis.csv / state dumps /
// decay data into out_dir, and writes the manifest.
RunSummary run_scenario(const Scenario& sc, const std::filesystem::path& out_dir);

// Re-analyzes the state dumps found in `dir`: per-snapshot density profile,
// peak records, and log-magnitude contour exports.
struct AnalyzeSummary {
    int n_snapshots = 0;
    std::vector<std::filesystem::path> files;
};
AnalyzeSummary analyze_snapshots(const Scenario& sc, const std::filesystem::path& dir);

// Evolves the same initial state closed and open (beta = D = 0 required) and
// compares rho against |psi><psi| elementwise at every analysis snapshot.
struct EquivalenceReport {
    double max_diff = 0.0;
    int n_points = 0;
    double tolerance = 1e-6;
    bool pass = false;
};
EquivalenceReport run_equivalence(const Scenario& sc, const std::filesystem::path& out_dir,
                                  double tolerance = 1e-6);

// Repeats the run over a list of basis sizes and checks that final-state
// observables converge toward the largest basis.
struct ConvergenceReport {
    std::vector<int> basis;
    std::vector<double> deviation; // per basis below the largest, vs the largest
    bool pass = false;
};
ConvergenceReport run_convergence(const Scenario& sc, std::vector<int> basis,
                                  const std::filesystem::path& out_dir, int threads = 0);

// Slow-sweep condition report for the scenario's schedule and amplitude.
AdiabaticityReport run_adiabatic(const Scenario& sc, const std::filesystem::path& out_dir);

// Worker threads for sweep fan-out: min(jobs, SPINCANT_THREADS or hardware).
int worker_count(std::size_t jobs);

}
