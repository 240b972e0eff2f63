#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spincant/errors.hpp"
#include "spincant/runner.hpp"
#include "spincant/scenario.hpp"

namespace {

using namespace spincant;

void print_run_summary(const Scenario& sc, const RunSummary& sum) {
    std::printf("scenario: %s\n", sc.name.c_str());
    std::printf("mode: %s\n", sc.mode == RunMode::closed ? "closed" : "open");
    std::printf("steps: %zu accepted, %zu rejected, %zu rhs evaluations\n", sum.stats.n_steps,
                sum.stats.n_rejected, sum.stats.n_rhs);
    std::printf("%s drift: %.3e\n", sc.mode == RunMode::closed ? "norm" : "trace",
                sum.max_weight_drift);

    const AnalysisRow* first_sep = nullptr;
    for (const auto& row : sum.analysis)
        if (row.separated) {
            first_sep = &row;
            break;
        }
    if (first_sep) {
        const auto& last = sum.analysis.back();
        std::printf("peaks separated from tau = %.3f\n", first_sep->tau);
        std::printf("final weight ratio: %.6e (predicted %.6e)\n", last.ratio, last.predicted);
        std::printf("final coherence: %.6e%s\n", last.coherence,
                    last.coherence_pre ? " (pre-separation)" : "");
    } else {
        std::printf("peaks separated: never\n");
    }

    if (sum.has_branch_fit) {
        std::printf("branch separation d = %.4f\n", sum.branch_separation);
        std::printf("coherence decay: fitted %.6e vs predicted %.6e (ratio %.4f, r2 %.6f)\n",
                    sum.branch_fit.rate, sum.predicted_branch_rate,
                    sum.branch_fit.rate / sum.predicted_branch_rate, sum.branch_fit.r2);
    }
    std::printf("artifacts: %zu files\n", sum.files.size());
}

}

int main(int argc, char** argv) {
    CLI::App app{"cantilever-spin measurement simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mode_override;
    int snapshots_override = -1;
    std::vector<int> basis;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "scenario config file")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    auto* run = app.add_subcommand("run", "run a scenario and write all artifacts");
    add_common(run);
    run->add_option("--mode", mode_override, "override the scenario mode")
        ->check(CLI::IsMember({"closed", "open"}));
    run->add_option("--snapshots", snapshots_override, "override the number of state dumps")
        ->check(CLI::NonNegativeNumber);

    auto* analyze = app.add_subcommand("analyze", "re-analyze state dumps in an output directory");
    add_common(analyze);

    auto* convergence =
        app.add_subcommand("convergence", "repeat the run over several basis sizes");
    add_common(convergence);
    convergence->add_option("--basis", basis, "comma-separated basis sizes")
        ->required()
        ->delimiter(',');

    auto* adiabatic = app.add_subcommand("adiabatic", "check the slow-sweep conditions");
    add_common(adiabatic);

    auto* equivalence =
        app.add_subcommand("equivalence", "compare closed and open dynamics at beta = D = 0");
    add_common(equivalence);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        Scenario sc = Scenario::from_file(config_path);
        if (!mode_override.empty()) sc.mode = parse_run_mode(mode_override);
        if (snapshots_override >= 0) sc.snapshots = snapshots_override;

        if (run->parsed()) {
            const RunSummary sum = run_scenario(sc, out_dir);
            print_run_summary(sc, sum);
            return static_cast<int>(ExitCode::ok);
        }
        if (analyze->parsed()) {
            const AnalyzeSummary sum = analyze_snapshots(sc, out_dir);
            std::printf("analyzed %d snapshots, wrote %zu files\n", sum.n_snapshots,
                        sum.files.size());
            return static_cast<int>(ExitCode::ok);
        }
        if (convergence->parsed()) {
            const ConvergenceReport rep = run_convergence(sc, basis, out_dir);
            for (std::size_t k = 0; k < rep.deviation.size(); ++k)
                std::printf("N = %d vs N = %d: max deviation %.6e\n", rep.basis[k],
                            rep.basis.back(), rep.deviation[k]);
            std::printf("convergence: %s\n", rep.pass ? "PASS" : "FAIL");
            return rep.pass ? static_cast<int>(ExitCode::ok)
                            : static_cast<int>(ExitCode::physics);
        }
        if (adiabatic->parsed()) {
            const AdiabaticityReport rep = run_adiabatic(sc, out_dir);
            std::printf("field-turning ratio: %.6g\n", rep.accel_ratio);
            std::printf("back-action ratio:   %.6g\n", rep.coupling_ratio);
            std::printf("adiabaticity (threshold %.3g): %s\n", rep.threshold,
                        rep.pass ? "PASS" : "FAIL");
            return rep.pass ? static_cast<int>(ExitCode::ok)
                            : static_cast<int>(ExitCode::physics);
        }
        if (equivalence->parsed()) {
            const EquivalenceReport rep = run_equivalence(sc, out_dir);
            std::printf("snapshots compared: %d\n", rep.n_points);
            std::printf("max elementwise |rho - psi psi*|: %.6e (tolerance %.1e)\n", rep.max_diff,
                        rep.tolerance);
            std::printf("equivalence: %s\n", rep.pass ? "PASS" : "FAIL");
            return rep.pass ? static_cast<int>(ExitCode::ok)
                            : static_cast<int>(ExitCode::physics);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(ExitCode::usage);
    }
    return static_cast<int>(ExitCode::usage);
}
