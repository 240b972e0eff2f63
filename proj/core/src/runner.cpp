#include "spincant/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "spincant/errors.hpp"
#include "spincant/master.hpp"
#include "spincant/schrodinger.hpp"

namespace spincant {

namespace fs = std::filesystem;

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

// RAII stdio handle; close_checked() surfaces write errors.
struct OutFile {
    std::FILE* f = nullptr;
    fs::path path;

    explicit OutFile(const fs::path& p) : path(p) {
        f = std::fopen(p.string().c_str(), "wb");
        if (!f) throw IoError("cannot open '" + p.string() + "': " + std::strerror(errno));
    }
    OutFile(const OutFile&) = delete;
    OutFile& operator=(const OutFile&) = delete;
    ~OutFile() {
        if (f) std::fclose(f);
    }
    void close_checked() {
        if (!f) return;
        const bool bad = std::ferror(f) != 0;
        const bool close_bad = std::fclose(f) != 0;
        f = nullptr;
        if (bad || close_bad) throw IoError("write failed for '" + path.string() + "'");
    }
};

void put_num(std::FILE* f, double v) {
    if (std::isnan(v))
        std::fputs("nan", f);
    else
        std::fprintf(f, "%.12e", v);
}

std::string snapshot_name(std::size_t index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "state_%04zu%s", index, ext);
    return buf;
}

void write_raw(std::FILE* f, const void* data, std::size_t bytes, const fs::path& p) {
    if (std::fwrite(data, 1, bytes, f) != bytes)
        throw IoError("write failed for '" + p.string() + "'");
}

void read_raw(std::FILE* f, void* data, std::size_t bytes, const fs::path& p) {
    if (std::fread(data, 1, bytes, f) != bytes)
        throw IoError("unexpected end of file in '" + p.string() + "'");
}

struct SnapshotHeader {
    char magic[4];
    std::uint32_t version;
    std::uint32_t n_basis;
    double tau;
};

constexpr std::uint32_t snapshot_version = 1;

SnapshotHeader read_header(std::FILE* f, const fs::path& p, const char* magic) {
    SnapshotHeader h{};
    read_raw(f, &h, sizeof h, p);
    if (std::memcmp(h.magic, magic, 4) != 0)
        throw IoError("'" + p.string() + "' is not a " + std::string(magic) + " snapshot");
    if (h.version != snapshot_version)
        throw IoError("unsupported snapshot version in '" + p.string() + "'");
    if (h.n_basis == 0 || h.n_basis > (1u << 16))
        throw IoError("implausible basis size in '" + p.string() + "'");
    return h;
}

}

void save_spinor(const fs::path& path, double tau, const SpinorState& psi) {
    OutFile out(path);
    SnapshotHeader h{{'S', 'P', 'C', 'S'}, snapshot_version, static_cast<std::uint32_t>(psi.n_basis), tau};
    write_raw(out.f, &h, sizeof h, path);
    write_raw(out.f, psi.up.data(), psi.up.size() * sizeof(cdouble), path);
    write_raw(out.f, psi.down.data(), psi.down.size() * sizeof(cdouble), path);
    out.close_checked();
}

void save_density(const fs::path& path, double tau, const DensityState& rho) {
    OutFile out(path);
    SnapshotHeader h{{'S', 'P', 'C', 'D'}, snapshot_version, static_cast<std::uint32_t>(rho.n_basis), tau};
    write_raw(out.f, &h, sizeof h, path);
    write_raw(out.f, rho.a.data(), rho.a.size() * sizeof(cdouble), path);
    out.close_checked();
}

SpinorSnapshot load_spinor(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    SpinorSnapshot snap;
    try {
        const auto h = read_header(f, path, "SPCS");
        snap.tau = h.tau;
        snap.psi = SpinorState(static_cast<int>(h.n_basis));
        read_raw(f, snap.psi.up.data(), snap.psi.up.size() * sizeof(cdouble), path);
        read_raw(f, snap.psi.down.data(), snap.psi.down.size() * sizeof(cdouble), path);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return snap;
}

DensitySnapshot load_density(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    DensitySnapshot snap;
    try {
        const auto h = read_header(f, path, "SPCD");
        snap.tau = h.tau;
        snap.rho = DensityState(static_cast<int>(h.n_basis));
        read_raw(f, snap.rho.a.data(), snap.rho.a.size() * sizeof(cdouble), path);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return snap;
}

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len, std::uint32_t crc) {
    // Reflected CRC-32, polynomial 0xEDB88320 (IEEE 802.3 / zlib).
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c >> 1) ^ ((c & 1u) ? 0xEDB88320u : 0u);
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

std::uint32_t file_crc32(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    std::uint32_t crc = 0;
    unsigned char buf[1 << 16];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) crc = crc32_ieee(buf, got, crc);
    const bool bad = std::ferror(f) != 0;
    std::fclose(f);
    if (bad) throw IoError("read failed for '" + path.string() + "'");
    return crc;
}

fs::path write_manifest(const fs::path& dir) {
    std::vector<fs::path> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.txt")
            names.push_back(entry.path());
    std::sort(names.begin(), names.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    const fs::path manifest = dir / "manifest.txt";
    OutFile out(manifest);
    for (const auto& p : names)
        std::fprintf(out.f, "%08x %llu %s\n", file_crc32(p),
                     static_cast<unsigned long long>(fs::file_size(p)),
                     p.filename().string().c_str());
    out.close_checked();
    return manifest;
}

namespace {

void write_analysis_csv(const fs::path& path, const std::vector<AnalysisRow>& rows) {
    OutFile out(path);
    std::fputs(
        "tau,n_peaks,separated,total_weight,big_weight,small_weight,weight_ratio,"
        "predicted_ratio,big_purity,small_purity,big_alignment,small_alignment,"
        "big_centroid,small_centroid,mask_width,coherence,coherence_pre\n",
        out.f);
    for (const auto& r : rows) {
        put_num(out.f, r.tau);
        std::fprintf(out.f, ",%d,%d,", r.n_peaks, r.separated ? 1 : 0);
        const double cols[] = {r.total_weight, r.big_weight,    r.small_weight,    r.ratio,
                               r.predicted,    r.big_purity,    r.small_purity,    r.big_alignment,
                               r.small_alignment, r.big_centroid, r.small_centroid, r.mask_width,
                               r.coherence};
        for (std::size_t i = 0; i < std::size(cols); ++i) {
            put_num(out.f, cols[i]);
            std::fputc(',', out.f);
        }
        std::fprintf(out.f, "%d\n", r.coherence_pre ? 1 : 0);
    }
    out.close_checked();
}

// Shared per-snapshot analysis: peaks, per-peak spin states, masked coherence.
struct AnalysisDriver {
    const Scenario& sc;
    Grid grid;
    std::vector<AnalysisRow> rows;
    struct BranchSample {
        double tau = 0.0;
        double gamma = 0.0;      // raw dual-basis branch coherence
        double overlap = 0.0;    // |<b1|b2>| at this time
        double teff = 0.0;       // integral of the squared separation modulation
        double corrected = 0.0;  // overlap-bias-corrected coherence
    };
    DecayTracker branch_tracker;
    std::vector<BranchSample> branch_samples;

    explicit AnalysisDriver(const Scenario& s) : sc(s), grid(s.make_grid()) {}

    template <typename State>
    void snapshot(double tau, const State& state) {
        PositionField field = position_density(state, grid);
        field.tau = tau;
        check_boundary_mass(field);
        const PeakReport report = detect_peaks(field);

        AnalysisRow row;
        row.tau = tau;
        row.n_peaks = static_cast<int>(report.peaks.size());
        row.separated = report.separated;
        row.total_weight = report.total_weight;
        row.predicted = predicted_ratio(sc.params, sc.schedule);
        row.big_weight = row.small_weight = row.ratio = nan_v;
        row.big_purity = row.small_purity = nan_v;
        row.big_alignment = row.small_alignment = nan_v;
        row.big_centroid = row.small_centroid = nan_v;

        const auto axis = effective_field(sc.params, sc.schedule, tau);
        const std::array<double, 3> anti{-axis[0], -axis[1], -axis[2]};
        if (!report.peaks.empty()) {
            row.big_weight = report.peaks[0].weight;
            row.big_centroid = report.peaks[0].centroid;
            if (report.peaks[0].weight > 1e-10) {
                const auto s = peak_spin_state(state, grid, report.peaks[0], axis);
                row.big_purity = s.purity;
                row.big_alignment = s.alignment_angle;
            }
        }
        if (report.peaks.size() >= 2) {
            row.small_weight = report.peaks[1].weight;
            row.small_centroid = report.peaks[1].centroid;
            row.ratio = peak_ratio(report);
            if (report.peaks[1].weight > 1e-10) {
                const auto s = peak_spin_state(state, grid, report.peaks[1], anti);
                row.small_purity = s.purity;
                row.small_alignment = s.alignment_angle;
            }
        }

        // Mask engages as soon as two peaks resolve: half the centroid distance cleanly
        // excludes within-branch coherence (branch width << separation) even before the
        // valley bottoms out, which matters for open runs where noise lifts the floor.
        double mask = -1.0;
        if (report.peaks.size() >= 2)
            mask = 0.5 * std::abs(report.peaks[0].centroid - report.peaks[1].centroid);
        const auto coherence = coherence_norm(traced_matrix(state), grid, mask);
        row.mask_width = mask;
        row.coherence = coherence.value;
        row.coherence_pre = coherence.pre_separation;
        rows.push_back(row);
    }

    void track_branches(double tau, const DensityState& rho) {
        const cdouble a = sc.alpha * std::polar(std::exp(-0.5 * sc.params.beta * tau), -tau);
        const auto b1 = coherent_amplitudes(a, sc.params.n_basis);
        const auto b2 = coherent_amplitudes(-a, sc.params.n_basis);
        BranchSample s;
        s.tau = tau;
        s.gamma = branch_coherence(rho, b1, b2);
        // Two known leading-order effects separate the raw slope from the flat
        // decoherence coefficient: the dual-basis projection amplifies the decay
        // by 1/(1-g)^2 when the branches overlap (g = |<b1|b2>|), and the noise
        // kernel accumulates as the integral of the squared position separation,
        // which oscillates as cos^2 while the branches rotate. Undo both before
        // fitting so the slope is comparable across separations.
        s.overlap = std::exp(-2.0 * std::norm(a));
        s.teff = 0.5 * tau + 0.25 * std::sin(2.0 * tau);
        const double w = (1.0 - s.overlap) * (1.0 - s.overlap);
        s.corrected = s.gamma > 0.0 ? std::pow(s.gamma, w) : 0.0;
        branch_tracker.push(s.teff, s.corrected);
        branch_samples.push_back(s);
    }

  private:
    std::vector<cdouble> traced_matrix(const SpinorState& psi) const {
        const auto comps = wavefunctions(psi, grid);
        const auto m = static_cast<std::size_t>(grid.m);
        std::vector<cdouble> mat(m * m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                mat[i * m + j] =
                    comps[0][i] * std::conj(comps[0][j]) + comps[1][i] * std::conj(comps[1][j]);
        return mat;
    }
    std::vector<cdouble> traced_matrix(const DensityState& rho) const {
        return spin_traced_matrix(rho, grid);
    }
};

std::vector<double> dump_times_for(const Scenario& sc) {
    std::vector<double> times;
    if (sc.snapshots == 1) {
        times.push_back(sc.tau_end);
    } else {
        for (int i = 0; i < sc.snapshots; ++i)
            times.push_back(sc.tau_end * i / (sc.snapshots - 1));
    }
    return times;
}

}

RunSummary run_scenario(const Scenario& sc, const fs::path& out_dir) {
    sc.validate();
    fs::create_directories(out_dir);

    RunSummary sum;
    sum.mode = sc.mode;

    AnalysisDriver analysis(sc);
    const std::vector<double> analysis_times = snapshot_times(0.0, sc.tau_end, sc.analysis_cadence);
    const std::vector<double> dump_times = dump_times_for(sc);
    std::size_t analysis_i = 0, dump_i = 0;

    const SpinorState psi0 = sc.initial_state();
    const bool cat_tracking = sc.initial == InitialKind::cat && sc.mode == RunMode::open;

    const fs::path series_path = out_dir / "series.csv";
    OutFile series(series_path);
    sum.files.push_back(series_path);

    if (sc.mode == RunMode::closed) {
        std::fputs("tau,norm,z_mean,p_mean,z2_mean,spin_x,spin_y,spin_z,tail,steps\n", series.f);
        EvolveOptions opt;
        opt.tau_begin = 0.0;
        opt.tau_end = sc.tau_end;
        opt.snapshot_cadence = sc.cadence;
        opt.integrator = sc.integrator;
        opt.use_rotating_basis = sc.rotating_basis;
        opt.truncation_threshold = sc.truncation_threshold;
        opt.max_norm_drift = sc.max_norm_drift;

        SpinorObserver obs = [&](double tau, const SpinorState& psi, const StepStats& stats) {
            TrajectoryPoint pt;
            pt.tau = tau;
            pt.weight = std::sqrt(psi.norm2());
            pt.z = psi.z_mean();
            pt.p = psi.p_mean();
            pt.z2 = psi.z2_mean();
            const auto b = psi.bloch();
            pt.sx = b[0];
            pt.sy = b[1];
            pt.sz = b[2];
            pt.tail = psi.tail_occupation();
            pt.steps = static_cast<long long>(stats.n_steps);
            sum.series.push_back(pt);
            sum.max_weight_drift = std::max(sum.max_weight_drift, std::abs(pt.weight - 1.0));
            sum.stats = stats;

            put_num(series.f, pt.tau);
            for (double v : {pt.weight, pt.z, pt.p, pt.z2, pt.sx, pt.sy, pt.sz, pt.tail}) {
                std::fputc(',', series.f);
                put_num(series.f, v);
            }
            std::fprintf(series.f, ",%lld\n", pt.steps);

            if (analysis_i < analysis_times.size() && tau >= analysis_times[analysis_i] - 1e-9) {
                analysis.snapshot(tau, psi);
                ++analysis_i;
            }
            if (dump_i < dump_times.size() && tau >= dump_times[dump_i] - 1e-9) {
                const fs::path p = out_dir / snapshot_name(dump_i, ".spcs");
                save_spinor(p, tau, psi);
                sum.files.push_back(p);
                ++dump_i;
            }
        };
        evolve(psi0, sc.params, sc.schedule, opt, obs);
    } else {
        std::fputs(
            "tau,trace,purity,herm_defect,z_mean,p_mean,z2_mean,n_mean,"
            "spin_x,spin_y,spin_z,tail,steps\n",
            series.f);
        MasterEvolveOptions opt;
        opt.tau_begin = 0.0;
        opt.tau_end = sc.tau_end;
        opt.snapshot_cadence = sc.cadence;
        opt.integrator = sc.integrator;
        opt.truncation_threshold = sc.truncation_threshold;
        opt.max_trace_drift = sc.max_trace_drift;
        opt.memory_budget_mb = sc.memory_budget_mb;

        DensityObserver obs = [&](double tau, const DensityState& rho, const StepStats& stats) {
            TrajectoryPoint pt;
            pt.tau = tau;
            pt.weight = rho.trace();
            pt.purity = rho.purity();
            pt.herm_defect = rho.herm_defect();
            pt.z = rho.z_mean();
            pt.p = rho.p_mean();
            pt.z2 = rho.z2_mean();
            pt.n_occ = rho.n_mean();
            const auto b = rho.bloch();
            pt.sx = b[0];
            pt.sy = b[1];
            pt.sz = b[2];
            pt.tail = rho.tail_occupation();
            pt.steps = static_cast<long long>(stats.n_steps);
            sum.series.push_back(pt);
            sum.max_weight_drift = std::max(sum.max_weight_drift, std::abs(pt.weight - 1.0));
            sum.stats = stats;

            put_num(series.f, pt.tau);
            for (double v : {pt.weight, pt.purity, pt.herm_defect, pt.z, pt.p, pt.z2, pt.n_occ,
                             pt.sx, pt.sy, pt.sz, pt.tail}) {
                std::fputc(',', series.f);
                put_num(series.f, v);
            }
            std::fprintf(series.f, ",%lld\n", pt.steps);

            if (analysis_i < analysis_times.size() && tau >= analysis_times[analysis_i] - 1e-9) {
                analysis.snapshot(tau, rho);
                if (cat_tracking) analysis.track_branches(tau, rho);
                ++analysis_i;
            }
            if (dump_i < dump_times.size() && tau >= dump_times[dump_i] - 1e-9) {
                const fs::path p = out_dir / snapshot_name(dump_i, ".spcd");
                save_density(p, tau, rho);
                sum.files.push_back(p);
                ++dump_i;
            }
        };
        evolve_density(initial_density(psi0), sc.params, sc.schedule, opt, obs);
    }
    series.close_checked();

    const fs::path analysis_path = out_dir / "analysis.csv";
    write_analysis_csv(analysis_path, analysis.rows);
    sum.analysis = std::move(analysis.rows);
    sum.files.push_back(analysis_path);

    if (cat_tracking) {
        const fs::path decay_csv = out_dir / "decay.csv";
        {
            OutFile out(decay_csv);
            std::fputs("tau,branch_coherence,overlap,effective_tau,corrected_coherence\n", out.f);
            for (const auto& s : analysis.branch_samples) {
                put_num(out.f, s.tau);
                std::fputc(',', out.f);
                put_num(out.f, s.gamma);
                std::fputc(',', out.f);
                put_num(out.f, s.overlap);
                std::fputc(',', out.f);
                put_num(out.f, s.teff);
                std::fputc(',', out.f);
                put_num(out.f, s.corrected);
                std::fputc('\n', out.f);
            }
            out.close_checked();
        }
        sum.files.push_back(decay_csv);

        sum.branch_fit = analysis.branch_tracker.fit();
        sum.has_branch_fit = true;
        sum.branch_separation = sc.branch_separation();
        sum.predicted_branch_rate = predicted_decoherence_rate(sc.params, sum.branch_separation);

        const fs::path decay_txt = out_dir / "decay.txt";
        {
            OutFile out(decay_txt);
            std::fprintf(out.f, "separation = %.12e\n", sum.branch_separation);
            std::fprintf(out.f, "predicted_rate = %.12e\n", sum.predicted_branch_rate);
            std::fprintf(out.f, "fitted_rate = %.12e\n", sum.branch_fit.rate);
            std::fprintf(out.f, "rate_ratio = %.12e\n",
                         sum.branch_fit.rate / sum.predicted_branch_rate);
            std::fprintf(out.f, "r2 = %.12e\n", sum.branch_fit.r2);
            std::fprintf(out.f, "n_samples = %d\n", sum.branch_fit.n_used);
            out.close_checked();
        }
        sum.files.push_back(decay_txt);
    }

    sum.files.push_back(write_manifest(out_dir));
    return sum;
}

namespace {

void write_density_csv(const fs::path& path, const PositionField& field) {
    OutFile out(path);
    std::fputs("z,P\n", out.f);
    for (int i = 0; i < field.grid.m; ++i) {
        put_num(out.f, field.grid.point(i));
        std::fputc(',', out.f);
        put_num(out.f, field.values[static_cast<std::size_t>(i)]);
        std::fputc('\n', out.f);
    }
    out.close_checked();
}

// Boundary cells of the superlevel sets of log10 |rho(z, z')| at the fixed
// export levels; matches the figure color-bin thresholds.
void write_contours(const fs::path& path, const std::vector<cdouble>& matrix, const Grid& grid) {
    const auto m = static_cast<std::size_t>(grid.m);
    std::vector<double> la(m * m);
    for (std::size_t k = 0; k < la.size(); ++k)
        la[k] = std::log10(std::max(std::abs(matrix[k]), 1e-300));

    OutFile out(path);
    std::fputs("z,zprime,log10_abs\n", out.f);
    for (double level : {-16.0, -12.0, -8.0, -4.0}) {
        std::fprintf(out.f, "# level=%g\n", level);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (la[i * m + j] < level) continue;
                const bool edge =
                    i == 0 || j == 0 || i == m - 1 || j == m - 1 ||
                    la[(i - 1) * m + j] < level || la[(i + 1) * m + j] < level ||
                    la[i * m + j - 1] < level || la[i * m + j + 1] < level;
                if (!edge) continue;
                put_num(out.f, grid.point(static_cast<int>(i)));
                std::fputc(',', out.f);
                put_num(out.f, grid.point(static_cast<int>(j)));
                std::fputc(',', out.f);
                put_num(out.f, la[i * m + j]);
                std::fputc('\n', out.f);
            }
    }
    out.close_checked();
}

void write_peak_record(std::FILE* f, int index, const PeakInterval& peak) {
    std::fprintf(f, "peak.%d.weight = %.12e\n", index, peak.weight);
    std::fprintf(f, "peak.%d.centroid = %.12e\n", index, peak.centroid);
    std::fprintf(f, "peak.%d.z_lo = %.12e\n", index, peak.z_lo);
    std::fprintf(f, "peak.%d.z_hi = %.12e\n", index, peak.z_hi);
    std::fprintf(f, "peak.%d.height = %.12e\n", index, peak.height);
}

void write_spin_record(std::FILE* f, int index, const SpinSummary& s) {
    std::fprintf(f, "peak.%d.purity = %.12e\n", index, s.purity);
    std::fprintf(f, "peak.%d.bloch_x = %.12e\n", index, s.bloch[0]);
    std::fprintf(f, "peak.%d.bloch_y = %.12e\n", index, s.bloch[1]);
    std::fprintf(f, "peak.%d.bloch_z = %.12e\n", index, s.bloch[2]);
    std::fprintf(f, "peak.%d.alignment = %.12e\n", index, s.alignment_angle);
    std::fprintf(f, "peak.%d.factorization_residual = %.12e\n", index, s.factorization_residual);
}

}

AnalyzeSummary analyze_snapshots(const Scenario& sc, const fs::path& dir) {
    std::vector<fs::path> snaps;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".spcs" || ext == ".spcd") snaps.push_back(entry.path());
    }
    if (snaps.empty())
        throw ValidationError("no state dumps (*.spcs / *.spcd) found in '" + dir.string() + "'");
    std::sort(snaps.begin(), snaps.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    const Grid grid = sc.make_grid();
    AnalyzeSummary sum;

    const fs::path summary_path = dir / "analysis_summary.txt";
    OutFile summary(summary_path);

    for (const auto& snap_path : snaps) {
        const std::string stem = snap_path.stem().string();
        const bool closed = snap_path.extension() == ".spcs";

        double tau = 0.0;
        PositionField field;
        std::vector<cdouble> traced;
        SpinorSnapshot spinor;
        DensitySnapshot density;
        if (closed) {
            spinor = load_spinor(snap_path);
            tau = spinor.tau;
            const auto comps = wavefunctions(spinor.psi, grid);
            const auto m = static_cast<std::size_t>(grid.m);
            field.grid = grid;
            field.tau = tau;
            field.values.resize(m);
            traced.resize(m * m);
            for (std::size_t i = 0; i < m; ++i) {
                field.values[i] = std::norm(comps[0][i]) + std::norm(comps[1][i]);
                for (std::size_t j = 0; j < m; ++j)
                    traced[i * m + j] = comps[0][i] * std::conj(comps[0][j]) +
                                        comps[1][i] * std::conj(comps[1][j]);
            }
        } else {
            density = load_density(snap_path);
            tau = density.tau;
            field = position_density(density.rho, grid);
            field.tau = tau;
            traced = spin_traced_matrix(density.rho, grid);
        }
        check_boundary_mass(field);
        const PeakReport report = detect_peaks(field);

        const fs::path density_path = dir / ("density_" + stem.substr(6) + ".csv");
        write_density_csv(density_path, field);
        sum.files.push_back(density_path);

        const fs::path contour_path = dir / ("contours_" + stem.substr(6) + ".csv");
        write_contours(contour_path, traced, grid);
        sum.files.push_back(contour_path);

        const fs::path peaks_path = dir / ("peaks_" + stem.substr(6) + ".txt");
        {
            OutFile out(peaks_path);
            std::fprintf(out.f, "tau = %.12e\n", tau);
            std::fprintf(out.f, "n_peaks = %d\n", static_cast<int>(report.peaks.size()));
            std::fprintf(out.f, "separated = %d\n", report.separated ? 1 : 0);
            std::fprintf(out.f, "total_weight = %.12e\n", report.total_weight);
            std::fprintf(out.f, "valley = %.12e\n", report.valley);
            const auto axis = effective_field(sc.params, sc.schedule, tau);
            for (std::size_t k = 0; k < report.peaks.size(); ++k) {
                const int idx = static_cast<int>(k);
                write_peak_record(out.f, idx, report.peaks[k]);
                if (report.peaks[k].weight <= 1e-10) continue;
                const std::array<double, 3> ref =
                    k == 0 ? axis : std::array<double, 3>{-axis[0], -axis[1], -axis[2]};
                const SpinSummary s = closed
                                          ? peak_spin_state(spinor.psi, grid, report.peaks[k], ref)
                                          : peak_spin_state(density.rho, grid, report.peaks[k], ref);
                write_spin_record(out.f, idx, s);
            }
            out.close_checked();
        }
        sum.files.push_back(peaks_path);

        std::fprintf(summary.f, "%s tau=%.6f n_peaks=%d separated=%d\n",
                     snap_path.filename().string().c_str(), tau,
                     static_cast<int>(report.peaks.size()), report.separated ? 1 : 0);
        ++sum.n_snapshots;
    }
    summary.close_checked();
    sum.files.push_back(summary_path);
    write_manifest(dir);
    return sum;
}

EquivalenceReport run_equivalence(const Scenario& sc, const fs::path& out_dir, double tolerance) {
    sc.validate();
    if (sc.params.beta != 0.0 || sc.params.big_d != 0.0)
        throw ValidationError("the closed/open equivalence check requires beta = 0 and D = 0");
    fs::create_directories(out_dir);

    const SpinorState psi0 = sc.initial_state();

    // Closed reference pass, states collected at the analysis cadence.
    std::vector<SpinorState> snaps;
    std::vector<double> taus;
    {
        EvolveOptions opt;
        opt.tau_end = sc.tau_end;
        opt.snapshot_cadence = sc.analysis_cadence;
        opt.integrator = sc.integrator;
        opt.use_rotating_basis = sc.rotating_basis;
        opt.truncation_threshold = sc.truncation_threshold;
        opt.max_norm_drift = sc.max_norm_drift;
        evolve(psi0, sc.params, sc.schedule, opt,
               [&](double tau, const SpinorState& psi, const StepStats&) {
                   snaps.push_back(psi);
                   taus.push_back(tau);
               });
    }

    EquivalenceReport rep;
    rep.tolerance = tolerance;
    std::size_t idx = 0;
    {
        MasterEvolveOptions opt;
        opt.tau_end = sc.tau_end;
        opt.snapshot_cadence = sc.analysis_cadence;
        opt.integrator = sc.integrator;
        opt.truncation_threshold = sc.truncation_threshold;
        opt.max_trace_drift = sc.max_trace_drift;
        opt.memory_budget_mb = sc.memory_budget_mb;
        evolve_density(initial_density(psi0), sc.params, sc.schedule, opt,
                       [&](double tau, const DensityState& rho, const StepStats&) {
                           if (idx >= snaps.size() || std::abs(tau - taus[idx]) > 1e-9)
                               throw IntegratorError(
                                   "closed and open snapshot times diverged in the equivalence check");
                           const SpinorState& psi = snaps[idx];
                           const int n = sc.params.n_basis;
                           for (int s = 0; s < 2; ++s)
                               for (int sp = 0; sp < 2; ++sp) {
                                   const auto& a = s == 0 ? psi.up : psi.down;
                                   const auto& b = sp == 0 ? psi.up : psi.down;
                                   const cdouble* blk = rho.block(s, sp);
                                   for (int k = 0; k < n; ++k)
                                       for (int l = 0; l < n; ++l) {
                                           const double d = std::abs(
                                               blk[static_cast<std::size_t>(k) * n + l] -
                                               a[static_cast<std::size_t>(k)] *
                                                   std::conj(b[static_cast<std::size_t>(l)]));
                                           rep.max_diff = std::max(rep.max_diff, d);
                                       }
                               }
                           ++idx;
                           ++rep.n_points;
                       });
    }
    rep.pass = rep.max_diff <= tolerance;

    OutFile out(out_dir / "equivalence.txt");
    std::fprintf(out.f, "scenario = %s\n", sc.name.c_str());
    std::fprintf(out.f, "snapshots_compared = %d\n", rep.n_points);
    std::fprintf(out.f, "max_elementwise_diff = %.12e\n", rep.max_diff);
    std::fprintf(out.f, "tolerance = %.12e\n", rep.tolerance);
    std::fprintf(out.f, "result = %s\n", rep.pass ? "PASS" : "FAIL");
    out.close_checked();
    return rep;
}

namespace {

struct FinalMetrics {
    double drift = 0.0;
    std::array<double, 6> obs{}; // z, p, z2, sx, sy, sz at tau_end
};

FinalMetrics run_final_metrics(Scenario sc, int n_basis) {
    sc.params.n_basis = n_basis;
    sc.validate();
    FinalMetrics fm;
    if (sc.mode == RunMode::closed) {
        EvolveOptions opt;
        opt.tau_end = sc.tau_end;
        opt.snapshot_cadence = sc.cadence;
        opt.integrator = sc.integrator;
        opt.use_rotating_basis = sc.rotating_basis;
        opt.truncation_threshold = sc.truncation_threshold;
        opt.max_norm_drift = sc.max_norm_drift;
        const SpinorState psi =
            evolve(sc.initial_state(), sc.params, sc.schedule, opt,
                   [&](double, const SpinorState& s, const StepStats&) {
                       fm.drift = std::max(fm.drift, std::abs(std::sqrt(s.norm2()) - 1.0));
                   });
        const auto b = psi.bloch();
        fm.obs = {psi.z_mean(), psi.p_mean(), psi.z2_mean(), b[0], b[1], b[2]};
    } else {
        MasterEvolveOptions opt;
        opt.tau_end = sc.tau_end;
        opt.snapshot_cadence = sc.cadence;
        opt.integrator = sc.integrator;
        opt.truncation_threshold = sc.truncation_threshold;
        opt.max_trace_drift = sc.max_trace_drift;
        opt.memory_budget_mb = sc.memory_budget_mb;
        const DensityState rho =
            evolve_density(initial_density(sc.initial_state()), sc.params, sc.schedule, opt,
                           [&](double, const DensityState& r, const StepStats&) {
                               fm.drift = std::max(fm.drift, std::abs(r.trace() - 1.0));
                           });
        const auto b = rho.bloch();
        fm.obs = {rho.z_mean(), rho.p_mean(), rho.z2_mean(), b[0], b[1], b[2]};
    }
    return fm;
}

}

ConvergenceReport run_convergence(const Scenario& sc, std::vector<int> basis,
                                  const fs::path& out_dir, int threads) {
    std::sort(basis.begin(), basis.end());
    basis.erase(std::unique(basis.begin(), basis.end()), basis.end());
    if (basis.size() < 2)
        throw ValidationError("convergence sweep needs at least two distinct basis sizes");
    for (int n : basis)
        if (n < 1) throw ValidationError("basis sizes must be positive");
    fs::create_directories(out_dir);

    std::vector<FinalMetrics> results(basis.size());
    {
        const int n_workers =
            threads > 0 ? std::min<std::size_t>(threads, basis.size()) : worker_count(basis.size());
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::atomic<bool> failed{false};
        auto work = [&] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= basis.size() || failed.load()) return;
                try {
                    results[k] = run_final_metrics(sc, basis[k]);
                } catch (...) {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                    return;
                }
            }
        };
        if (n_workers <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        if (failed.load()) std::rethrow_exception(first_error);
    }

    ConvergenceReport rep;
    rep.basis = basis;
    const auto& ref = results.back().obs;
    for (std::size_t k = 0; k + 1 < basis.size(); ++k) {
        double dev = 0.0;
        for (std::size_t j = 0; j < ref.size(); ++j)
            dev = std::max(dev, std::abs(results[k].obs[j] - ref[j]));
        rep.deviation.push_back(dev);
    }
    rep.pass = rep.deviation.back() <= 1e-6;
    for (std::size_t k = 0; k + 1 < rep.deviation.size(); ++k)
        if (rep.deviation[k + 1] > std::max(rep.deviation[k], 1e-8)) rep.pass = false;

    OutFile out(out_dir / "convergence.txt");
    std::fprintf(out.f, "scenario = %s\n", sc.name.c_str());
    for (std::size_t k = 0; k < basis.size(); ++k) {
        std::fprintf(out.f, "basis.%zu = %d\n", k, basis[k]);
        std::fprintf(out.f,
                     "final.%zu = z %.12e p %.12e z2 %.12e sx %.12e sy %.12e sz %.12e drift %.3e\n",
                     k, results[k].obs[0], results[k].obs[1], results[k].obs[2], results[k].obs[3],
                     results[k].obs[4], results[k].obs[5], results[k].drift);
    }
    for (std::size_t k = 0; k < rep.deviation.size(); ++k)
        std::fprintf(out.f, "deviation.%zu = %.12e\n", k, rep.deviation[k]);
    std::fprintf(out.f, "result = %s\n", rep.pass ? "PASS" : "FAIL");
    out.close_checked();
    return rep;
}

AdiabaticityReport run_adiabatic(const Scenario& sc, const fs::path& out_dir) {
    sc.validate();
    fs::create_directories(out_dir);
    const double z_extent = std::numbers::sqrt2 * std::abs(sc.alpha);
    const AdiabaticityReport rep =
        adiabaticity_check(sc.params, sc.schedule, z_extent, sc.tau_end);

    OutFile out(out_dir / "adiabatic.txt");
    std::fprintf(out.f, "scenario = %s\n", sc.name.c_str());
    std::fprintf(out.f, "z_extent = %.12e\n", z_extent);
    std::fprintf(out.f, "accel_ratio = %.12e\n", rep.accel_ratio);
    std::fprintf(out.f, "coupling_ratio = %.12e\n", rep.coupling_ratio);
    std::fprintf(out.f, "threshold = %.12e\n", rep.threshold);
    std::fprintf(out.f, "result = %s\n", rep.pass ? "PASS" : "FAIL");
    out.close_checked();
    return rep;
}

int worker_count(std::size_t jobs) {
    if (jobs <= 1) return 1;
    long cap = 0;
    if (const char* env = std::getenv("SPINCANT_THREADS")) {
        char* end = nullptr;
        cap = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || cap < 1)
            throw ValidationError("SPINCANT_THREADS must be a positive integer");
    } else {
        cap = static_cast<long>(std::thread::hardware_concurrency());
        if (cap < 1) cap = 1;
    }
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cap), jobs));
}

}
