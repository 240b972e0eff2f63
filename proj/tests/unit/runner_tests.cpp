#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "spincant/runner.hpp"
#include "spincant/scenario.hpp"

using namespace spincant;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    static std::mt19937_64 gen(20240817);
    const auto p = fs::temp_directory_path() / ("spincant_" + tag + "_" + std::to_string(gen()));
    fs::create_directories(p);
    return p;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Scenario micro_closed() {
    Scenario sc;
    sc.name = "micro";
    sc.mode = RunMode::closed;
    sc.params.eta = 0.3;
    sc.params.epsilon = 4.0;
    sc.params.beta = 0.0;
    sc.params.big_d = 0.0;
    sc.params.n_basis = 8;
    sc.schedule = PhaseSchedule::cai(-60.0, 30.0, 2.0, 10.0);
    sc.alpha = cdouble{0.4, 0.0};
    sc.tau_end = 0.5;
    sc.cadence = 0.1;
    sc.analysis_cadence = 0.25;
    sc.snapshots = 2;
    sc.grid_points = 64;
    sc.integrator.rtol = 1e-9;
    sc.integrator.atol = 1e-11;
    sc.validate();
    return sc;
}

}

TEST_CASE("crc32 reproduces the standard check value and chains incrementally") {
    const std::string check = "123456789";
    const auto* data = reinterpret_cast<const unsigned char*>(check.data());
    CHECK(crc32_ieee(data, check.size()) == 0xCBF43926u);
    CHECK(crc32_ieee(data, 0) == 0u);

    const auto partial = crc32_ieee(data, 5);
    CHECK(crc32_ieee(data + 5, 4, partial) == 0xCBF43926u);
}

TEST_CASE("snapshot files round-trip bit-exactly and reject foreign content") {
    const auto dir = fresh_dir("io");
    std::mt19937 gen(4242);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    SpinorState psi(12);
    for (int k = 0; k < 12; ++k) {
        psi.up[k] = cdouble{u(gen), u(gen)};
        psi.down[k] = cdouble{u(gen), u(gen)};
    }
    save_spinor(dir / "s.spcs", 3.75, psi);
    const auto s = load_spinor(dir / "s.spcs");
    CHECK(s.tau == 3.75);
    REQUIRE(s.psi.n_basis == 12);
    for (int k = 0; k < 12; ++k) {
        CHECK(s.psi.up[k] == psi.up[k]);
        CHECK(s.psi.down[k] == psi.down[k]);
    }

    DensityState rho(6);
    for (int b = 0; b < 4; ++b)
        for (int n = 0; n < 6; ++n)
            for (int m = 0; m < 6; ++m)
                rho.at(b / 2, b % 2, n, m) = cdouble{u(gen), u(gen)};
    save_density(dir / "r.spcd", 1.25, rho);
    const auto r = load_density(dir / "r.spcd");
    CHECK(r.tau == 1.25);
    REQUIRE(r.rho.n_basis == 6);
    CHECK(r.rho.a == rho.a);

    // wrong magic: a density file is not a spinor file, junk is neither
    CHECK_THROWS_AS(load_spinor(dir / "r.spcd"), IoError);
    write_bytes(dir / "junk.spcs", "not a snapshot at all");
    CHECK_THROWS_AS(load_spinor(dir / "junk.spcs"), IoError);
    CHECK_THROWS_AS(load_spinor(dir / "missing.spcs"), IoError);
    CHECK_THROWS_AS(save_spinor(dir / "no_such_subdir" / "x.spcs", 0.0, psi), IoError);

    fs::remove_all(dir);
}

TEST_CASE("manifests list every file with its checksum, sorted, excluding themselves") {
    const auto dir = fresh_dir("manifest");
    write_bytes(dir / "b.bin", std::string("\x01\x02\x03", 3));
    write_bytes(dir / "a.txt", "hello");

    const auto mpath = write_manifest(dir);
    CHECK(mpath.filename() == "manifest.txt");

    std::ifstream f(mpath);
    std::vector<std::string> lines;
    for (std::string line; std::getline(f, line);) lines.push_back(line);
    REQUIRE(lines.size() == 2);

    // sorted by name: a.txt before b.bin
    CHECK(lines[0].find("a.txt") != std::string::npos);
    CHECK(lines[1].find("b.bin") != std::string::npos);

    char hex[16];
    const auto* hello = reinterpret_cast<const unsigned char*>("hello");
    std::snprintf(hex, sizeof hex, "%08x", crc32_ieee(hello, 5));
    CHECK(lines[0].find(hex) != std::string::npos);
    CHECK(lines[0].find(" 5 ") != std::string::npos);
    CHECK(file_crc32(dir / "a.txt") == crc32_ieee(hello, 5));

    fs::remove_all(dir);
}

TEST_CASE("identical scenarios produce byte-identical artifacts") {
    const auto sc = micro_closed();
    const auto d1 = fresh_dir("det1");
    const auto d2 = fresh_dir("det2");
    const auto s1 = run_scenario(sc, d1);
    const auto s2 = run_scenario(sc, d2);

    CHECK(s1.max_weight_drift < 1e-9);
    CHECK(s1.series.size() == 6); // tau = 0.0 .. 0.5 at cadence 0.1
    CHECK(s1.analysis.size() == 3);
    CHECK(!s1.files.empty());

    for (const char* name : {"series.csv", "analysis.csv", "manifest.txt"}) {
        CAPTURE(name);
        CHECK(file_crc32(d1 / name) == file_crc32(d2 / name));
    }
    CHECK(file_crc32(d1 / "state_0000.spcs") == file_crc32(d2 / "state_0000.spcs"));
    CHECK(file_crc32(d1 / "state_0001.spcs") == file_crc32(d2 / "state_0001.spcs"));

    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("closed and open dynamics agree when friction and diffusion vanish") {
    const auto sc = micro_closed();
    const auto dir = fresh_dir("equiv");
    const auto report = run_equivalence(sc, dir);
    CHECK(report.pass);
    CHECK(report.max_diff < 1e-6);
    CHECK(report.n_points >= 2);

    auto frictional = sc;
    frictional.params.beta = 0.01;
    frictional.params.big_d = 1.0;
    CHECK_THROWS_AS(run_equivalence(frictional, fresh_dir("equiv_bad")), ValidationError);

    fs::remove_all(dir);
}

TEST_CASE("basis convergence sweeps compare everything against the largest size") {
    const auto sc = micro_closed();
    const auto dir = fresh_dir("conv");
    const auto report = run_convergence(sc, {8, 10, 12}, dir);
    REQUIRE(report.basis.size() == 3);
    REQUIRE(report.deviation.size() == 2);
    for (double d : report.deviation) {
        CHECK(d >= 0.0);
        CHECK(d < 1e-6); // this micro case is fully converged well below N = 8
    }
    CHECK(report.pass);

    CHECK_THROWS_AS(run_convergence(sc, {8}, dir), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("slow-sweep condition report reproduces the hand-computed ratios") {
    Scenario sc = micro_closed();
    sc.params.epsilon = 400.0;
    sc.schedule = PhaseSchedule::standard();
    sc.tau_end = 45.0;
    sc.grid_half = 20.0;
    const auto dir = fresh_dir("adiab");
    const auto report = run_adiabatic(sc, dir);
    CHECK(report.accel_ratio == doctest::Approx(1000.0 / (400.0 * 400.0)).epsilon(1e-12));
    // z extent is the coherent-state swing sqrt(2)|alpha|, not the grid half-width
    CHECK(report.coupling_ratio == doctest::Approx(2.0 * 0.3 * std::sqrt(2.0) * 0.4 / 400.0).epsilon(1e-12));
    CHECK(report.pass);
    fs::remove_all(dir);
}

TEST_CASE("worker counts respect the environment override") {
    const char* old = std::getenv("SPINCANT_THREADS");
    const std::string saved = old ? old : "";

    setenv("SPINCANT_THREADS", "3", 1);
    CHECK(worker_count(10) == 3);
    CHECK(worker_count(2) == 2); // never more workers than jobs

    setenv("SPINCANT_THREADS", "abc", 1);
    CHECK_THROWS_AS(worker_count(10), ValidationError);

    unsetenv("SPINCANT_THREADS");
    CHECK(worker_count(4) >= 1);

    if (old) setenv("SPINCANT_THREADS", saved.c_str(), 1);
}
