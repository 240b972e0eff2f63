#include "doctest.h"

#include <cmath>

#include "spincant/config.hpp"
#include "spincant/errors.hpp"
#include "spincant/scenario.hpp"

using namespace spincant;

namespace {

const char* minimal_cfg =
    "name = tiny\n"
    "mode = closed\n"
    "eta = 0.3\n"
    "epsilon = 400\n"
    "n_basis = 32\n"
    "alpha_re = -1.5\n"
    "schedule = standard\n"
    "tau_end = 2\n";

}

TEST_CASE("key = value parsing strips comments and whitespace") {
    const auto cfg = KeyValueConfig::from_string(
        "# full-line comment\n"
        "  a = 1.5   # trailing comment\n"
        "\n"
        "b=  text with spaces  \n"
        "flag = true\n");
    CHECK(cfg.get_double("a") == 1.5);
    CHECK(cfg.get_string("b") == "text with spaces");
    CHECK(cfg.get_bool("flag"));
    CHECK(cfg.has("a"));
    CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("typed getters validate their input") {
    const auto cfg = KeyValueConfig::from_string("x = notanumber\nn = 2.5\n");
    CHECK_THROWS_AS(cfg.get_double("x"), ValidationError);
    CHECK_THROWS_AS(cfg.get_int("n"), ValidationError);    // not integral
    CHECK_THROWS_AS(cfg.get_double("absent"), ValidationError);
    CHECK(cfg.get_double("absent", 7.0) == 7.0);           // fallback form
}

TEST_CASE("duplicate keys are rejected") {
    CHECK_THROWS_AS(KeyValueConfig::from_string("a = 1\na = 2\n"), ValidationError);
}

TEST_CASE("unconsumed keys are visible so scenarios can reject typos") {
    const auto cfg = KeyValueConfig::from_string("a = 1\nmystery = 2\n");
    (void)cfg.get_double("a");
    CHECK(cfg.unconsumed() == std::vector<std::string>{"mystery"});
}

TEST_CASE("a minimal scenario picks documented defaults") {
    const Scenario sc = Scenario::from_config(KeyValueConfig::from_string(minimal_cfg));
    CHECK(sc.name == "tiny");
    CHECK(sc.mode == RunMode::closed);
    CHECK(sc.params.eta == 0.3);
    CHECK(sc.params.epsilon == 400.0);
    CHECK(sc.params.beta == 0.0);
    CHECK(sc.params.big_d == 0.0);
    CHECK(sc.params.n_basis == 32);
    CHECK(sc.alpha == cdouble{-1.5, 0.0});
    CHECK(sc.initial == InitialKind::coherent);
    CHECK(sc.spin_theta == 0.0);
    CHECK(sc.tau_end == 2.0);
    CHECK(sc.cadence == 0.05);
    CHECK(sc.analysis_cadence == 0.25);
    CHECK(sc.snapshots == 5);
    CHECK(sc.grid_points == 1024);
    CHECK(sc.grid_half <= 0.0);   // auto-sized
    CHECK_FALSE(sc.rotating_basis);
    CHECK_NOTHROW(sc.validate());
}

TEST_CASE("unknown scenario keys raise a validation error naming the key") {
    std::string text = minimal_cfg;
    text += "tpyo_key = 3\n";
    try {
        (void)Scenario::from_config(KeyValueConfig::from_string(text));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("tpyo_key") != std::string::npos);
    }
}

TEST_CASE("scenario validation rejects inconsistent setups") {
    auto make = [](const std::string& extra) {
        std::string text = minimal_cfg;
        text += extra;
        return Scenario::from_config(KeyValueConfig::from_string(text));
    };
    // cat initial state needs a displaced real amplitude to have two branches
    CHECK_THROWS_AS(make("initial = cat\nalpha_im = 0.5\n"), ValidationError);
    CHECK_THROWS_AS(make("mode = sideways\n"), ValidationError);
    CHECK_THROWS_AS(make("initial = squeezed\n"), ValidationError);
    CHECK_THROWS_AS(make("method = euler\n"), ValidationError);

    Scenario sc = Scenario::from_config(KeyValueConfig::from_string(minimal_cfg));
    sc.tau_end = -1.0;
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    sc = Scenario::from_config(KeyValueConfig::from_string(minimal_cfg));
    sc.params.n_basis = 0;
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    sc = Scenario::from_config(KeyValueConfig::from_string(minimal_cfg));
    sc.params.beta = -0.1;
    CHECK_THROWS_AS(sc.validate(), ValidationError);
}

TEST_CASE("initial state respects the requested spin direction") {
    std::string text = minimal_cfg;
    text += "spin_theta = 1.5707963267948966\n"; // +x
    const Scenario sc = Scenario::from_config(KeyValueConfig::from_string(text));
    const SpinorState psi = sc.initial_state();
    const auto b = psi.bloch();
    CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(psi.norm2() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(psi.z_mean() == doctest::Approx(-1.5 * std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("cat initial state is an even two-branch superposition") {
    std::string text = minimal_cfg;
    text += "initial = cat\n";
    Scenario sc = Scenario::from_config(KeyValueConfig::from_string(text));
    const SpinorState psi = sc.initial_state();
    CHECK(psi.norm2() == doctest::Approx(1.0).epsilon(1e-12));
    // Even superposition of +-alpha has <z> = 0 but branch-sized spread.
    CHECK(psi.z_mean() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(psi.z2_mean() > 2.0);
    CHECK(sc.branch_separation() == doctest::Approx(2.0 * std::sqrt(2.0) * 1.5).epsilon(1e-12));
}

TEST_CASE("auto grid covers the initial energy with tail room") {
    const Scenario sc = Scenario::from_config(KeyValueConfig::from_string(minimal_cfg));
    const Grid g = sc.make_grid();
    CHECK(g.m == 1024);
    const double swing = std::sqrt(2.0 * (1.5 * 1.5 + 0.5));
    CHECK(g.hi >= swing + 7.9);
    CHECK(g.lo == -g.hi);
}
