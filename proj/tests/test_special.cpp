#include <catch2/catch_amalgamated.hpp>

#include <stableflow/special.hpp>
#include <stableflow/stats.hpp>

#include "support/oracles.hpp"

#include <cmath>

using namespace stableflow;

TEST_CASE("radial constant closed form") {
    CHECK(special::radial_constant(1.0) == Catch::Approx(special::pi).epsilon(1e-12));
    CHECK(special::radial_constant(0.5) ==
          Catch::Approx(2.0 * std::sqrt(2.0 * special::pi)).epsilon(1e-10));
    for (double alpha : {0.3, 0.5, 0.8, 0.999999, 1.0, 1.000001, 1.2, 1.5, 1.9}) {
        CAPTURE(alpha);
        CHECK(special::radial_constant(alpha) ==
              Catch::Approx(oracle::radial_constant(alpha)).epsilon(1e-6));
    }
    CHECK_THROWS(special::radial_constant(0.0));
    CHECK_THROWS(special::radial_constant(2.0));
}

TEST_CASE("isotropic direction moment") {
    for (double alpha : {0.3, 0.7, 1.0, 1.5, 1.9})
        CHECK(special::isotropic_direction_moment(1, alpha) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(special::isotropic_direction_moment(2, 1.0) ==
          Catch::Approx(2.0 / special::pi).epsilon(1e-12));
    for (double alpha : {0.4, 1.1, 1.7}) {
        CAPTURE(alpha);
        CHECK(special::isotropic_direction_moment(2, alpha) ==
              Catch::Approx(oracle::circle_moment(alpha)).epsilon(1e-8));
        CHECK(special::isotropic_direction_moment(3, alpha) ==
              Catch::Approx(1.0 / (1.0 + alpha)).epsilon(1e-12));
    }
}

TEST_CASE("sphere surface") {
    CHECK(special::sphere_surface(1) == Catch::Approx(2.0));
    CHECK(special::sphere_surface(2) == Catch::Approx(2.0 * special::pi));
    CHECK(special::sphere_surface(3) == Catch::Approx(4.0 * special::pi));
}

TEST_CASE("regularized incomplete gamma") {
    for (double x : {0.1, 0.5, 1.0, 3.0, 10.0}) {
        CAPTURE(x);
        CHECK(special::gamma_q(1.0, x) == Catch::Approx(std::exp(-x)).epsilon(1e-12));
        CHECK(special::gamma_q(0.5, x) == Catch::Approx(std::erfc(std::sqrt(x))).epsilon(1e-10));
        double s = 0.0, term = 1.0;
        for (int j = 0; j < 4; ++j) {
            s += term;
            term *= x / (j + 1);
        }
        CHECK(special::gamma_q(4.0, x) == Catch::Approx(std::exp(-x) * s).epsilon(1e-10));
    }
    CHECK(special::gamma_q(2.5, 0.0) == 1.0);
}

TEST_CASE("chi squared survival function") {
    CHECK(special::chi2_sf(3.84146, 1) == Catch::Approx(0.05).margin(2e-4));
    for (double x : {30.0, 50.0, 70.0}) {
        double s = 0.0, term = 1.0;
        for (int j = 0; j < 25; ++j) {  // even dof: Erlang tail sum
            s += term;
            term *= 0.5 * x / (j + 1);
        }
        CHECK(special::chi2_sf(x, 50) == Catch::Approx(std::exp(-0.5 * x) * s).epsilon(1e-9));
    }
    CHECK(special::chi2_sf(0.0, 5) == 1.0);
}

TEST_CASE("kolmogorov distribution") {
    CHECK(special::kolmogorov_sf(1.35810) == Catch::Approx(0.05).margin(5e-4));
    CHECK(special::kolmogorov_sf(1.62762) == Catch::Approx(0.01).margin(2e-4));
    for (double p : {0.2, 0.05, 0.01}) {
        const double q = special::kolmogorov_quantile(p);
        CHECK(special::kolmogorov_sf(q) == Catch::Approx(p).margin(1e-6));
    }
}

TEST_CASE("line fits recover exact slopes") {
    std::vector<double> x, y;
    for (int i = 1; i <= 20; ++i) {
        x.push_back(i * 0.25);
        y.push_back(3.0 - 1.7 * (i * 0.25));
    }
    const auto f = stats::fit_line(x, y);
    CHECK(f.slope == Catch::Approx(-1.7).epsilon(1e-12));
    CHECK(f.intercept == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(f.max_residual < 1e-12);

    std::vector<double> px, py;
    for (int k = 1; k <= 8; ++k) {
        px.push_back(std::pow(2.0, -k));
        py.push_back(0.7 * std::pow(px.back(), 1.25));
    }
    const auto g = stats::fit_power_law(px, py);
    CHECK(g.slope == Catch::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("ks statistics behave on synthetic data") {
    std::vector<double> u(1000);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (i + 0.5) / 1000.0;
    const auto r = stats::ks_one_sample(u, [](double t) { return std::min(1.0, std::max(0.0, t)); });
    CHECK(r.statistic < 1e-3);
    CHECK(r.p_value > 0.99);

    std::vector<double> shifted(u);
    for (auto& v : shifted) v = std::min(1.0, v + 0.2);
    const auto two = stats::ks_two_sample(u, shifted);
    CHECK(two.statistic == Catch::Approx(0.2).margin(5e-3));
    CHECK(two.p_value < 1e-6);
}

TEST_CASE("chi square flags the wrong model and accepts the right one") {
    std::vector<double> expected(10, 100.0);
    std::vector<double> observed(10, 100.0);
    observed[0] = 90.0;
    observed[1] = 110.0;
    const auto ok = stats::chi2_gof(observed, expected);
    CHECK(ok.p_value > 0.5);
    observed.assign(10, 100.0);
    observed[0] = 10.0;
    observed[9] = 190.0;
    const auto bad = stats::chi2_gof(observed, expected);
    CHECK(bad.p_value < 1e-10);
}
