#include "catch_amalgamated.hpp"

#include <random>

#include "nhi/characteristic.hpp"
#include "nhi/observables.hpp"
#include "nhi/oracle.hpp"
#include "support.hpp"

using namespace nhi;

namespace {

int count_kind(const ThetaSolution& s, RootKind k) {
    return static_cast<int>(std::count_if(s.roots.begin(), s.roots.end(), [&](const ThetaRoot& r) { return r.kind == k; }));
}

} // namespace

TEST_CASE("theta to energy") {
    CHECK(std::abs(theta_to_energy(kPi / 2)) < 1e-15);
    const cplx t(2.0 * kPi / 14, 1.0);
    CHECK(std::abs(theta_to_energy(t) - 2.0 * std::cos(t)) < 1e-15);
    CHECK(theta_to_energy(t) == theta_to_energy(-t));
}

TEST_CASE("polynomial is self-reciprocal and carries the PBC roots") {
    for (double v : {0.0, 2.5, -1.0}) {
        const auto c = characteristic_polynomial(HNParams{7, 1.0, 0.6, v});
        REQUIRE(c.size() == 15);
        for (int j = 0; j <= 14; ++j)
            CHECK(c[j] == c[14 - j]);
    }
    const HNParams p{9, 1.0, 0.4, 0.0};
    const auto c = characteristic_polynomial(p);
    for (int k = 1; k < 9; ++k) {
        const cplx beta = std::exp(cplx(0.0, 1.0) * cplx(2.0 * kPi * k / 9, 0.4));
        CHECK(std::abs(poly::horner(c, beta).value) < 1e-10);
        CHECK(std::abs(poly::horner(c, 1.0 / beta).value) < 1e-9);
    }
}

TEST_CASE("two-site ring reproduces the closed-form pair") {
    // The 2x2 matrix [[1, 2], [2, 0]] has eigenvalues (1 +- sqrt 17) / 2.
    const auto sol = solve_hn(HNParams{2, 1.0, 0.0, 1.0});
    const std::vector<cplx> expected{(1.0 + std::sqrt(17.0)) / 2.0, (1.0 - std::sqrt(17.0)) / 2.0};
    CHECK(match_spectra(test::energies(sol.modes), expected).maxDistance < 1e-12);
}

TEST_CASE("PBC limit: every root has Im theta = g") {
    const auto sol = solve_thetas(HNParams{14, 1.0, 1.0, 0.0});
    REQUIRE(sol.roots.size() == 14);
    for (const auto& r : sol.roots) {
        CHECK(std::abs(r.theta.imag() - 1.0) < 1e-10);
        CHECK(r.kind == RootKind::Bulk);
    }
    const auto modes = solve_hn(HNParams{14, 1.0, 1.0, 0.0}).modes;
    CHECK(match_spectra(test::energies(modes), test::pbc_ellipse(14, 1.0)).maxDistance < 1e-10);
}

TEST_CASE("PBC roots are exact zeros of the secular function") {
    const HNParams p{10, 1.0, 0.7, 0.0};
    for (int k = 1; k < 10; ++k)
        CHECK(secular_residual(p, cplx(2.0 * kPi * k / 10, 0.7)) < 1e-14);
}

TEST_CASE("secular value cross-checked against direct arithmetic") {
    const HNParams p{6, 1.0, 1.0, 5.0};
    const cplx t = kPi / 2;
    const cplx direct = std::sin(t) * (2.0 * std::cos(6.0 * t) - 2.0 * std::cosh(6.0)) - 5.0 * std::sin(6.0 * t);
    const cplx ours = evaluate_secular(p, t);
    CHECK(std::abs(ours - direct) <= 1e-13 * std::abs(direct));
    CHECK(std::abs(ours) > 1.0);
    const cplx z(0.4, -0.3);
    const cplx d2 = std::sin(z) * (2.0 * std::cos(6.0 * z) - 2.0 * std::cosh(6.0)) - 5.0 * std::sin(6.0 * z);
    CHECK(std::abs(evaluate_secular(p, z) - d2) <= 1e-13 * std::abs(d2));
}

TEST_CASE("strong impurity: N-1 real roots and one bound root") {
    const auto sol = solve_thetas(HNParams{14, 1.0, 1.0, 2e6});
    REQUIRE(sol.roots.size() == 14);
    CHECK(count_kind(sol, RootKind::Bound) == 1);
    int real = 0;
    for (const auto& r : sol.roots) {
        if (r.kind == RootKind::Bound)
            CHECK(r.theta.real() == 0.0);
        else if (std::abs(r.theta.imag()) < real_tolerance(1.0))
            ++real;
    }
    CHECK(real == 13);
    CHECK(sol.warnings.empty());
}

TEST_CASE("negative impurity puts the bound root on Re theta = pi") {
    const auto sol = solve_thetas(HNParams{8, 1.0, 0.5, -30.0});
    REQUIRE(count_kind(sol, RootKind::Bound) == 1);
    for (const auto& r : sol.roots)
        if (r.kind == RootKind::Bound)
            CHECK(std::abs(std::abs(r.theta.real()) - kPi) < 1e-12);
}

TEST_CASE("complex impurity has no bound classification") {
    const auto sol = solve_thetas(HNParams{6, 1.0, 0.5, cplx(3.0, 1.0)});
    CHECK(count_kind(sol, RootKind::Bound) == 0);
    CHECK(sol.roots.size() == 6);
    const auto modes = solve_hn(HNParams{6, 1.0, 0.5, cplx(3.0, 1.0)}).modes;
    const auto oracle = test::oracle_values(HNParams{6, 1.0, 0.5, cplx(3.0, 1.0)});
    CHECK(match_spectra(test::energies(modes), oracle).maxDistance < 1e-9);
}

TEST_CASE("eigenpairs agree with the dense oracle") {
    const HNParams p{6, 1.0, 0.5, 10.0};
    const auto sol = solve_hn(p);
    const auto dec = dense_eigensolve(build_hn_matrix(p), true);
    const auto match = match_spectra(test::energies(sol.modes), to_std(dec.values));
    CHECK(match.maxDistance < 1e-8);
    for (std::size_t i = 0; i < sol.modes.size(); ++i) {
        const CVector b = dec.vectors->col(match.pairing[i]);
        CHECK(std::abs(sol.modes[i].amplitudes.dot(b)) > 1.0 - 1e-6);
        CHECK(sol.modes[i].matrixResidual <= 1e-8);
    }
}

TEST_CASE("PBC eigenstates are uniform plane waves") {
    for (const auto& m : solve_hn(HNParams{12, 1.0, 0.8, 0.0}).modes) {
        const double first = std::abs(m.amplitudes(0));
        CHECK(std::abs(first - 1.0 / std::sqrt(12.0)) < 1e-12);
        for (Eigen::Index n = 1; n < 12; ++n)
            CHECK(std::abs(std::abs(m.amplitudes(n)) - first) < 1e-12);
    }
}

TEST_CASE("skin states grow like e^{g n} past the transition") {
    // psi_n = e^{g n} phi_n with phi a bounded standing wave: phi obeys the
    // Hermitian bulk recurrence with a real energy.
    const double g = 1.0;
    const int N = 14;
    const auto modes = solve_hn(HNParams{N, 1.0, g, 2.0 * critical_v0_hn(N, g)}).modes;
    for (const auto& m : modes) {
        if (m.root.kind == RootKind::Bound)
            continue;
        REQUIRE(std::abs(m.energy.imag()) < 1e-8);
        CVector phi(N);
        for (int n = 0; n < N; ++n)
            phi(n) = std::exp(-g * n) * m.amplitudes(n);
        const double scale = phi.cwiseAbs().maxCoeff();
        for (int n = 2; n < N - 1; ++n)
            CHECK(std::abs(phi(n + 1) + phi(n - 1) - m.energy * phi(n)) <= 1e-10 * scale);
        // A seven-point log fit sees the standing-wave ripple on top of g.
        CHECK(std::abs(fitted_log_slope(m.amplitudes) - g) < 0.2);
    }
}

TEST_CASE("non-physical roots are refused") {
    ThetaRoot r;
    r.theta = 0.0;
    r.kind = RootKind::Nonphysical;
    CHECK_THROWS_AS(reconstruct_eigenstate(HNParams{4, 1.0, 0.2, 1.0}, r), Error);
}

TEST_CASE("property: root count, exactness, trace and conjugation over a parameter grid") {
    for (int N : {2, 3, 5, 8, 13, 20})
        for (double g : {0.0, 0.3, 1.0, 1.5})
            for (double scale : {0.0, 0.01, 0.5, 1.0, 3.0, 10.0}) {
                const double v = g == 0.0 ? 4.0 * scale : scale * critical_v0_hn(N, g);
                const HNParams p{N, 1.0, g, v};
                INFO("N=" << N << " g=" << g << " V0=" << v);
                const auto sol = solve_hn(p);
                REQUIRE(sol.modes.size() == static_cast<std::size_t>(N));
                const auto e = test::energies(sol.modes);
                const auto oracle = test::oracle_values(p);
                const double size = std::max(1.0, v);
                CHECK(match_spectra(e, oracle).maxDistance < 1e-7 * size);
                cplx sum = 0.0;
                for (auto z : e)
                    sum += z;
                CHECK(std::abs(sum - v) <= 1e-6 * size);
                CHECK(match_spectra(e, test::conjugated(e)).maxDistance <= 1e-9 * size);
            }
}

TEST_CASE("property: beta and 1/beta are both polynomial roots") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> gd(-1.2, 1.2), vd(-50.0, 50.0);
    for (int trial = 0; trial < 20; ++trial) {
        const HNParams p{3 + trial % 9, 1.0, gd(rng), vd(rng)};
        const auto c = characteristic_polynomial(p);
        double scale = 0.0;
        for (auto x : c)
            scale = std::max(scale, std::abs(x));
        for (const auto& r : solve_thetas(p).roots) {
            for (cplx beta : {r.beta, 1.0 / r.beta}) {
                // Relative to the sum of term magnitudes at beta.
                double mag = 0.0;
                cplx pw = 1.0;
                for (auto x : c) {
                    mag += std::abs(x * pw);
                    pw *= beta;
                }
                CHECK(std::abs(poly::horner(c, beta).value) <= 1e-9 * mag);
            }
        }
    }
}

TEST_CASE("property: roots polish to the secular residual floor for N up to 40") {
    for (int N : {25, 40})
        for (double g : {0.5, 1.5})
            for (double scale : {0.1, 1.0, 10.0}) {
                const HNParams p{N, 1.0, g, scale * critical_v0_hn(N, g)};
                INFO("N=" << N << " g=" << g << " scale=" << scale);
                const auto sol = solve_thetas(p);
                CHECK(sol.roots.size() == static_cast<std::size_t>(N));
                for (const auto& r : sol.roots)
                    CHECK(r.residual <= 1e-8);
                CHECK(count_kind(sol, RootKind::Bound) == 1);
            }
}

TEST_CASE("large N g takes the Newton-polygon route") {
    const auto sol = solve_thetas(HNParams{40, 1.0, 1.0, 1e3});
    CHECK(sol.method == RootMethod::NewtonPolygon);
    CHECK(sol.roots.size() == 40);
}

TEST_CASE("bracketed real roots") {
    CHECK(real_theta_bracketed_solve(HNParams{14, 1.0, 1.0, 1.01 * critical_v0_hn(14, 1.0)}).size() == 13);
    CHECK(real_theta_bracketed_solve(HNParams{14, 1.0, 1.0, 100.0}).size() < 13);
    for (int N : {3, 6, 11})
        CHECK(real_theta_bracketed_solve(HNParams{N, 1.0, 0.0, 2.5}).size() == static_cast<std::size_t>(N - 1));
    // Each bracketed root is a root of the secular function.
    const HNParams p{9, 1.0, 0.4, 20.0};
    for (double t : real_theta_bracketed_solve(p))
        CHECK(secular_residual(p, t) < 1e-10);
}

TEST_CASE("bracketed roots agree with the polynomial route") {
    const HNParams p{10, 1.0, 0.3, 1.5 * critical_v0_hn(10, 0.3)};
    const auto bracketed = real_theta_bracketed_solve(p);
    std::vector<double> viaPoly;
    for (const auto& r : solve_thetas(p).roots)
        if (r.kind == RootKind::Bulk && std::abs(r.theta.imag()) < real_tolerance(p.g))
            viaPoly.push_back(r.theta.real());
    std::sort(viaPoly.begin(), viaPoly.end());
    REQUIRE(viaPoly.size() == bracketed.size());
    for (std::size_t i = 0; i < viaPoly.size(); ++i)
        CHECK(std::abs(viaPoly[i] - bracketed[i]) < 1e-9);
}

TEST_CASE("f1 and f2") {
    CHECK(f2(kPi / 2, 3.5) == Catch::Approx(3.5));
    CHECK_THROWS_AS(f2(0.0, 1.0), Error);
    CHECK_THROWS_AS(f1(0.0, 5, 1.0), Error);
    for (double t : {0.11, 0.47, 1.3})
        CHECK(std::abs(f1(t, 7, 0.5) - f1(t + 2.0 * kPi / 7, 7, 0.5)) < 1e-10 * std::abs(f1(t, 7, 0.5)));
    // On each interval |f1| bottoms out at 2 sinh(N g).
    const int N = 10;
    const double g = 0.8;
    double best = 1e300;
    for (int i = 1; i < 1000; ++i) {
        const double t = kPi / N * i / 1000.0;
        best = std::min(best, std::abs(f1(t, N, g)));
    }
    CHECK(best == Catch::Approx(2.0 * std::sinh(N * g)).epsilon(1e-5));
}
