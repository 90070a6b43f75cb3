#include <doctest.h>

#include "oracles.hpp"
#include "treewave/spectral.hpp"

#include <cmath>

using namespace treewave;

namespace {

GraphSpec interval(double len, double rho) {
    GraphSpec s;
    s.vertices = {0, 1};
    s.edges.push_back({1, 0, 1, len, Density::constant(rho)});
    return s;
}

GraphSpec star3(std::vector<double> len, std::vector<double> rho) {
    GraphSpec s;
    s.vertices = {0, 1, 2, 3};
    for (int j = 0; j < 3; ++j)
        s.edges.push_back({j + 1, 0, j + 1, len[j], Density::constant(rho[j])});
    return s;
}

// P1 interpolant of an eigenfunction on one edge
double interp(const std::vector<double>& x, const Eigen::VectorXd& v, double at) {
    const size_t n = x.size();
    if (at <= x.front())
        return v[0];
    if (at >= x.back())
        return v[static_cast<int>(n) - 1];
    size_t i = std::upper_bound(x.begin(), x.end(), at) - x.begin() - 1;
    i = std::min(i, n - 2);
    const double t = (at - x[i]) / (x[i + 1] - x[i]);
    return (1 - t) * v[static_cast<int>(i)] + t * v[static_cast<int>(i + 1)];
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("assemble: single edge with two elements") {
    const auto t = build_tree(interval(1.0, 1.0));
    const auto a = assemble(t, MeshConfig::uniform(t, 2, 1));
    REQUIRE(a.dofs.count == 1);
    const double h = 0.5;
    CHECK(a.stiffness.coeff(0, 0) == doctest::Approx(2.0 / h).epsilon(1e-14));
    CHECK(a.mass.coeff(0, 0) == doctest::Approx(2.0 * h / 3.0).epsilon(1e-14));
}

TEST_CASE("assemble: star DOF count and coarse-mesh rejection") {
    const auto t = build_tree(star3({1, 1, 1}, {1, 1, 1}));
    const int n = 8;
    const auto a = assemble(t, MeshConfig::uniform(t, n, 1));
    CHECK(a.dofs.count == 3 * (n - 1) + 1);

    // resolving 10 modes needs ~34 elements on each unit edge
    CHECK_THROWS_AS(solve_spectrum(t, MeshConfig::uniform(t, 4, 10), 10), MeshTooCoarse);
    CHECK_THROWS_AS(MeshConfig::uniform(t, 1, 1), MeshTooCoarse);

    // the derived rule always satisfies its own check
    const auto cfg = MeshConfig::for_modes(t, 12);
    CHECK_NOTHROW(solve_spectrum(t, cfg, 12));
}

TEST_CASE("interval eigenvalues and traces against the closed form") {
    const auto t = build_tree(interval(M_PI, 1.0));
    const auto sd = solve_spectrum(t, MeshConfig::uniform(t, 2000, 10), 10);
    const double amag = std::sqrt(2.0 / M_PI);
    for (int k = 1; k <= 10; ++k) {
        CHECK(sd.lambda[k - 1] ==
              doctest::Approx(static_cast<double>(k) * k).epsilon(1e-6));
        CHECK(std::abs(sd.alpha(k - 1, 0)) == doctest::Approx(amag).epsilon(1e-4));
        CHECK(std::abs(sd.alpha(k - 1, 1)) == doctest::Approx(amag).epsilon(1e-4));
        // sign convention: first channel positive
        CHECK(sd.alpha(k - 1, 0) > 0.0);
    }
    // Dirichlet nodes eliminated exactly
    for (int k = 0; k < 10; ++k) {
        CHECK(sd.phi[k][0][0] == 0.0);
        CHECK(sd.phi[k][0][sd.elements_per_edge[0]] == 0.0);
    }
}

TEST_CASE("equal 3-star spectrum matches the secular-equation oracle") {
    const auto t = build_tree(star3({1, 1, 1}, {1, 1, 1}));
    const int K = 10;
    const auto sd = solve_spectrum(t, MeshConfig::uniform(t, 400, K), K);
    const auto ref = oracles::star_sqrt_eigenvalues({1, 1, 1}, {1, 1, 1}, K);
    for (int k = 0; k < K; ++k)
        CHECK(std::sqrt(sd.lambda[k]) == doctest::Approx(ref[k]).epsilon(1e-6));
    // multiplicity pattern: simple, double, simple, double, ...
    const auto clusters = degenerate_clusters(sd.lambda);
    REQUIRE(clusters.size() >= 4);
    CHECK(clusters[0].second - clusters[0].first == 1); // pi/2
    CHECK(clusters[1].second - clusters[1].first == 2); // pi double
    CHECK(clusters[2].second - clusters[2].first == 1); // 3pi/2
    CHECK(clusters[3].second - clusters[3].first == 2); // 2pi double
}

TEST_CASE("weighted star spectrum matches the secular-equation oracle") {
    const auto t = build_tree(star3({1, 1, 1}, {1, 4, 9}));
    const int K = 8;
    const auto sd = solve_spectrum(t, MeshConfig::uniform(t, 500, K), K);
    const auto ref = oracles::star_sqrt_eigenvalues({1, 2, 3}, {1, 2, 3}, K);
    for (int k = 0; k < K; ++k)
        CHECK(std::sqrt(sd.lambda[k]) == doctest::Approx(ref[k]).epsilon(1e-6));
}

TEST_CASE("orthonormality under independent quadrature") {
    const auto t = build_tree(star3({1, 2, 3}, {1.0, 2.25, 4.0}));
    const int K = 8;
    const auto sd = solve_spectrum(t, MeshConfig::uniform(t, 300, K), K);
    double worst = 0.0;
    for (int i = 0; i < K; ++i)
        for (int j = i; j < K; ++j) {
            double acc = 0.0;
            for (int e = 0; e < t.num_edges(); ++e) {
                const auto& rho = t.spec().edges[e].density;
                acc += oracles::gauss_integral(
                    [&](double x) {
                        return rho(x) * interp(sd.nodes[e], sd.phi[i][e], x) *
                               interp(sd.nodes[e], sd.phi[j][e], x);
                    },
                    0.0, t.spec().edges[e].length, 600);
            }
            worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
        }
    CHECK(worst <= 1e-8);
}

TEST_CASE("Kirchhoff residual small and decaying under refinement") {
    const auto t = build_tree(star3({1, 2, 3}, {1.0, 2.25, 4.0}));
    const int K = 6;
    const auto coarse = solve_spectrum(t, MeshConfig::uniform(t, 200, K), K);
    const auto fine = solve_spectrum(t, MeshConfig::uniform(t, 400, K), K);
    for (int k = 0; k < K; ++k) {
        const auto rc = kirchhoff_residual(coarse, t, k);
        const auto rf = kirchhoff_residual(fine, t, k);
        CHECK(rc.residual <= 1e-3 * rc.deriv_scale);
        // at least first-order decay
        CHECK(rf.residual <= 0.75 * rc.residual + 1e-14 * rf.deriv_scale);
    }
}

TEST_CASE("second-order raw eigenvalue convergence, extrapolation better") {
    const auto t = build_tree(interval(M_PI, 1.0));
    const auto s1 = solve_spectrum(t, MeshConfig::uniform(t, 400, 6), 6);
    const auto s2 = solve_spectrum(t, MeshConfig::uniform(t, 800, 6), 6);
    for (int k = 1; k <= 6; ++k) {
        const double exact = static_cast<double>(k) * k;
        const double e1 = std::abs(s1.lambda_raw[k - 1] - exact);
        const double e2 = std::abs(s2.lambda_raw[k - 1] - exact);
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
        // Richardson value beats the raw fine-mesh value
        CHECK(std::abs(s2.lambda[k - 1] - exact) < 0.1 * e2);
    }
}

TEST_CASE("density scaling: s^2 rho divides lambda by s^2") {
    const auto t1 = build_tree(interval(M_PI, 1.0));
    const auto t4 = build_tree(interval(M_PI, 4.0));
    const auto s1 = solve_spectrum(t1, MeshConfig::uniform(t1, 800, 6), 6);
    const auto s4 = solve_spectrum(t4, MeshConfig::uniform(t4, 800, 6), 6);
    for (int k = 0; k < 6; ++k)
        CHECK(std::abs(s4.lambda[k] * 4.0 - s1.lambda[k]) <= 1e-6 * s1.lambda[k]);
}

TEST_CASE("modal norms") {
    const auto t = build_tree(interval(M_PI, 1.0));
    const auto sd = solve_spectrum(t, MeshConfig::uniform(t, 400, 10), 10);

    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(10);
    e1[0] = 1.0;
    CHECK(modal_norm(e1, sd.lambda, 0) == doctest::Approx(1.0));
    CHECK(modal_norm(e1, sd.lambda, -1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(modal_norm(e1, sd.lambda, 1) == doctest::Approx(1.0).epsilon(1e-6));

    Eigen::VectorXcd inv(10);
    double ref = 0.0;
    for (int k = 1; k <= 10; ++k) {
        inv[k - 1] = 1.0 / k;
        ref += 1.0 / (static_cast<double>(k) * k);
    }
    CHECK(modal_norm(inv, sd.lambda, 0) == doctest::Approx(std::sqrt(ref)).epsilon(1e-12));

    CHECK_THROWS_AS(modal_norm(e1, sd.lambda, 2), SchemaError);
    Eigen::VectorXcd toolong = Eigen::VectorXcd::Zero(11);
    CHECK_THROWS_AS(modal_norm(toolong, sd.lambda, 0), IndexOutOfRange);
}

TEST_CASE("Weyl counting check") {
    const auto ti = build_tree(interval(M_PI, 1.0));
    const auto si = solve_spectrum(ti, MeshConfig::uniform(ti, 400, 10), 10);
    const auto wi = weyl_check(si, ti);
    CHECK(wi.l_optical == doctest::Approx(M_PI));
    CHECK(wi.max_deviation <= 0.1); // lambda_k ~ k^2 exactly
    CHECK(wi.monotone);

    const auto ts = build_tree(star3({1, 1, 1}, {1, 1, 1}));
    const auto ss = solve_spectrum(ts, MeshConfig::uniform(ts, 200, 12), 12);
    const auto ws = weyl_check(ss, ts);
    CHECK(ws.max_deviation <= 2.0);
    CHECK(ws.monotone);
}

TEST_CASE("solver guard rails") {
    const auto t = build_tree(interval(1.0, 1.0));
    const auto a = assemble(t, MeshConfig::uniform(t, 8, 1));
    CHECK_THROWS_AS(solve_gevp(a.stiffness, a.mass, 100, 1), EigenSolverFailure);

    Eigen::SparseMatrix<double> zmass(a.mass.rows(), a.mass.cols());
    CHECK_THROWS_AS(solve_gevp(a.stiffness, zmass, 1, 1), DegenerateMassMatrix);

    CHECK_THROWS_AS(solve_spectrum(t, MeshConfig::uniform(t, 8, 1), 0), SchemaError);
}

TEST_CASE("determinism for a fixed seed") {
    const auto t = build_tree(star3({1, 2, 3}, {1.0, 2.25, 4.0}));
    const auto cfg = MeshConfig::uniform(t, 150, 6);
    const auto s1 = solve_spectrum(t, cfg, 6, 777);
    const auto s2 = solve_spectrum(t, cfg, 6, 777);
    CHECK((s1.lambda - s2.lambda).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s1.alpha - s2.alpha).cwiseAbs().maxCoeff() == 0.0);

    // different seed: same spectrum, same traces for simple modes
    const auto s3 = solve_spectrum(t, cfg, 6, 778);
    CHECK((s1.lambda - s3.lambda).cwiseAbs().maxCoeff() <= 1e-9 * s1.lambda.maxCoeff());
    for (const auto& [b, e] : degenerate_clusters(s1.lambda))
        if (e - b == 1)
            for (int c = 0; c < s1.channels(); ++c)
                CHECK(s1.alpha(b, c) == doctest::Approx(s3.alpha(b, c)).epsilon(1e-6));
}

} // TEST_SUITE
