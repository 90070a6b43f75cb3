#include <doctest.h>

#include "treewave/evolution.hpp"

#include "oracles.hpp"

#include <cmath>
#include <complex>
#include <random>

using namespace treewave;
using cd = std::complex<double>;

namespace {

GraphSpec interval_spec(double len, double rho) {
    GraphSpec s;
    s.vertices = {0, 1};
    s.edges.push_back({1, 0, 1, len, Density::constant(rho)});
    return s;
}

GraphSpec star_spec() {
    GraphSpec s;
    s.vertices = {0, 1, 2, 3};
    for (int j = 0; j < 3; ++j)
        s.edges.push_back({j + 1, 0, j + 1, 1.0, Density::constant(1.0)});
    return s;
}

const MetricTree& interval_tree() {
    static const MetricTree t = build_tree(interval_spec(M_PI, 1.0));
    return t;
}

const SpectralData& interval_sd() {
    static const SpectralData sd =
        solve_spectrum(interval_tree(), MeshConfig::uniform(interval_tree(), 800, 10), 10);
    return sd;
}

const MetricTree& star_tree() {
    static const MetricTree t = build_tree(star_spec());
    return t;
}

const SpectralData& star_sd() {
    static const SpectralData sd =
        solve_spectrum(star_tree(), MeshConfig::uniform(star_tree(), 300, 10), 10);
    return sd;
}

ModalState state_of(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b = {}) {
    ModalState st;
    st.a = a;
    st.b = b;
    return st;
}

Eigen::VectorXcd unit(int n, int k) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    v[k] = 1.0;
    return v;
}

// single-term family control built by hand
BoundaryControl term_control(Equation eq, FamilyKind kind, double horizon,
                             std::vector<int> channels, const Eigen::VectorXd& rate,
                             const Eigen::MatrixXd& amplitude, const Eigen::VectorXcd& coef,
                             bool conjugate = false) {
    BoundaryControl ctl;
    ctl.equation = eq;
    ctl.horizon = horizon;
    ctl.channel_vertices = channels;
    FamilySpec fam;
    fam.kind = kind;
    fam.rate = rate;
    fam.amplitude = amplitude;
    fam.horizon = horizon;
    fam.channel_vertices = channels;
    ctl.terms.push_back({fam, coef, conjugate});
    return ctl;
}

BoundaryControl sampled_control(Equation eq, double horizon, std::vector<int> channels,
                                const Eigen::VectorXd& grid, const Eigen::MatrixXcd& values) {
    BoundaryControl ctl;
    ctl.equation = eq;
    ctl.horizon = horizon;
    ctl.channel_vertices = channels;
    ctl.grid = grid;
    ctl.grid_values = values;
    return ctl;
}

// sampled twin of a family control
BoundaryControl resampled(const BoundaryControl& ctl, int points) {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(points, 0.0, ctl.horizon);
    return sampled_control(ctl.equation, ctl.horizon, ctl.channel_vertices, grid,
                           ctl.sample(grid));
}

double wave_error(const SpectralData& sd, const Eigen::VectorXcd& c, const Eigen::VectorXcd& cdot,
                  const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    double e = 0.0;
    for (int k = 0; k < c.size(); ++k)
        e += sd.lambda[k] * std::norm(c[k] - a[k]) + std::norm(cdot[k] - b[k]) / sd.lambda[k];
    return std::sqrt(e);
}

double dual_norm(const SpectralData& sd, const Eigen::VectorXcd& c) {
    double e = 0.0;
    for (int k = 0; k < c.size(); ++k)
        e += std::norm(c[k]) / sd.lambda[k];
    return std::sqrt(e);
}

} // namespace

TEST_SUITE("evolution") {

TEST_CASE("free evolution: rest stays at rest, decay and phase are exact") {
    const auto& sd = interval_sd();
    const BoundaryControl none;

    const Trajectory w = wave_forward(sd, none, 1.0, 5);
    CHECK(w.provenance == "spectral");
    CHECK(w.times.size() == 201);
    CHECK(w.times[0] == 0.0);
    CHECK(w.times[200] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.modes() == 5);
    CHECK(w.c.cwiseAbs().maxCoeff() == 0.0);
    CHECK(w.cdot.cwiseAbs().maxCoeff() == 0.0);

    // wave free rotation from a modal state conserves each mode's energy
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXcd a(5), b(5);
    for (int k = 0; k < 5; ++k) {
        a[k] = uni(rng);
        b[k] = uni(rng);
    }
    const ModalState init = state_of(a, b);
    const Trajectory free_w =
        wave_forward(sd, none, 3.0, 5, Eigen::VectorXd::LinSpaced(40, 0.0, 3.0), &init);
    for (int i = 0; i < free_w.times.size(); ++i) {
        for (int k = 0; k < 5; ++k) {
            const double per_mode = sd.lambda[k] * std::norm(free_w.c(i, k)) +
                                    std::norm(free_w.cdot(i, k));
            const double ref = sd.lambda[k] * std::norm(a[k]) + std::norm(b[k]);
            CHECK(per_mode == doctest::Approx(ref).epsilon(1e-12));
        }
    }

    // heat: pure exponential decay, monotone in t
    const Trajectory h = heat_forward(sd, unit(5, 0), none, 1.0, 5);
    CHECK(std::abs(h.c(200, 0) - std::exp(-1.0)) < 1e-6);
    CHECK(h.cdot.size() == 0);
    for (int i = 1; i < h.times.size(); ++i)
        CHECK(std::abs(h.c(i, 0)) <= std::abs(h.c(i - 1, 0)) + 1e-15);

    // schrodinger: unitary phase rotation
    Eigen::VectorXcd az(5);
    for (int k = 0; k < 5; ++k)
        az[k] = cd(uni(rng), uni(rng));
    const Trajectory s =
        schrodinger_forward(sd, az, none, M_PI, 5, Eigen::VectorXd::LinSpaced(30, 0.0, M_PI));
    for (int i = 0; i < s.times.size(); ++i)
        for (int k = 0; k < 5; ++k)
            CHECK(std::abs(std::abs(s.c(i, k)) - std::abs(az[k])) < 1e-13);
    CHECK(std::abs(s.c(29, 0) - az[0] * std::exp(cd(0.0, M_PI))) < 1e-6);
}

TEST_CASE("forced wave coefficients match quadrature and the resonant closed form") {
    const auto& sd = interval_sd();
    const double T = M_PI;
    Eigen::MatrixXd amp(1, 1);
    amp << 1.0;
    const BoundaryControl ctl =
        term_control(Equation::Wave, FamilyKind::Sin, T, {0}, sd.omega().head(1), amp,
                     Eigen::VectorXcd::Ones(1));

    const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(8, 0.0, T);
    const Trajectory traj = wave_forward(sd, ctl, T, 6, times);
    CHECK(traj.c.row(0).cwiseAbs().maxCoeff() == 0.0);

    // driving at the first eigenfrequency grows the resonant mode linearly:
    // c_1(t) = -alpha_1(0) (sin t - t cos t) / 2 for f(0, s) = sin(pi - s)
    const double al = sd.alpha(0, 0);
    for (int i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double ref = -al * 0.5 * (std::sin(t) - t * std::cos(t));
        CHECK(std::abs(traj.c(i, 0) - ref) < 1e-6);
    }

    // every retained mode at the final time against independent quadrature
    const double w1 = sd.omega()[0];
    for (int k = 0; k < 6; ++k) {
        const double wk = sd.omega()[k];
        const double conv_s = oracles::gauss_integral(
            [&](double s) { return std::sin(wk * (T - s)) * std::sin(w1 * (T - s)); }, 0.0, T);
        const double conv_c = oracles::gauss_integral(
            [&](double s) { return std::cos(wk * (T - s)) * std::sin(w1 * (T - s)); }, 0.0, T);
        CHECK(std::abs(traj.c(7, k) - (-sd.alpha(k, 0) * conv_s)) < 1e-10);
        CHECK(std::abs(traj.cdot(7, k) - (-sd.kappa(k, 0) * conv_c)) < 1e-10);
    }
}

TEST_CASE("synthesized wave control reaches its target state") {
    const auto& sd = star_sd();
    const int K = 6;
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXcd a(K), b(K);
    for (int k = 0; k < K; ++k) {
        a[k] = uni(rng);
        b[k] = uni(rng);
    }
    const double T = default_horizon(star_tree(), {1, 2, 3});
    const auto problem = make_problem(Equation::Wave, sd, state_of(a, b), T, K, {1, 2, 3});
    const auto [ctl, report] = wave_control(problem);
    REQUIRE(report.max_residual < 1e-8);

    const Trajectory traj = wave_forward(sd, ctl, T, K, Eigen::VectorXd::LinSpaced(5, 0.0, T));
    const Eigen::VectorXcd cT = traj.c.row(4).transpose();
    const Eigen::VectorXcd dT = traj.cdot.row(4).transpose();
    const double rel = wave_error(sd, cT, dT, a, b) /
                       wave_error(sd, Eigen::VectorXcd::Zero(K), Eigen::VectorXcd::Zero(K), a, b);
    CHECK(rel < 1e-6);

    // the trajectory starts from rest
    CHECK(traj.c.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(traj.cdot.row(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampled controls reproduce the family controls") {
    const auto& sd = interval_sd();

    SUBCASE("wave") {
        const int K = 4;
        const double T = M_PI;
        const auto problem =
            make_problem(Equation::Wave, sd, state_of(unit(K, 0), {}), T, K, {0, 1});
        const auto [ctl, report] = wave_control(problem);
        REQUIRE(report.max_residual < 1e-8);
        const BoundaryControl gridded = resampled(ctl, 4001);

        const Trajectory closed = wave_forward(sd, ctl, T, K, Eigen::VectorXd::Constant(1, T));
        const Trajectory stepped =
            wave_forward(sd, gridded, T, K, Eigen::VectorXd::Constant(1, T));
        CHECK((closed.c.row(0) - stepped.c.row(0)).cwiseAbs().maxCoeff() < 1e-5);
        CHECK((closed.cdot.row(0) - stepped.cdot.row(0)).cwiseAbs().maxCoeff() < 1e-5);

        // intermediate outputs do not change the final state
        Eigen::VectorXd three(3);
        three << T / 3.0, 2.0 * T / 3.0, T;
        const Trajectory multi = wave_forward(sd, gridded, T, K, three);
        CHECK((multi.c.row(2) - stepped.c.row(0)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((multi.cdot.row(2) - stepped.cdot.row(0)).cwiseAbs().maxCoeff() < 1e-12);

        // causality: samples past the output time cannot matter
        BoundaryControl tail = gridded;
        for (int i = 0; i < tail.grid.size(); ++i)
            if (tail.grid[i] >= 0.7 * T)
                tail.grid_values.row(i).setConstant(50.0);
        const Eigen::VectorXd half = Eigen::VectorXd::Constant(1, 0.5 * T);
        const Trajectory early_a = wave_forward(sd, gridded, T, K, half);
        const Trajectory early_b = wave_forward(sd, tail, T, K, half);
        CHECK((early_a.c - early_b.c).cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("heat") {
        const int K = 4;
        const double tau = 0.5;
        const auto problem =
            make_problem(Equation::Heat, sd, state_of(unit(K, 0) + 0.3 * unit(K, 2), {}), tau, K,
                         {0, 1});
        const auto [ctl, report] = heat_null_control(problem);
        REQUIRE(report.max_residual < 1e-8);
        const BoundaryControl gridded = resampled(ctl, 2001);
        const Eigen::VectorXd last = Eigen::VectorXd::Constant(1, tau);
        const Trajectory closed = heat_forward(sd, problem.state.a, ctl, tau, K, last);
        const Trajectory stepped = heat_forward(sd, problem.state.a, gridded, tau, K, last);
        CHECK((closed.c - stepped.c).cwiseAbs().maxCoeff() < 1e-5);
    }

    SUBCASE("schrodinger") {
        const int K = 4;
        const double tau = 0.1;
        Eigen::VectorXcd a(K);
        a << cd(1.0, 0.2), cd(-0.4, 0.5), cd(0.1, -0.3), cd(0.0, 0.6);
        const auto problem =
            make_problem(Equation::Schrodinger, sd, state_of(a, {}), tau, K, {0, 1});
        const auto [ctl, report] = schrodinger_control(problem);
        REQUIRE(report.max_residual < 1e-7);
        const BoundaryControl gridded = resampled(ctl, 2001);
        const Eigen::VectorXd last = Eigen::VectorXd::Constant(1, tau);
        const Trajectory closed = schrodinger_forward(sd, a, ctl, tau, K, last);
        const Trajectory stepped = schrodinger_forward(sd, a, gridded, tau, K, last);
        CHECK((closed.c - stepped.c).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("control past its horizon leaves only free dynamics") {
    const auto& sd = interval_sd();
    Eigen::VectorXd times(4);
    times << 0.4, 0.9, 1.7, 2.5;

    // wave: closed-form rotation after the horizon against the stepped twin
    Eigen::VectorXd rate(2);
    rate << 1.3, 2.7;
    Eigen::MatrixXd amp(2, 1);
    amp << 0.8, -0.4;
    Eigen::VectorXcd coef(2);
    coef << 0.5, 1.0;
    const BoundaryControl wctl =
        term_control(Equation::Wave, FamilyKind::Sin, 1.0, {0}, rate, amp, coef);
    const Trajectory closed = wave_forward(sd, wctl, 2.5, 4, times);
    const Trajectory stepped = wave_forward(sd, resampled(wctl, 2001), 2.5, 4, times);
    CHECK((closed.c - stepped.c).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((closed.cdot - stepped.cdot).cwiseAbs().maxCoeff() < 1e-6);

    // schrodinger: phase evolution after the control switches off
    Eigen::VectorXd srate(2);
    srate << sd.lambda[0], sd.lambda[1];
    Eigen::VectorXcd scoef(2);
    scoef << cd(0.3, 0.2), cd(0.0, -0.5);
    const BoundaryControl sctl = term_control(Equation::Schrodinger, FamilyKind::Schrodinger,
                                              0.4, {0}, srate, amp, scoef, true);
    Eigen::VectorXcd a0(4);
    a0 << cd(0.2, 0.0), cd(0.0, 0.1), cd(-0.3, 0.2), cd(0.05, -0.1);
    Eigen::VectorXd stimes(3);
    stimes << 0.25, 0.7, 1.0;
    const Trajectory sclosed = schrodinger_forward(sd, a0, sctl, 1.0, 4, stimes);
    const Trajectory sstepped = schrodinger_forward(sd, a0, resampled(sctl, 4001), 1.0, 4, stimes);
    CHECK((sclosed.c - sstepped.c).cwiseAbs().maxCoeff() < 1e-6);

    // past the horizon the modal magnitudes are frozen for heat relative to
    // free decay: c_k(t) = c_k(h) e^{-lambda_k (t - h)}
    Eigen::VectorXd hrate(1);
    hrate << sd.lambda[0];
    Eigen::MatrixXd hamp(1, 1);
    hamp << 1.0;
    const BoundaryControl hctl = term_control(Equation::Heat, FamilyKind::Parabolic, 0.5, {0},
                                              hrate, hamp, Eigen::VectorXcd::Ones(1));
    Eigen::VectorXd htimes(2);
    htimes << 0.5, 1.25;
    const Trajectory h = heat_forward(sd, unit(4, 1), hctl, 1.25, 4, htimes);
    for (int k = 0; k < 4; ++k)
        CHECK(std::abs(h.c(1, k) - h.c(0, k) * std::exp(-sd.lambda[k] * 0.75)) < 1e-12);
}

TEST_CASE("coarse sample grids are rejected") {
    const auto& sd = interval_sd();
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(11, 0.0, 2.0); // step 0.2
    const Eigen::MatrixXcd vals = Eigen::MatrixXcd::Ones(11, 1);
    const BoundaryControl ctl = sampled_control(Equation::Wave, 2.0, {0}, grid, vals);

    // omega_10 = 10 needs step <= 2 pi / 80; omega_2 = 2 tolerates 0.2
    CHECK_THROWS_AS(wave_forward(sd, ctl, 2.0, 10), UnderresolvedQuadrature);
    CHECK_NOTHROW(wave_forward(sd, ctl, 2.0, 2));

    const BoundaryControl hctl = sampled_control(Equation::Heat, 2.0, {0}, grid, vals);
    CHECK_THROWS_AS(heat_forward(sd, unit(10, 0), hctl, 2.0, 10), UnderresolvedQuadrature);
}

TEST_CASE("heat null control annihilates the state") {
    const auto& isd = interval_sd();
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXcd a(8);
    for (int k = 0; k < 8; ++k)
        a[k] = uni(rng);
    const auto problem = make_problem(Equation::Heat, isd, state_of(a, {}), 0.5, 8, {0, 1});
    const auto [ctl, report] = heat_null_control(problem);
    REQUIRE(report.max_residual < 1e-8);
    const Trajectory traj = heat_forward(isd, a, ctl, 0.5, 8);
    const Eigen::VectorXcd final = traj.c.row(200).transpose();
    CHECK(dual_norm(isd, final) < 1e-6 * dual_norm(isd, a));

    // star graph from the second and third boundary vertex only
    const auto& ssd = star_sd();
    const Eigen::VectorXcd sa = unit(8, 0) + unit(8, 1);
    const auto sp = make_problem(Equation::Heat, ssd, state_of(sa, {}), 0.3, 8, {1, 2, 3});
    const auto [sctl, sreport] = heat_null_control(sp);
    REQUIRE(sreport.max_residual < 1e-8);
    const Trajectory straj = heat_forward(ssd, sa, sctl, 0.3, 8);
    CHECK(dual_norm(ssd, straj.c.row(200).transpose()) < 1e-6 * dual_norm(ssd, sa));
}

TEST_CASE("schrodinger control steers to zero") {
    const auto& sd = interval_sd();
    Eigen::VectorXcd a(6);
    a << cd(1.0, 0.0), cd(0.3, -0.4), cd(-0.2, 0.1), cd(0.0, 0.5), cd(0.1, 0.1), cd(-0.3, 0.0);
    const auto problem = make_problem(Equation::Schrodinger, sd, state_of(a, {}), 0.1, 6, {0, 1});
    const auto [ctl, report] = schrodinger_control(problem);
    REQUIRE(report.max_residual < 1e-7);
    const Trajectory traj = schrodinger_forward(sd, a, ctl, 0.1, 6);
    CHECK(dual_norm(sd, traj.c.row(200).transpose()) < 1e-5 * dual_norm(sd, a));
}

TEST_CASE("fdtd starts at rest and conserves energy after the pulse") {
    const auto& tree = interval_tree();

    const GridState quiet = fdtd_wave(tree, {}, 0.5, FdtdConfig::uniform(tree, 50));
    REQUIRE(quiet.values.size() == 1);
    CHECK(quiet.values[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(quiet.velocity[0].cwiseAbs().maxCoeff() == 0.0);

    // smooth pulse through the left end, silent after t = 0.5
    const int n = 201;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(n, 0.0, 0.5);
    Eigen::MatrixXcd vals(n, 1);
    for (int i = 0; i < n; ++i) {
        const double s = std::sin(2.0 * M_PI * grid[i]);
        vals(i, 0) = s * s;
    }
    const BoundaryControl pulse = sampled_control(Equation::Wave, 0.5, {0}, grid, vals);

    const FdtdConfig cfg = FdtdConfig::uniform(tree, 400);
    const double e1 = grid_energy(tree, fdtd_wave(tree, pulse, 1.0, cfg));
    const double e2 = grid_energy(tree, fdtd_wave(tree, pulse, 1.5, cfg));
    const double e3 = grid_energy(tree, fdtd_wave(tree, pulse, 2.0, cfg));
    REQUIRE(e1 > 0.0);
    CHECK(std::abs(e2 - e1) < 1e-3 * e1);
    CHECK(std::abs(e3 - e1) < 1e-3 * e1);

    FdtdConfig bad = cfg;
    bad.dt = 0.02; // CFL cap for 400 elements on [0, pi] is about 7.1e-3
    CHECK_THROWS_AS(fdtd_wave(tree, pulse, 1.0, bad), CFLViolation);
}

TEST_CASE("fdtd agrees with the spectral propagator") {
    const auto& tree = star_tree();
    const auto& sd = star_sd();
    const int K = 5;
    const double T = 1.0;

    const int n = 401;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(n, 0.0, T);
    Eigen::MatrixXcd vals(n, 2);
    for (int i = 0; i < n; ++i) {
        const double s = std::sin(M_PI * grid[i]);
        vals(i, 0) = 0.7 * s * s;
        vals(i, 1) = -0.4 * s * s * std::cos(M_PI * grid[i]);
    }
    const BoundaryControl ctl = sampled_control(Equation::Wave, T, {1, 2}, grid, vals);

    const Trajectory spectral =
        wave_forward(sd, ctl, T, K, Eigen::VectorXd::Constant(1, T));
    const GridState state = fdtd_wave(tree, ctl, T, FdtdConfig::uniform(tree, 400));
    const ModalState projected = project(state, sd, tree, K);

    const double err = wave_error(sd, projected.a, projected.b, spectral.c.row(0).transpose(),
                                  spectral.cdot.row(0).transpose());
    const double scale = wave_error(sd, spectral.c.row(0).transpose(),
                                    spectral.cdot.row(0).transpose(),
                                    Eigen::VectorXcd::Zero(K), Eigen::VectorXcd::Zero(K));
    REQUIRE(scale > 1e-3);
    CHECK(err < 5e-3 * scale);
}

TEST_CASE("project inverts lift") {
    const auto& tree = star_tree();
    const auto& sd = star_sd();

    // single mode on the native mesh round-trips exactly
    const GridState g1 = lift(state_of(unit(10, 0), {}), sd, tree, sd.elements_per_edge);
    const ModalState m1 = project(g1, sd, tree, 10);
    CHECK(m1.b.size() == 0);
    for (int k = 0; k < 10; ++k)
        CHECK(std::abs(m1.a[k] - (k == 0 ? 1.0 : 0.0)) < 1e-8);

    // random combination with velocity
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXcd a(10), b(10);
    for (int k = 0; k < 10; ++k) {
        a[k] = uni(rng);
        b[k] = uni(rng);
    }
    const GridState g2 = lift(state_of(a, b), sd, tree, sd.elements_per_edge);
    REQUIRE(!g2.velocity.empty());
    const ModalState m2 = project(g2, sd, tree, 10);
    CHECK((m2.a - a).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((m2.b - b).cwiseAbs().maxCoeff() < 1e-8);

    // mismatched meshes go through interpolation
    const GridState g3 = lift(state_of(a.head(4), {}), sd, tree, {700, 700, 700});
    const ModalState m3 = project(g3, sd, tree, 4);
    CHECK((m3.a - a.head(4)).cwiseAbs().maxCoeff() < 1e-3);

    // Parseval on the native mesh: sum |a_k|^2 equals the weighted L2 energy
    double mass = 0.0;
    const auto& edges = tree.spec().edges;
    for (size_t e = 0; e < g2.values.size(); ++e) {
        const int ne = g2.elements_per_edge[e];
        const double h = edges[e].length / ne;
        for (int j = 0; j < ne; ++j) {
            const auto [m00, m01, m11] = element_mass(edges[e].density, j * h, (j + 1) * h);
            const double u0 = g2.values[e][j], u1 = g2.values[e][j + 1];
            mass += u0 * u0 * m00 + 2.0 * u0 * u1 * m01 + u1 * u1 * m11;
        }
    }
    CHECK(std::abs(mass - a.squaredNorm()) < 1e-8);
}

TEST_CASE("evolution input validation") {
    const auto& sd = interval_sd();
    const auto& tree = interval_tree();
    const BoundaryControl none;

    CHECK_THROWS_AS(wave_forward(sd, none, 1.0, 0), SchemaError);
    CHECK_THROWS_AS(wave_forward(sd, none, 1.0, 99), IndexOutOfRange);

    Eigen::VectorXd bad(2);
    bad << 0.5, 0.2;
    CHECK_THROWS_AS(wave_forward(sd, none, 1.0, 3, bad), SchemaError);
    bad << -0.1, 0.5;
    CHECK_THROWS_AS(wave_forward(sd, none, 1.0, 3, bad), SchemaError);
    bad << 0.5, 1.5;
    CHECK_THROWS_AS(wave_forward(sd, none, 1.0, 3, bad), SchemaError);

    // channels must be boundary vertices of the same graph
    const BoundaryControl off = sampled_control(Equation::Wave, 1.0, {7},
                                                Eigen::VectorXd::LinSpaced(401, 0.0, 1.0),
                                                Eigen::MatrixXcd::Ones(401, 1));
    CHECK_THROWS_AS(wave_forward(sd, off, 1.0, 3), InconsistentChannels);

    // family kinds are tied to their equations
    Eigen::MatrixXd amp(1, 1);
    amp << 1.0;
    const BoundaryControl parab = term_control(Equation::Heat, FamilyKind::Parabolic, 1.0, {0},
                                               Eigen::VectorXd::Ones(1), amp,
                                               Eigen::VectorXcd::Ones(1));
    CHECK_THROWS_AS(wave_forward(sd, parab, 1.0, 3), SchemaError);
    const BoundaryControl sine = term_control(Equation::Wave, FamilyKind::Sin, 1.0, {0},
                                              Eigen::VectorXd::Ones(1), amp,
                                              Eigen::VectorXcd::Ones(1));
    CHECK_THROWS_AS(heat_forward(sd, unit(3, 0), sine, 1.0, 3), SchemaError);
    CHECK_THROWS_AS(schrodinger_forward(sd, unit(3, 0), sine, 1.0, 3), SchemaError);

    // fdtd configuration checks
    CHECK_THROWS_AS(fdtd_wave(tree, none, 1.0, FdtdConfig{{50, 50}, 0.0}), SchemaError);
    CHECK_THROWS_AS(FdtdConfig::uniform(tree, 1), MeshTooCoarse);
    CHECK_THROWS_AS(fdtd_wave(tree, none, 0.0, FdtdConfig::uniform(tree, 50)), SchemaError);

    GridState no_velocity = fdtd_wave(tree, none, 0.1, FdtdConfig::uniform(tree, 50));
    no_velocity.velocity.clear();
    CHECK_THROWS_AS(grid_energy(tree, no_velocity), SchemaError);
    CHECK_THROWS_AS(project(no_velocity, star_sd(), star_tree(), 3), SchemaError);
    CHECK_THROWS_AS(lift(state_of(unit(3, 0), {}), sd, tree, {100, 100}), SchemaError);
}

} // TEST_SUITE
