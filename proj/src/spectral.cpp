#include "treewave/spectral.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace treewave {

namespace {

constexpr double kPi = 3.14159265358979323846;

double resolution_threshold(const MetricTree& tree, int edge_array_idx, int modes) {
    const auto& e = tree.spec().edges[edge_array_idx];
    const double le = e.density.optical_integral(0.0, e.length);
    return 10.0 * modes * le / tree.total_optical_length();
}

} // namespace

ElementMass element_mass(const Density& rho, double x0, double x1) {
    // 4-point Gauss rule on [0,1] for sampled profiles
    static const double gx[4] = {0.06943184420297371, 0.33000947820757187, 0.6699905217924281,
                                 0.9305681557970263};
    static const double gw[4] = {0.17392742256872693, 0.32607257743127307, 0.32607257743127307,
                                 0.17392742256872693};
    const double h = x1 - x0;
    ElementMass m;
    switch (rho.kind()) {
    case Density::Kind::Constant: {
        const double c = rho.constant_value();
        m.m00 = m.m11 = c * h / 3.0;
        m.m01 = c * h / 6.0;
        break;
    }
    case Density::Kind::Linear: {
        const double r0 = rho(x0), r1 = rho(x1);
        m.m00 = h * (3 * r0 + r1) / 12.0;
        m.m01 = h * (r0 + r1) / 12.0;
        m.m11 = h * (r0 + 3 * r1) / 12.0;
        break;
    }
    case Density::Kind::Sampled:
        for (int g = 0; g < 4; ++g) {
            const double r = rho(x0 + gx[g] * h) * gw[g] * h;
            const double pa = 1.0 - gx[g], pb = gx[g];
            m.m00 += r * pa * pa;
            m.m01 += r * pa * pb;
            m.m11 += r * pb * pb;
        }
        break;
    }
    return m;
}

namespace {

Assembly assemble_mesh(const MetricTree& tree, const std::vector<int>& elems) {
    const auto& edges = tree.spec().edges;
    const int ne = tree.num_edges();

    DofMap dofs;
    dofs.node_dof.resize(ne);
    dofs.h.resize(ne);
    int next = 0;

    // interior vertices first (ascending id), then per-edge interior nodes
    std::vector<int> vertex_dof(tree.num_vertices(), -1);
    for (const int v : tree.interior())
        vertex_dof[tree.vertex_index(v)] = next++;
    for (int e = 0; e < ne; ++e) {
        const int n = elems[e];
        dofs.h[e] = edges[e].length / n;
        auto& nd = dofs.node_dof[e];
        nd.assign(n + 1, -1);
        nd[0] = vertex_dof[tree.vertex_index(edges[e].tail)];
        nd[n] = vertex_dof[tree.vertex_index(edges[e].head)];
        for (int j = 1; j < n; ++j)
            nd[j] = next++;
    }
    dofs.count = next;

    std::vector<Eigen::Triplet<double>> kt, mt;
    for (int e = 0; e < ne; ++e) {
        const auto& rho = edges[e].density;
        const double h = dofs.h[e];
        const int n = elems[e];
        for (int j = 0; j < n; ++j) {
            const auto [m00, m01, m11] = element_mass(rho, j * h, (j + 1) * h);
            const int da = dofs.node_dof[e][j], db = dofs.node_dof[e][j + 1];
            const double kdiag = 1.0 / h, koff = -1.0 / h;
            if (da >= 0) {
                kt.emplace_back(da, da, kdiag);
                mt.emplace_back(da, da, m00);
            }
            if (db >= 0) {
                kt.emplace_back(db, db, kdiag);
                mt.emplace_back(db, db, m11);
            }
            if (da >= 0 && db >= 0) {
                kt.emplace_back(da, db, koff);
                kt.emplace_back(db, da, koff);
                mt.emplace_back(da, db, m01);
                mt.emplace_back(db, da, m01);
            }
        }
    }

    Assembly out;
    out.stiffness.resize(dofs.count, dofs.count);
    out.mass.resize(dofs.count, dofs.count);
    out.stiffness.setFromTriplets(kt.begin(), kt.end());
    out.mass.setFromTriplets(mt.begin(), mt.end());
    out.dofs = std::move(dofs);
    return out;
}

// second-order one-sided derivative at an edge endpoint, oriented toward
// the vertex sitting at that endpoint
double toward_derivative(const Eigen::VectorXd& phi_e, double h, bool at_tail) {
    const int n = static_cast<int>(phi_e.size()) - 1;
    if (at_tail)
        return -((-3.0 * phi_e[0] + 4.0 * phi_e[1] - phi_e[2]) / (2.0 * h));
    return (3.0 * phi_e[n] - 4.0 * phi_e[n - 1] + phi_e[n - 2]) / (2.0 * h);
}

} // namespace

MeshConfig MeshConfig::for_modes(const MetricTree& tree, int modes) {
    if (modes < 1)
        throw SchemaError("mode count must be at least 1");
    MeshConfig cfg;
    cfg.target_modes = modes;
    cfg.elements_per_edge.resize(tree.num_edges());
    for (int e = 0; e < tree.num_edges(); ++e) {
        int n = std::max(4, static_cast<int>(std::ceil(resolution_threshold(tree, e, modes))));
        n += n % 2; // even so that the half-resolution companion mesh is valid
        cfg.elements_per_edge[e] = n;
    }
    return cfg;
}

MeshConfig MeshConfig::uniform(const MetricTree& tree, int elements, int modes) {
    if (elements < 2)
        throw MeshTooCoarse("need at least 2 elements per edge");
    MeshConfig cfg;
    cfg.target_modes = modes;
    cfg.elements_per_edge.assign(tree.num_edges(), elements);
    return cfg;
}

Assembly assemble(const MetricTree& tree, const MeshConfig& mesh) {
    if (static_cast<int>(mesh.elements_per_edge.size()) != tree.num_edges())
        throw SchemaError("element count list does not match edge count");
    for (int e = 0; e < tree.num_edges(); ++e)
        if (mesh.elements_per_edge[e] < 2)
            throw MeshTooCoarse("edge " + std::to_string(tree.spec().edges[e].id) +
                                ": need at least 2 elements");
    return assemble_mesh(tree, mesh.elements_per_edge);
}

// resolution rule, enforced where a mode count is actually requested
static void require_resolution(const MetricTree& tree, const MeshConfig& mesh, int modes) {
    for (int e = 0; e < tree.num_edges(); ++e) {
        const int n = mesh.elements_per_edge[e];
        const double need = resolution_threshold(tree, e, modes);
        if (n + 1e-9 < need)
            throw MeshTooCoarse("edge " + std::to_string(tree.spec().edges[e].id) + ": " +
                                std::to_string(n) + " elements resolve fewer than " +
                                std::to_string(modes) + " modes (need " +
                                std::to_string(static_cast<int>(std::ceil(need))) + ")");
    }
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> solve_gevp(const Eigen::SparseMatrix<double>& K,
                                                       const Eigen::SparseMatrix<double>& M,
                                                       int nev, std::uint64_t seed) {
    const int n = static_cast<int>(K.rows());
    if (nev < 1 || nev > n)
        throw EigenSolverFailure("requested " + std::to_string(nev) + " eigenpairs from a " +
                                 std::to_string(n) + "-dimensional problem");
    for (int i = 0; i < n; ++i)
        if (!(M.coeff(i, i) > 0.0))
            throw DegenerateMassMatrix("mass matrix diagonal entry " + std::to_string(i) +
                                       " is not positive");

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    if (ldlt.info() != Eigen::Success)
        throw EigenSolverFailure("stiffness factorization failed");

    const int p = std::min(n, nev + std::max(8, nev / 2));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd X(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i)
            X(i, j) = gauss(rng);

    Eigen::VectorXd ritz = Eigen::VectorXd::Zero(p), prev;
    Eigen::MatrixXd Q;
    bool converged = false;
    for (int iter = 0; iter < 300 && !converged; ++iter) {
        const Eigen::MatrixXd Y = ldlt.solve(M * X);
        Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Y).householderQ() *
            Eigen::MatrixXd::Identity(n, p);
        const Eigen::MatrixXd A = Q.transpose() * (K * Q).eval();
        const Eigen::MatrixXd B = Q.transpose() * (M * Q).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A, B);
        if (ges.info() != Eigen::Success)
            throw EigenSolverFailure("Rayleigh-Ritz projection failed");
        prev = ritz;
        ritz = ges.eigenvalues();
        X = Q * ges.eigenvectors();
        if (iter > 0) {
            double worst = 0.0;
            for (int i = 0; i < nev; ++i)
                worst = std::max(worst, std::abs(ritz[i] - prev[i]) /
                                            std::max(std::abs(ritz[i]), 1e-300));
            converged = worst <= 1e-13;
        }
    }
    if (!converged)
        throw EigenSolverFailure("subspace iteration did not converge in 300 iterations");
    if (!(ritz[0] > 0.0))
        throw EigenSolverFailure("nonpositive eigenvalue; operator pair not positive definite");

    return {ritz.head(nev), X.leftCols(nev)};
}

std::vector<std::pair<int, int>> degenerate_clusters(const Eigen::VectorXd& lambda,
                                                     double rel_tol) {
    std::vector<std::pair<int, int>> out;
    const int k = static_cast<int>(lambda.size());
    int begin = 0;
    for (int i = 1; i <= k; ++i) {
        if (i == k || lambda[i] - lambda[i - 1] > rel_tol * std::abs(lambda[i])) {
            out.emplace_back(begin, i);
            begin = i;
        }
    }
    return out;
}

SpectralData solve_spectrum(const MetricTree& tree, const MeshConfig& mesh, int K,
                            std::uint64_t seed) {
    if (K < 1)
        throw SchemaError("mode count must be at least 1");
    require_resolution(tree, mesh, std::max(mesh.target_modes, K));
    Assembly fine = assemble(tree, mesh);

    std::vector<int> half(mesh.elements_per_edge.size());
    for (size_t e = 0; e < half.size(); ++e)
        half[e] = std::max(2, mesh.elements_per_edge[e] / 2);
    Assembly coarse = assemble_mesh(tree, half);

    auto [vals_f, vecs] = solve_gevp(fine.stiffness, fine.mass, K, seed);
    auto [vals_c, vecs_c] = solve_gevp(coarse.stiffness, coarse.mass, K, seed + 1);
    (void)vecs_c;

    SpectralData sd;
    sd.lambda_raw = vals_f;
    sd.lambda = (4.0 * vals_f - vals_c) / 3.0;
    for (int k = 0; k < K; ++k)
        if (!(sd.lambda[k] > 0.0))
            throw EigenSolverFailure("extrapolated eigenvalue " + std::to_string(k + 1) +
                                     " is not positive; refine the mesh");

    // deterministic orthonormal basis inside numerically degenerate clusters:
    // ordered Gram-Schmidt in the mass inner product
    for (const auto& [b, e] : degenerate_clusters(sd.lambda)) {
        if (e - b < 2)
            continue;
        for (int i = b; i < e; ++i) {
            for (int j = b; j < i; ++j) {
                const double r = vecs.col(j).dot(fine.mass * vecs.col(i));
                vecs.col(i) -= r * vecs.col(j);
            }
            const Eigen::VectorXd mi = fine.mass * vecs.col(i);
            const double nrm = std::sqrt(vecs.col(i).dot(mi));
            if (!(nrm > 0.0))
                throw EigenSolverFailure("degenerate cluster collapse during orthonormalization");
            vecs.col(i) /= nrm;
        }
    }

    const int ne = tree.num_edges();
    sd.boundary = tree.boundary();
    sd.elements_per_edge = mesh.elements_per_edge;
    sd.nodes.resize(ne);
    for (int e = 0; e < ne; ++e) {
        const int n = mesh.elements_per_edge[e];
        sd.nodes[e].resize(n + 1);
        for (int j = 0; j <= n; ++j)
            sd.nodes[e][j] = j * fine.dofs.h[e];
    }

    sd.phi.resize(K);
    for (int k = 0; k < K; ++k) {
        sd.phi[k].resize(ne);
        for (int e = 0; e < ne; ++e) {
            const auto& nd = fine.dofs.node_dof[e];
            Eigen::VectorXd& v = sd.phi[k][e];
            v.setZero(static_cast<int>(nd.size()));
            for (size_t j = 0; j < nd.size(); ++j)
                if (nd[j] >= 0)
                    v[static_cast<int>(j)] = vecs(nd[j], k);
        }
    }

    const int m = sd.channels();
    sd.kappa.setZero(K, m);
    for (int c = 0; c < m; ++c) {
        const auto& inc = tree.incident(sd.boundary[c]);
        const int e = inc[0].first;
        const bool at_tail = inc[0].second;
        for (int k = 0; k < K; ++k)
            sd.kappa(k, c) = toward_derivative(sd.phi[k][e], fine.dofs.h[e], at_tail);
    }
    sd.alpha = sd.kappa.array().colwise() / sd.lambda.array().sqrt();

    // sign convention: first nonzero alpha component positive
    for (int k = 0; k < K; ++k) {
        const double rowmax = sd.alpha.row(k).cwiseAbs().maxCoeff();
        for (int c = 0; c < m; ++c) {
            if (std::abs(sd.alpha(k, c)) <= 1e-10 * rowmax)
                continue;
            if (sd.alpha(k, c) < 0.0) {
                sd.alpha.row(k) *= -1.0;
                sd.kappa.row(k) *= -1.0;
                for (auto& v : sd.phi[k])
                    v *= -1.0;
            }
            break;
        }
    }
    return sd;
}

double modal_norm(const Eigen::VectorXcd& coef, const Eigen::VectorXd& lambda, int p) {
    if (p < -1 || p > 1)
        throw SchemaError("modal norm defined for p in {-1, 0, 1}");
    if (coef.size() > lambda.size())
        throw IndexOutOfRange("state has more modes than spectral data");
    double acc = 0.0;
    for (int k = 0; k < coef.size(); ++k)
        acc += std::pow(lambda[k], p) * std::norm(coef[k]);
    return std::sqrt(acc);
}

double modal_norm(const ModalState& state, const SpectralData& sd, int p) {
    return modal_norm(state.a, sd.lambda, p);
}

WeylReport weyl_check(const SpectralData& sd, const MetricTree& tree) {
    WeylReport rep;
    rep.l_optical = tree.total_optical_length();
    const int K = sd.modes();
    rep.deviation.resize(K);
    for (int k = 0; k < K; ++k) {
        rep.deviation[k] = std::abs((k + 1) - rep.l_optical * std::sqrt(sd.lambda[k]) / kPi);
        rep.max_deviation = std::max(rep.max_deviation, rep.deviation[k]);
        if (k > 0 && sd.lambda[k] < sd.lambda[k - 1] - 1e-12 * sd.lambda[k])
            rep.monotone = false;
    }
    return rep;
}

KirchhoffReport kirchhoff_residual(const SpectralData& sd, const MetricTree& tree, int k) {
    if (k < 0 || k >= sd.modes())
        throw IndexOutOfRange("mode index out of range");
    KirchhoffReport rep;
    auto deriv = [&](int e, bool at_tail) {
        const double h = sd.nodes[e][1] - sd.nodes[e][0];
        return toward_derivative(sd.phi[k][e], h, at_tail);
    };
    for (int e = 0; e < tree.num_edges(); ++e)
        for (const bool at_tail : {true, false})
            rep.deriv_scale = std::max(rep.deriv_scale, std::abs(deriv(e, at_tail)));
    for (const int v : tree.interior()) {
        double sum = 0.0;
        for (const auto& [e, at_tail] : tree.incident(v))
            sum += deriv(e, at_tail);
        rep.residual = std::max(rep.residual, std::abs(sum));
    }
    return rep;
}

} // namespace treewave
