#pragma once

#include "treewave/metric_graph.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

namespace treewave {

// Mesh resolution for the P1 eigensolve. The resolution rule asks for at
// least 20 nodes per wavelength of the highest requested mode; with the
// Weyl estimate sqrt(lambda_K) ~ K*pi/L_opt this becomes
//   elements_on_edge >= 10 * K * (edge optical length) / (total optical length).
struct MeshConfig {
    std::vector<int> elements_per_edge; // aligned with spec().edges order
    int target_modes = 1;

    // smallest even element counts satisfying the resolution rule
    static MeshConfig for_modes(const MetricTree& tree, int modes);
    // same element count on every edge; caller asserts it resolves `modes`
    static MeshConfig uniform(const MetricTree& tree, int elements, int modes);
};

// node -> degree-of-freedom map for the Dirichlet problem; -1 marks an
// eliminated boundary node
struct DofMap {
    std::vector<std::vector<int>> node_dof; // [edge array index][node index]
    std::vector<double> h;                  // element width per edge
    int count = 0;
};

struct Assembly {
    Eigen::SparseMatrix<double> stiffness;
    Eigen::SparseMatrix<double> mass; // rho-weighted, consistent
    DofMap dofs;
};

// consistent P1 element mass entries for the density profile on [x0, x1];
// exact for constant and linear profiles, 4-point Gauss for sampled ones
struct ElementMass {
    double m00 = 0.0, m01 = 0.0, m11 = 0.0;
};
ElementMass element_mass(const Density& rho, double x0, double x1);

// stiffness/mass pair with shared interior-vertex DOFs and Dirichlet
// elimination on the boundary
Assembly assemble(const MetricTree& tree, const MeshConfig& mesh);

// smallest `nev` eigenpairs of K x = lambda M x (ascending, M-orthonormal
// columns) by block inverse subspace iteration with Rayleigh-Ritz projection
std::pair<Eigen::VectorXd, Eigen::MatrixXd> solve_gevp(const Eigen::SparseMatrix<double>& K,
                                                       const Eigen::SparseMatrix<double>& M,
                                                       int nev, std::uint64_t seed);

struct SpectralData {
    Eigen::VectorXd lambda;     // Richardson-extrapolated eigenvalues
    Eigen::VectorXd lambda_raw; // fine-mesh Ritz values (for convergence studies)
    Eigen::MatrixXd kappa;      // K x m boundary derivative traces, toward the vertex
    Eigen::MatrixXd alpha;      // kappa row k divided by sqrt(lambda_k)
    std::vector<int> boundary;  // boundary vertex ids, ascending; column order of kappa/alpha
    std::vector<int> elements_per_edge;
    std::vector<std::vector<double>> nodes;        // [edge array index][node] coordinate
    std::vector<std::vector<Eigen::VectorXd>> phi; // [mode][edge array index] nodal values

    int modes() const { return static_cast<int>(lambda.size()); }
    int channels() const { return static_cast<int>(boundary.size()); }
    Eigen::VectorXd omega() const { return lambda.cwiseSqrt(); }
};

// first K Dirichlet eigenpairs with rho-orthonormal eigenfunctions, boundary
// traces and trace vectors; eigenvalues Richardson-extrapolated against the
// half-resolution mesh; sign convention: first nonzero alpha component
// (boundary order) is positive
SpectralData solve_spectrum(const MetricTree& tree, const MeshConfig& mesh, int K,
                            std::uint64_t seed = 12345);

// index ranges [first, last) of numerically degenerate eigenvalue clusters,
// |lambda_i - lambda_j| <= rel_tol * lambda_j
std::vector<std::pair<int, int>> degenerate_clusters(const Eigen::VectorXd& lambda,
                                                     double rel_tol = 1e-8);

// coefficient sequences of a modal state; b carries wave velocity data and
// may be empty for the first-order equations
struct ModalState {
    Eigen::VectorXcd a;
    Eigen::VectorXcd b;
    int modes() const { return static_cast<int>(a.size()); }
};

// (sum_k lambda_k^p |c_k|^2)^{1/2} for p in {-1, 0, 1}
double modal_norm(const Eigen::VectorXcd& coef, const Eigen::VectorXd& lambda, int p);
double modal_norm(const ModalState& state, const SpectralData& sd, int p);

struct WeylReport {
    double max_deviation = 0.0; // max_k |k - L_opt * sqrt(lambda_k) / pi|
    double l_optical = 0.0;
    bool monotone = true;
    Eigen::VectorXd deviation;
};
WeylReport weyl_check(const SpectralData& sd, const MetricTree& tree);

struct KirchhoffReport {
    double residual = 0.0;    // max over interior vertices of |sum of toward derivatives|
    double deriv_scale = 0.0; // max |toward derivative| over all vertex-edge incidences
};
KirchhoffReport kirchhoff_residual(const SpectralData& sd, const MetricTree& tree, int k);

} // namespace treewave
