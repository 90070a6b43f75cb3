#pragma once

#include "treewave/control.hpp"

#include <string>
#include <vector>

namespace treewave {

// modal trajectory on a strictly increasing time grid; row i holds the
// coefficients at times[i], cdot is filled for the wave equation only
struct Trajectory {
    Equation equation = Equation::Wave;
    Eigen::VectorXd times;
    Eigen::MatrixXcd c;
    Eigen::MatrixXcd cdot;
    std::string provenance; // "spectral" or "fdtd"

    int modes() const { return static_cast<int>(c.cols()); }
};

// per-edge nodal values on uniform edge meshes (node 0 sits at the tail)
struct GridState {
    std::vector<Eigen::VectorXd> values;
    std::vector<Eigen::VectorXd> velocity; // empty when not tracked
    std::vector<int> elements_per_edge;
    double time = 0.0;
};

// Wave coefficients under the boundary control, starting from rest:
//   c_k(t) = -sum_gamma alpha_k(gamma) int_0^t sin(omega_k (t-s)) f(gamma, s) ds
// and cdot with the cosine kernel and kappa weights. Family-span controls
// integrate in closed form; sampled controls use per-panel Gauss quadrature
// (the sample step must resolve the fastest retained mode, at least 8
// samples per period, otherwise UnderresolvedQuadrature). The control is
// extended by zero past its horizon. `initial` adds free evolution from
// (a, b); the controlled problem itself starts from rest. Empty `times`
// means 201 uniform samples of [0, T].
Trajectory wave_forward(const SpectralData& sd, const BoundaryControl& ctl, double T, int K,
                        Eigen::VectorXd times = {}, const ModalState* initial = nullptr);

// c_k(t) = a_k e^{-lambda_k t} - sum_gamma kappa_k(gamma) int_0^t
//          e^{-lambda_k (t-s)} f(gamma, s) ds
Trajectory heat_forward(const SpectralData& sd, const Eigen::VectorXcd& a,
                        const BoundaryControl& ctl, double tau, int K,
                        Eigen::VectorXd times = {});

// c_k(t) = a_k e^{i lambda_k t} - sum_gamma kappa_k(gamma) int_0^t
//          e^{i lambda_k (t-s)} f(gamma, s) ds
Trajectory schrodinger_forward(const SpectralData& sd, const Eigen::VectorXcd& a,
                               const BoundaryControl& ctl, double tau, int K,
                               Eigen::VectorXd times = {});

struct FdtdConfig {
    std::vector<int> elements_per_edge;
    double dt = 0.0; // upper bound on the step; 0 picks 0.9 of the CFL limit

    static FdtdConfig uniform(const MetricTree& tree, int elements);
};

// independent leapfrog oracle for the controlled wave system: interior nodes
// use the standard three-point update, interior vertices a half-cell flux
// balance, boundary vertices carry the Dirichlet control values. Starts from
// rest; returns the state and a centered-difference velocity at T.
// Steps exceeding 0.9 of the CFL limit min(sqrt(rho) dx) raise CFLViolation.
GridState fdtd_wave(const MetricTree& tree, const BoundaryControl& ctl, double T,
                    const FdtdConfig& config);

// discrete wave energy 0.5 (v' M v + u' K u) of a grid state with velocity
double grid_energy(const MetricTree& tree, const GridState& state);

// rho-weighted modal coefficients a_k = int u phi_k rho dx (and b from the
// velocity when present) for the first K modes; grids that do not match the
// spectral mesh are P1-interpolated onto it first
ModalState project(const GridState& state, const SpectralData& sd, const MetricTree& tree,
                   int K);

// nodal samples of sum_k Re(a_k) phi_k on the requested mesh (velocity from
// b when present)
GridState lift(const ModalState& modal, const SpectralData& sd, const MetricTree& tree,
               const std::vector<int>& elements_per_edge);

} // namespace treewave
