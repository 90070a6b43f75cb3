#pragma once

#include "treewave/exp_families.hpp"

#include <string>
#include <utility>
#include <vector>

namespace treewave {

enum class Equation { Wave, Heat, Schrodinger };

// moment-problem statement: reach (a, b) from rest (wave) or annihilate the
// initial state a (heat, schrodinger) through the listed boundary vertices
struct ControlProblem {
    Equation equation = Equation::Wave;
    const SpectralData* spectral = nullptr;
    std::vector<int> channels; // boundary vertex ids, ascending
    double horizon = 0.0;      // T (wave) or tau (first-order)
    ModalState state;          // wave: target (a, b); heat/schrodinger: initial a
    int truncation = 0;        // K, number of constrained modes
};

ControlProblem make_problem(Equation eq, const SpectralData& sd, const ModalState& state,
                            double horizon, int K, std::vector<int> channels = {});

// boundary list with one vertex removed (the one-excluded-vertex problems)
std::vector<int> all_but(const std::vector<int>& boundary, int excluded);

// d(Omega) for the full boundary; 2 d_1(gamma1) when exactly one boundary
// vertex is excluded
double default_horizon(const MetricTree& tree, const std::vector<int>& channels);

// one family-span component of a control; contributes
//   sum_k coef_k * member_k(horizon - t),  conjugated when `conjugate` is set
struct ControlTerm {
    FamilySpec fam;
    Eigen::VectorXcd coef;
    bool conjugate = false;
};

// synthesized boundary control: family-span representation plus a uniform
// sample grid; values are real for wave/heat and complex for schrodinger
struct BoundaryControl {
    Equation equation = Equation::Wave;
    double horizon = 0.0;
    std::vector<int> channel_vertices; // excluded vertices simply have no column
    std::vector<ControlTerm> terms;
    Eigen::VectorXd grid;        // uniform times in [0, horizon]
    Eigen::MatrixXcd grid_values; // grid.size() x channels

    int channels() const { return static_cast<int>(channel_vertices.size()); }
    // value at time t: family evaluation, or linear interpolation of the grid
    // for controls that carry samples only
    Eigen::VectorXcd value(double t) const;
    Eigen::MatrixXcd sample(const Eigen::VectorXd& times) const;
    // L_2([0,horizon]; C^channels) norm, closed form over the family span
    double l2_norm() const;
};

struct SynthesisReport {
    Eigen::VectorXd residual; // |achieved - target| per moment (2K wave, K otherwise)
    double max_residual = 0.0;
    double tail_bound = 0.0;  // Cauchy-Schwarz bound on spill onto modes > K
    double sigma_min = 0.0;   // of the solved Gram matrix
    double condition = 0.0;
    double control_l2 = 0.0;
    std::vector<std::string> warnings;
};

// minimal-norm control driving rest to (a, b) at time T; solves the 2K x 2K
// sin/cos moment system
std::pair<BoundaryControl, SynthesisReport> wave_control(const ControlProblem& problem);
// null control for the heat equation via the truncated biorthogonal family
std::pair<BoundaryControl, SynthesisReport> heat_null_control(const ControlProblem& problem);
// null control for the schrodinger equation via the Hermitian Gram solve
std::pair<BoundaryControl, SynthesisReport> schrodinger_control(const ControlProblem& problem);
// dispatch on problem.equation
std::pair<BoundaryControl, SynthesisReport> synthesize(const ControlProblem& problem);

// per-moment deviation |achieved - target| for all modes below K_check,
// including the unconstrained tail; target moments are zero-padded past
// problem.truncation. Closed form for family-span controls, panel quadrature
// against the sample grid otherwise. Layout matches the report residual,
// with wave moments as [positions; velocities].
Eigen::VectorXd moment_residual(const BoundaryControl& ctl, const SpectralData& sd,
                                const ControlProblem& problem, int K_check);

} // namespace treewave
