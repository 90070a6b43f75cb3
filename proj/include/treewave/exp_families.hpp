#pragma once

#include "treewave/spectral.hpp"

#include <complex>

namespace treewave {

// --- closed-form integral table -------------------------------------------
// All Gram entries and moment functionals reduce to these primitives. The
// sinc forms stay exact as the frequency difference approaches zero, which
// matters inside degenerate eigenvalue clusters.

// sin(x)/x with the removable singularity filled in
double sinc(double x);

// int_{t0}^{t1} cos(w t) dt
double cos_integral(double w, double t0, double t1);
// int_{t0}^{t1} sin(w t) dt
double sin_integral(double w, double t0, double t1);
// int_{t0}^{t1} sin(wa t) sin(wb t) dt
double ss_integral(double wa, double wb, double t0, double t1);
// int_{t0}^{t1} cos(wa t) cos(wb t) dt
double cc_integral(double wa, double wb, double t0, double t1);
// int_{t0}^{t1} sin(wa t) cos(wb t) dt
double sc_integral(double wa, double wb, double t0, double t1);
// int_{t0}^{t1} e^{i d t} dt
std::complex<double> cis_integral(double d, double t0, double t1);
// int_{t0}^{t1} e^{-s t} dt, overflow-safe for large s * t0 (s >= 0)
double exp_decay_integral(double s, double t0, double t1);

// --- vector exponential families -------------------------------------------

enum class FamilyKind { Sin, Cos, ExpPlus, ExpMinus, Parabolic, Schrodinger };

// family member k is amplitude row k times a scalar waveform:
//   Sin/Cos       sin(omega_k t), cos(omega_k t)      (rate = omega)
//   ExpPlus/Minus e^{+i omega_k t}, e^{-i omega_k t}  (rate = omega)
//   Parabolic     e^{-lambda_k t}                     (rate = lambda)
//   Schrodinger   e^{+i lambda_k t}                   (rate = lambda)
struct FamilySpec {
    FamilyKind kind = FamilyKind::Sin;
    Eigen::VectorXd rate;
    Eigen::MatrixXd amplitude; // K x channels
    double horizon = 0.0;
    std::vector<int> channel_vertices; // boundary vertex id per column

    int members() const { return static_cast<int>(rate.size()); }
    int channels() const { return static_cast<int>(amplitude.cols()); }
};

// family over all boundary channels, or over a restricted channel set
// (boundary order preserved; used for the all-but-one-vertex problems)
FamilySpec make_family(FamilyKind kind, const SpectralData& sd, double horizon);
FamilySpec make_family(FamilyKind kind, const SpectralData& sd, double horizon,
                       const std::vector<int>& channel_vertices);

// member k at time t (imaginary parts zero for the real kinds)
Eigen::VectorXcd eval_member(const FamilySpec& fam, int k, double t);

struct GramMatrix {
    Eigen::MatrixXcd matrix; // Hermitian; real for Sin/Cos/Parabolic
    FamilyKind kind = FamilyKind::Sin;
    double horizon = 0.0;
    int members = 0;
};

// Gram matrix of the first K members on [0, horizon], closed form, no
// quadrature; K = 0 means all members
GramMatrix gram(const FamilySpec& fam, int K = 0);
// same entries over an arbitrary window [t0, t1] (members evaluated at
// absolute time); used by the interval-shift self-checks
Eigen::MatrixXcd gram_on(const FamilySpec& fam, int K, double t0, double t1);

// 2K x 2K block Gram [[SS, SC], [CS, CC]] of the joint sin/cos family with
// shared amplitudes; the wave moment problem solves against this matrix
Eigen::MatrixXd wave_gram(const Eigen::MatrixXd& amplitude, const Eigen::VectorXd& omega,
                          double T);

struct SigmaReport {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double condition = 0.0;
};
SigmaReport sigma_min(const GramMatrix& g);
SigmaReport sigma_min(const Eigen::MatrixXcd& hermitian);
SigmaReport sigma_min(const Eigen::MatrixXd& symmetric);

// spectral-cutoff solve of the Hermitian PSD system g x = b; directions with
// eigenvalue <= eps_mach * sigma_max are dropped. With throw_on_cutoff the
// drop raises NumericallySingular instead (the control paths use that mode).
Eigen::VectorXcd gram_solve(const Eigen::MatrixXcd& g, const Eigen::VectorXcd& b,
                            bool throw_on_cutoff);
Eigen::VectorXd gram_solve(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                           bool throw_on_cutoff);

struct BiorthResult {
    Eigen::MatrixXcd b;            // column n holds the coefficients of Q'_n
    Eigen::VectorXd member_norms;  // ||Q'_n|| = sqrt((B^H G B)_nn)
    double defect = 0.0;           // max |<Q_k, Q'_n> - delta_kn|
    int rank = 0;                  // spectral-cutoff rank used
    bool singular_warning = false; // cutoff discarded at least one direction
    double condition = 0.0;
};

// biorthogonal coefficient matrix B = G^{-1} (pseudo-inverse with warning
// when numerically singular; never throws)
BiorthResult biorthogonal(const FamilySpec& fam, int K = 0);

struct GrowthFit {
    double beta = 0.0;      // slope of log||Q'_k|| against sqrt(lambda_k)
    double intercept = 0.0;
    double residual = 0.0;  // RMS residual of the linear fit
    double curvature = 0.0; // quadratic coefficient of the refit in sqrt(lambda)
    bool single_exponential = false;
    Eigen::VectorXd sqrt_lambda;
    Eigen::VectorXd log_norms;
};

// least-squares fit of the biorthogonal norm growth for a Parabolic family
GrowthFit biorth_growth_fit(const FamilySpec& fam, int K = 0);

// max_{j,k} |<odd-extended S_j, even-extended C_k>| over [-T, T], evaluated
// with the closed-form table; exact zero up to rounding, so this doubles as
// a self-check of the table
double extension_orthogonality(const SpectralData& sd, int K, double T);

} // namespace treewave
