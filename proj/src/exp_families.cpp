#include "treewave/exp_families.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace treewave {

namespace {

using cd = std::complex<double>;

constexpr double kEps = std::numeric_limits<double>::epsilon();

template <class Mat, class Vec>
Vec gram_solve_impl(const Mat& g, const Vec& b, bool throw_on_cutoff) {
    if (g.rows() != g.cols() || g.rows() != b.size())
        throw SchemaError("gram solve: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Mat> eig(g);
    if (eig.info() != Eigen::Success)
        throw EigenSolverFailure("eigendecomposition of the Gram matrix failed");
    const Eigen::VectorXd d = eig.eigenvalues();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0))
        throw NumericallySingular("Gram matrix has no positive eigenvalues");
    const double cutoff = kEps * dmax;

    Eigen::VectorXd dinv = Eigen::VectorXd::Zero(d.size());
    int dropped = 0;
    for (int i = 0; i < d.size(); ++i) {
        if (d[i] > cutoff)
            dinv[i] = 1.0 / d[i];
        else
            ++dropped;
    }
    if (dropped > 0 && throw_on_cutoff)
        throw NumericallySingular(
            "Gram matrix numerically singular (sigma_min/sigma_max below machine epsilon); "
            "reduce the mode count or enlarge the horizon");

    const Mat& v = eig.eigenvectors();
    auto apply = [&](const Vec& rhs) -> Vec {
        return v * (dinv.template cast<typename Mat::Scalar>().asDiagonal() *
                    (v.adjoint() * rhs).eval());
    };
    Vec x = apply(b);
    // two rounds of iterative refinement keep the achieved residual near
    // machine precision even when the condition number approaches 1e12
    for (int it = 0; it < 2; ++it)
        x += apply((b - g * x).eval());
    return x;
}

} // namespace

double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

double cos_integral(double w, double t0, double t1) {
    const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
    return (t1 - t0) * std::cos(w * mid) * sinc(w * half);
}

double sin_integral(double w, double t0, double t1) {
    const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
    return (t1 - t0) * std::sin(w * mid) * sinc(w * half);
}

double ss_integral(double wa, double wb, double t0, double t1) {
    return 0.5 * (cos_integral(wa - wb, t0, t1) - cos_integral(wa + wb, t0, t1));
}

double cc_integral(double wa, double wb, double t0, double t1) {
    return 0.5 * (cos_integral(wa - wb, t0, t1) + cos_integral(wa + wb, t0, t1));
}

double sc_integral(double wa, double wb, double t0, double t1) {
    return 0.5 * (sin_integral(wa - wb, t0, t1) + sin_integral(wa + wb, t0, t1));
}

std::complex<double> cis_integral(double d, double t0, double t1) {
    const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
    return (t1 - t0) * std::exp(cd(0.0, d * mid)) * sinc(d * half);
}

double exp_decay_integral(double s, double t0, double t1) {
    if (s == 0.0)
        return t1 - t0;
    return std::exp(-s * t0) * (-std::expm1(-s * (t1 - t0))) / s;
}

FamilySpec make_family(FamilyKind kind, const SpectralData& sd, double horizon) {
    return make_family(kind, sd, horizon, sd.boundary);
}

FamilySpec make_family(FamilyKind kind, const SpectralData& sd, double horizon,
                       const std::vector<int>& channel_vertices) {
    if (!(horizon > 0.0))
        throw SchemaError("family horizon must be positive");
    if (channel_vertices.empty())
        throw InconsistentChannels("no control channels selected");

    // keep boundary order; reject unknown or duplicate vertices
    std::vector<int> cols;
    for (size_t i = 0; i < sd.boundary.size(); ++i)
        if (std::count(channel_vertices.begin(), channel_vertices.end(), sd.boundary[i]))
            cols.push_back(static_cast<int>(i));
    if (cols.size() != channel_vertices.size())
        throw InconsistentChannels("channel list must be distinct boundary vertices");

    FamilySpec fam;
    fam.kind = kind;
    fam.horizon = horizon;
    fam.rate = (kind == FamilyKind::Parabolic || kind == FamilyKind::Schrodinger)
                   ? sd.lambda
                   : Eigen::VectorXd(sd.lambda.cwiseSqrt());
    fam.amplitude.resize(sd.modes(), static_cast<int>(cols.size()));
    fam.channel_vertices.reserve(cols.size());
    for (size_t j = 0; j < cols.size(); ++j) {
        fam.amplitude.col(static_cast<int>(j)) = sd.alpha.col(cols[j]);
        fam.channel_vertices.push_back(sd.boundary[cols[j]]);
    }
    return fam;
}

Eigen::VectorXcd eval_member(const FamilySpec& fam, int k, double t) {
    if (k < 0 || k >= fam.members())
        throw IndexOutOfRange("family member index out of range");
    const double slack = 1e-9 * std::max(1.0, fam.horizon);
    if (t < -slack || t > fam.horizon + slack)
        throw IndexOutOfRange("evaluation time outside [0, horizon]");
    cd w;
    switch (fam.kind) {
    case FamilyKind::Sin:
        w = std::sin(fam.rate[k] * t);
        break;
    case FamilyKind::Cos:
        w = std::cos(fam.rate[k] * t);
        break;
    case FamilyKind::ExpPlus:
        w = std::exp(cd(0.0, fam.rate[k] * t));
        break;
    case FamilyKind::ExpMinus:
        w = std::exp(cd(0.0, -fam.rate[k] * t));
        break;
    case FamilyKind::Parabolic:
        w = std::exp(-fam.rate[k] * t);
        break;
    case FamilyKind::Schrodinger:
        w = std::exp(cd(0.0, fam.rate[k] * t));
        break;
    }
    return fam.amplitude.row(k).transpose().cast<cd>() * w;
}

Eigen::MatrixXcd gram_on(const FamilySpec& fam, int K, double t0, double t1) {
    if (K == 0)
        K = fam.members();
    if (K < 1 || K > fam.members())
        throw IndexOutOfRange("Gram truncation count out of range");
    const Eigen::MatrixXd amp = fam.amplitude.topRows(K);
    const Eigen::MatrixXd chan = amp * amp.transpose(); // channel dot products
    Eigen::MatrixXcd g(K, K);
    for (int j = 0; j < K; ++j)
        for (int k = 0; k < K; ++k) {
            const double rj = fam.rate[j], rk = fam.rate[k];
            cd val;
            switch (fam.kind) {
            case FamilyKind::Sin:
                val = ss_integral(rj, rk, t0, t1);
                break;
            case FamilyKind::Cos:
                val = cc_integral(rj, rk, t0, t1);
                break;
            case FamilyKind::ExpPlus:
                val = cis_integral(rj - rk, t0, t1);
                break;
            case FamilyKind::ExpMinus:
                val = cis_integral(rk - rj, t0, t1);
                break;
            case FamilyKind::Parabolic:
                val = exp_decay_integral(rj + rk, t0, t1);
                break;
            case FamilyKind::Schrodinger:
                val = cis_integral(rj - rk, t0, t1);
                break;
            }
            g(j, k) = chan(j, k) * val;
        }
    return g;
}

GramMatrix gram(const FamilySpec& fam, int K) {
    GramMatrix g;
    g.matrix = gram_on(fam, K, 0.0, fam.horizon);
    g.kind = fam.kind;
    g.horizon = fam.horizon;
    g.members = static_cast<int>(g.matrix.rows());
    return g;
}

Eigen::MatrixXd wave_gram(const Eigen::MatrixXd& amplitude, const Eigen::VectorXd& omega,
                          double T) {
    const int K = static_cast<int>(omega.size());
    if (amplitude.rows() != K)
        throw SchemaError("amplitude row count does not match frequency count");
    const Eigen::MatrixXd chan = amplitude * amplitude.transpose();
    Eigen::MatrixXd g(2 * K, 2 * K);
    for (int j = 0; j < K; ++j)
        for (int k = 0; k < K; ++k) {
            g(j, k) = chan(j, k) * ss_integral(omega[j], omega[k], 0.0, T);
            g(j, K + k) = chan(j, k) * sc_integral(omega[j], omega[k], 0.0, T);
            g(K + j, k) = chan(j, k) * sc_integral(omega[k], omega[j], 0.0, T);
            g(K + j, K + k) = chan(j, k) * cc_integral(omega[j], omega[k], 0.0, T);
        }
    return g;
}

namespace {

SigmaReport sigma_from_eigs(const Eigen::VectorXd& d) {
    SigmaReport rep;
    rep.sigma_max = std::max(0.0, d.maxCoeff());
    rep.sigma_min = std::max(0.0, d.minCoeff());
    rep.condition = rep.sigma_min > 0.0 ? rep.sigma_max / rep.sigma_min
                                        : std::numeric_limits<double>::infinity();
    return rep;
}

} // namespace

SigmaReport sigma_min(const Eigen::MatrixXcd& hermitian) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(hermitian, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
        throw EigenSolverFailure("Hermitian eigendecomposition failed");
    return sigma_from_eigs(eig.eigenvalues());
}

SigmaReport sigma_min(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
        throw EigenSolverFailure("symmetric eigendecomposition failed");
    return sigma_from_eigs(eig.eigenvalues());
}

SigmaReport sigma_min(const GramMatrix& g) { return sigma_min(g.matrix); }

Eigen::VectorXcd gram_solve(const Eigen::MatrixXcd& g, const Eigen::VectorXcd& b,
                            bool throw_on_cutoff) {
    return gram_solve_impl(g, b, throw_on_cutoff);
}

Eigen::VectorXd gram_solve(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                           bool throw_on_cutoff) {
    return gram_solve_impl(g, b, throw_on_cutoff);
}

BiorthResult biorthogonal(const FamilySpec& fam, int K) {
    const Eigen::MatrixXcd g = gram_on(fam, K, 0.0, fam.horizon);
    const int n = static_cast<int>(g.rows());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(g);
    if (eig.info() != Eigen::Success)
        throw EigenSolverFailure("eigendecomposition of the Gram matrix failed");
    const Eigen::VectorXd d = eig.eigenvalues();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0))
        throw NumericallySingular("Gram matrix has no positive eigenvalues");
    const double cutoff = kEps * dmax;

    BiorthResult res;
    Eigen::VectorXd dinv = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        if (d[i] > cutoff) {
            dinv[i] = 1.0 / d[i];
            ++res.rank;
        }
    res.singular_warning = res.rank < n;
    const double dmin = std::max(0.0, d.minCoeff());
    res.condition = dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();

    const Eigen::MatrixXcd& v = eig.eigenvectors();
    res.b = v * dinv.cast<cd>().asDiagonal() * v.adjoint();

    // Newton refinement of the (pseudo-)inverse; dropped directions are fixed
    // points, full-rank error contracts quadratically
    auto defect_of = [&](const Eigen::MatrixXcd& b) {
        Eigen::MatrixXcd r = g * b;
        for (int i = 0; i < n; ++i)
            r(i, i) -= 1.0;
        return r.cwiseAbs().maxCoeff();
    };
    res.defect = defect_of(res.b);
    if (!res.singular_warning) {
        for (int it = 0; it < 3 && res.defect > 1e-14; ++it) {
            const Eigen::MatrixXcd refined = res.b * (2.0 * Eigen::MatrixXcd::Identity(n, n) -
                                                      g * res.b);
            const double dnew = defect_of(refined);
            if (dnew >= res.defect)
                break;
            res.b = refined;
            res.defect = dnew;
        }
    }

    const Eigen::MatrixXcd bgb = res.b.adjoint() * (g * res.b);
    res.member_norms = bgb.diagonal().real().cwiseMax(0.0).cwiseSqrt();
    return res;
}

GrowthFit biorth_growth_fit(const FamilySpec& fam, int K) {
    if (fam.kind != FamilyKind::Parabolic)
        throw SchemaError("growth fit defined for the heat-kernel family");
    const BiorthResult bio = biorthogonal(fam, K);
    const int n = static_cast<int>(bio.member_norms.size());
    if (n < 2)
        throw SchemaError("growth fit needs at least two members");

    GrowthFit fit;
    fit.sqrt_lambda = fam.rate.head(n).cwiseSqrt();
    fit.log_norms.resize(n);
    for (int i = 0; i < n; ++i)
        fit.log_norms[i] = std::log(std::max(bio.member_norms[i], 1e-300));

    const double xm = fit.sqrt_lambda.mean(), ym = fit.log_norms.mean();
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = fit.sqrt_lambda[i] - xm;
        sxx += dx * dx;
        sxy += dx * (fit.log_norms[i] - ym);
    }
    if (!(sxx > 0.0))
        throw SchemaError("growth fit needs distinct rates");
    fit.beta = sxy / sxx;
    fit.intercept = ym - fit.beta * xm;

    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = fit.log_norms[i] - (fit.intercept + fit.beta * fit.sqrt_lambda[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);

    // growth is at most single-exponential in sqrt(lambda) when a quadratic
    // refit shows no significant convex curvature; concave scatter is fine
    const double spread =
        std::max(fit.log_norms.maxCoeff() - fit.log_norms.minCoeff(), 1e-12);
    if (n >= 3) {
        Eigen::MatrixXd v(n, 3);
        for (int i = 0; i < n; ++i) {
            const double x = fit.sqrt_lambda[i] - xm;
            v(i, 0) = 1.0;
            v(i, 1) = x;
            v(i, 2) = x * x;
        }
        const Eigen::VectorXd q = v.colPivHouseholderQr().solve(fit.log_norms);
        fit.curvature = q[2];
        const double half = 0.5 * (fit.sqrt_lambda[n - 1] - fit.sqrt_lambda[0]);
        fit.single_exponential = fit.curvature * half * half <= 0.1 * spread;
    } else {
        fit.single_exponential = true;
    }
    return fit;
}

double extension_orthogonality(const SpectralData& sd, int K, double T) {
    if (K < 1 || K > sd.modes())
        throw IndexOutOfRange("mode count out of range");
    if (!(T > 0.0))
        throw SchemaError("horizon must be positive");
    const Eigen::MatrixXd amp = sd.alpha.topRows(K);
    const Eigen::MatrixXd chan = amp * amp.transpose();
    const Eigen::VectorXd omega = sd.lambda.head(K).cwiseSqrt();
    double worst = 0.0;
    for (int j = 0; j < K; ++j)
        for (int k = 0; k < K; ++k)
            worst = std::max(worst,
                             std::abs(chan(j, k) * sc_integral(omega[j], omega[k], -T, T)));
    return worst;
}

} // namespace treewave
