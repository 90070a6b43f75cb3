#include "treewave/control.hpp"

#include "treewave/errors.hpp"

#include <algorithm>
#include <cmath>

namespace treewave {

namespace {

using cd = std::complex<double>;

const SpectralData& spectral_of(const ControlProblem& p) {
    if (p.spectral == nullptr)
        throw SchemaError("control problem carries no spectral data");
    return *p.spectral;
}

void check_problem(const ControlProblem& p) {
    const auto& sd = spectral_of(p);
    if (p.truncation < 1)
        throw SchemaError("truncation must be at least 1");
    if (p.truncation > sd.modes())
        throw IndexOutOfRange("truncation exceeds the computed mode count");
    if (!(p.horizon > 0.0))
        throw SchemaError("control horizon must be positive");
}

// first K coefficients, zero-padded, imaginary parts rejected
Eigen::VectorXd padded_real(const Eigen::VectorXcd& v, int K, const char* what) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
    const int n = std::min(static_cast<int>(v.size()), K);
    if (n == 0)
        return out;
    const double scale = std::max(1.0, v.head(n).cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
        if (std::abs(v[i].imag()) > 1e-13 * scale)
            throw SchemaError(std::string(what) + " coefficients must be real");
        out[i] = v[i].real();
    }
    return out;
}

Eigen::VectorXcd padded_complex(const Eigen::VectorXcd& v, int K) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(K);
    out.head(std::min(static_cast<int>(v.size()), K)) =
        v.head(std::min(static_cast<int>(v.size()), K));
    return out;
}

// family restricted to its first K members
FamilySpec head_family(const FamilySpec& fam, int K, FamilyKind kind) {
    FamilySpec out = fam;
    out.kind = kind;
    out.rate = fam.rate.head(K);
    out.amplitude = fam.amplitude.topRows(K);
    return out;
}

// scalar waveform after optional conjugation: sin/cos(p t), e^{i p t}, e^{-p t}
struct Waveform {
    enum Type { SinT, CosT, Cis, Decay } type;
    double p;
};

Waveform waveform_of(const FamilySpec& fam, bool conjugate, int k) {
    const double r = fam.rate[k];
    switch (fam.kind) {
    case FamilyKind::Sin:
        return {Waveform::SinT, r};
    case FamilyKind::Cos:
        return {Waveform::CosT, r};
    case FamilyKind::ExpPlus:
        return {Waveform::Cis, conjugate ? -r : r};
    case FamilyKind::ExpMinus:
        return {Waveform::Cis, conjugate ? r : -r};
    case FamilyKind::Schrodinger:
        return {Waveform::Cis, conjugate ? -r : r};
    case FamilyKind::Parabolic:
        return {Waveform::Decay, r};
    }
    throw SchemaError("unknown family kind");
}

// int_{t0}^{t1} conj(w_a(t)) w_b(t) dt
cd waveform_cross(const Waveform& a, const Waveform& b, double t0, double t1) {
    const bool trig_a = a.type == Waveform::SinT || a.type == Waveform::CosT;
    const bool trig_b = b.type == Waveform::SinT || b.type == Waveform::CosT;
    if (trig_a && trig_b) {
        if (a.type == Waveform::SinT && b.type == Waveform::SinT)
            return ss_integral(a.p, b.p, t0, t1);
        if (a.type == Waveform::CosT && b.type == Waveform::CosT)
            return cc_integral(a.p, b.p, t0, t1);
        if (a.type == Waveform::SinT)
            return sc_integral(a.p, b.p, t0, t1);
        return sc_integral(b.p, a.p, t0, t1);
    }
    if (a.type == Waveform::Cis && b.type == Waveform::Cis)
        return cis_integral(b.p - a.p, t0, t1);
    if (a.type == Waveform::Decay && b.type == Waveform::Decay)
        return exp_decay_integral(a.p + b.p, t0, t1);
    throw SchemaError("mixed waveform kinds in one inner product are unsupported");
}

// <v_n, g> for the moment representer v_n of the check family (conjugated
// member for schrodinger) against the control's family span, closed form
cd closed_form_moment(const FamilySpec& check, bool conj_check, int n,
                      const BoundaryControl& ctl) {
    cd acc = 0.0;
    const Waveform wn = waveform_of(check, conj_check, n);
    for (const auto& term : ctl.terms) {
        if (term.fam.channels() != check.channels())
            throw InconsistentChannels("control and check families disagree on channels");
        for (int k = 0; k < term.coef.size(); ++k) {
            const double chan = check.amplitude.row(n).dot(term.fam.amplitude.row(k));
            if (chan == 0.0 || term.coef[k] == cd(0.0))
                continue;
            acc += term.coef[k] * chan *
                   waveform_cross(wn, waveform_of(term.fam, term.conjugate, k), 0.0,
                                  ctl.horizon);
        }
    }
    return acc;
}

// target moments on the moment scale: wave [-a; -b/omega], heat/schrodinger
// a_k e^{-lambda_k tau} / sqrt(lambda_k) (with the phase for schrodinger)
Eigen::VectorXcd target_moments(const ControlProblem& p) {
    const auto& sd = spectral_of(p);
    const int K = p.truncation;
    if (p.equation == Equation::Wave) {
        const Eigen::VectorXd a = padded_real(p.state.a, K, "wave target");
        const Eigen::VectorXd b = padded_real(p.state.b, K, "wave target");
        const Eigen::VectorXd omega = sd.omega().head(K);
        Eigen::VectorXcd m(2 * K);
        m.head(K) = (-a).cast<cd>();
        m.tail(K) = (-(b.array() / omega.array())).matrix().cast<cd>();
        return m;
    }
    Eigen::VectorXcd m(K);
    if (p.equation == Equation::Heat) {
        const Eigen::VectorXd a = padded_real(p.state.a, K, "heat initial state");
        for (int k = 0; k < K; ++k)
            m[k] = a[k] * std::exp(-sd.lambda[k] * p.horizon) / std::sqrt(sd.lambda[k]);
        return m;
    }
    const Eigen::VectorXcd a = padded_complex(p.state.a, K);
    for (int k = 0; k < K; ++k)
        m[k] = a[k] * std::exp(cd(0.0, sd.lambda[k] * p.horizon)) / std::sqrt(sd.lambda[k]);
    return m;
}

// default sample grid: 40 samples per shortest waveform period
void fill_grid(BoundaryControl& ctl) {
    double rate = 0.0;
    for (const auto& term : ctl.terms)
        if (term.fam.rate.size() > 0)
            rate = std::max(rate, term.fam.rate.cwiseAbs().maxCoeff());
    rate = std::max(rate, M_PI / ctl.horizon);
    const double dt = 2.0 * M_PI / (40.0 * rate);
    const int n = std::min(400000, std::max(16, static_cast<int>(std::ceil(ctl.horizon / dt))));
    ctl.grid = Eigen::VectorXd::LinSpaced(n + 1, 0.0, ctl.horizon);
    ctl.grid_values = ctl.sample(ctl.grid);
}

void warn_on_condition(SynthesisReport& rep) {
    if (!(rep.condition < 1e10))
        rep.warnings.push_back("gram condition exceeds 1e10; moment residuals are unreliable");
}

// largest L_2 norm of a tail member (modes K..modes) over the control channels
double tail_member_norm(const FamilySpec& fam, const ControlProblem& p) {
    const auto& sd = spectral_of(p);
    const double T = p.horizon;
    int lo = p.truncation, hi = fam.members();
    if (lo >= hi)
        lo = 0; // no computed tail modes: fall back to the constrained range
    double worst = 0.0;
    for (int n = lo; n < hi; ++n) {
        const double chan = fam.amplitude.row(n).squaredNorm();
        double sq = 0.0;
        switch (p.equation) {
        case Equation::Wave:
            sq = chan * std::max(ss_integral(sd.omega()[n], sd.omega()[n], 0.0, T),
                                 cc_integral(sd.omega()[n], sd.omega()[n], 0.0, T));
            break;
        case Equation::Heat:
            sq = chan * exp_decay_integral(2.0 * sd.lambda[n], 0.0, T);
            break;
        case Equation::Schrodinger:
            sq = chan * T;
            break;
        }
        worst = std::max(worst, sq);
    }
    return std::sqrt(worst);
}

} // namespace

ControlProblem make_problem(Equation eq, const SpectralData& sd, const ModalState& state,
                            double horizon, int K, std::vector<int> channels) {
    ControlProblem p;
    p.equation = eq;
    p.spectral = &sd;
    p.channels = channels.empty() ? sd.boundary : std::move(channels);
    p.horizon = horizon;
    p.state = state;
    p.truncation = K;
    return p;
}

std::vector<int> all_but(const std::vector<int>& boundary, int excluded) {
    std::vector<int> out;
    bool found = false;
    for (int v : boundary) {
        if (v == excluded) {
            found = true;
            continue;
        }
        out.push_back(v);
    }
    if (!found)
        throw InconsistentChannels("excluded vertex is not a boundary vertex");
    if (out.empty())
        throw InconsistentChannels("channel set is empty after the exclusion");
    return out;
}

double default_horizon(const MetricTree& tree, const std::vector<int>& channels) {
    const auto& gamma = tree.boundary();
    std::vector<int> missing;
    for (int v : gamma)
        if (std::find(channels.begin(), channels.end(), v) == channels.end())
            missing.push_back(v);
    for (int v : channels)
        if (std::find(gamma.begin(), gamma.end(), v) == gamma.end())
            throw InconsistentChannels("channel is not a boundary vertex");
    if (missing.empty())
        return optical_diameter(tree).value;
    if (missing.size() == 1)
        return 2.0 * eccentricity(tree, missing.front());
    throw SchemaError("no default horizon when more than one boundary vertex is excluded");
}

Eigen::VectorXcd BoundaryControl::value(double t) const {
    if (!terms.empty()) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(channels());
        for (const auto& term : terms)
            for (int k = 0; k < term.coef.size(); ++k) {
                if (term.coef[k] == cd(0.0))
                    continue;
                const Eigen::VectorXcd mk = eval_member(term.fam, k, horizon - t);
                v += term.coef[k] * (term.conjugate ? mk.conjugate() : mk);
            }
        return v;
    }
    if (grid.size() < 2)
        throw SchemaError("control carries neither a family span nor a sample grid");
    const double tc = std::clamp(t, grid[0], grid[grid.size() - 1]);
    const double step = grid[1] - grid[0];
    const int i =
        std::min(static_cast<int>(grid.size()) - 2, static_cast<int>((tc - grid[0]) / step));
    const double w = (tc - grid[i]) / (grid[i + 1] - grid[i]);
    return (1.0 - w) * grid_values.row(i).transpose() + w * grid_values.row(i + 1).transpose();
}

Eigen::MatrixXcd BoundaryControl::sample(const Eigen::VectorXd& times) const {
    Eigen::MatrixXcd out(times.size(), channels());
    for (int i = 0; i < times.size(); ++i)
        out.row(i) = value(times[i]).transpose();
    return out;
}

double BoundaryControl::l2_norm() const {
    if (terms.empty()) {
        if (grid.size() < 2)
            return 0.0;
        double acc = 0.0; // trapezoid over the sample grid
        for (int i = 0; i + 1 < grid.size(); ++i)
            acc += 0.5 * (grid[i + 1] - grid[i]) *
                   (grid_values.row(i).squaredNorm() + grid_values.row(i + 1).squaredNorm());
        return std::sqrt(acc);
    }
    cd acc = 0.0;
    for (const auto& ta : terms)
        for (const auto& tb : terms)
            for (int k = 0; k < ta.coef.size(); ++k) {
                if (ta.coef[k] == cd(0.0))
                    continue;
                for (int l = 0; l < tb.coef.size(); ++l) {
                    const double chan = ta.fam.amplitude.row(k).dot(tb.fam.amplitude.row(l));
                    if (chan == 0.0 || tb.coef[l] == cd(0.0))
                        continue;
                    acc += std::conj(ta.coef[k]) * tb.coef[l] * chan *
                           waveform_cross(waveform_of(ta.fam, ta.conjugate, k),
                                          waveform_of(tb.fam, tb.conjugate, l), 0.0, horizon);
                }
            }
    return std::sqrt(std::max(0.0, acc.real()));
}

std::pair<BoundaryControl, SynthesisReport> wave_control(const ControlProblem& problem) {
    if (problem.equation != Equation::Wave)
        throw SchemaError("wave control expects a wave problem");
    check_problem(problem);
    const auto& sd = spectral_of(problem);
    const int K = problem.truncation;
    const double T = problem.horizon;

    const FamilySpec fam = make_family(FamilyKind::Sin, sd, T, problem.channels);
    const Eigen::MatrixXd amp = fam.amplitude.topRows(K);
    const Eigen::VectorXd omega = sd.omega().head(K);
    const Eigen::MatrixXd g = wave_gram(amp, omega, T);
    const Eigen::VectorXd m = target_moments(problem).real();
    const Eigen::VectorXd z = gram_solve(g, m, true);

    BoundaryControl ctl;
    ctl.equation = Equation::Wave;
    ctl.horizon = T;
    ctl.channel_vertices = fam.channel_vertices;
    ctl.terms.resize(2);
    ctl.terms[0].fam = head_family(fam, K, FamilyKind::Sin);
    ctl.terms[0].coef = z.head(K).cast<cd>();
    ctl.terms[1].fam = head_family(fam, K, FamilyKind::Cos);
    ctl.terms[1].coef = z.tail(K).cast<cd>();
    fill_grid(ctl);

    SynthesisReport rep;
    rep.residual = (g * z - m).cwiseAbs();
    rep.max_residual = rep.residual.maxCoeff();
    const SigmaReport sig = sigma_min(g);
    rep.sigma_min = sig.sigma_min;
    rep.condition = sig.condition;
    rep.control_l2 = std::sqrt(std::max(0.0, z.dot(g * z)));
    rep.tail_bound = tail_member_norm(fam, problem) * rep.control_l2;
    warn_on_condition(rep);
    return {std::move(ctl), std::move(rep)};
}

std::pair<BoundaryControl, SynthesisReport> heat_null_control(const ControlProblem& problem) {
    if (problem.equation != Equation::Heat)
        throw SchemaError("heat control expects a heat problem");
    check_problem(problem);
    const auto& sd = spectral_of(problem);
    const int K = problem.truncation;

    const FamilySpec fam = make_family(FamilyKind::Parabolic, sd, problem.horizon,
                                       problem.channels);
    const Eigen::MatrixXd g = gram(fam, K).matrix.real();
    const Eigen::VectorXd m = target_moments(problem).real();
    const Eigen::VectorXd z = gram_solve(g, m, true);

    BoundaryControl ctl;
    ctl.equation = Equation::Heat;
    ctl.horizon = problem.horizon;
    ctl.channel_vertices = fam.channel_vertices;
    ctl.terms.resize(1);
    ctl.terms[0].fam = head_family(fam, K, FamilyKind::Parabolic);
    ctl.terms[0].coef = z.cast<cd>();
    fill_grid(ctl);

    SynthesisReport rep;
    rep.residual = (g * z - m).cwiseAbs();
    rep.max_residual = rep.residual.maxCoeff();
    const SigmaReport sig = sigma_min(g);
    rep.sigma_min = sig.sigma_min;
    rep.condition = sig.condition;
    rep.control_l2 = std::sqrt(std::max(0.0, z.dot(g * z)));
    rep.tail_bound = tail_member_norm(fam, problem) * rep.control_l2;
    warn_on_condition(rep);
    return {std::move(ctl), std::move(rep)};
}

std::pair<BoundaryControl, SynthesisReport> schrodinger_control(const ControlProblem& problem) {
    if (problem.equation != Equation::Schrodinger)
        throw SchemaError("schrodinger control expects a schrodinger problem");
    check_problem(problem);
    const auto& sd = spectral_of(problem);
    const int K = problem.truncation;

    const FamilySpec fam = make_family(FamilyKind::Schrodinger, sd, problem.horizon,
                                       problem.channels);
    const Eigen::MatrixXcd g = gram(fam, K).matrix;
    const Eigen::VectorXcd m = target_moments(problem);
    const Eigen::VectorXcd z = gram_solve(g, m, true);

    BoundaryControl ctl;
    ctl.equation = Equation::Schrodinger;
    ctl.horizon = problem.horizon;
    ctl.channel_vertices = fam.channel_vertices;
    ctl.terms.resize(1);
    ctl.terms[0].fam = head_family(fam, K, FamilyKind::Schrodinger);
    ctl.terms[0].coef = z;
    ctl.terms[0].conjugate = true;
    fill_grid(ctl);

    SynthesisReport rep;
    rep.residual = (g * z - m).cwiseAbs();
    rep.max_residual = rep.residual.maxCoeff();
    const SigmaReport sig = sigma_min(g);
    rep.sigma_min = sig.sigma_min;
    rep.condition = sig.condition;
    rep.control_l2 = std::sqrt(std::max(0.0, (z.adjoint() * (g * z))(0).real()));
    rep.tail_bound = tail_member_norm(fam, problem) * rep.control_l2;
    warn_on_condition(rep);
    return {std::move(ctl), std::move(rep)};
}

std::pair<BoundaryControl, SynthesisReport> synthesize(const ControlProblem& problem) {
    switch (problem.equation) {
    case Equation::Wave:
        return wave_control(problem);
    case Equation::Heat:
        return heat_null_control(problem);
    case Equation::Schrodinger:
        return schrodinger_control(problem);
    }
    throw SchemaError("unknown equation kind");
}

namespace {

// quadrature fallback for gridded controls: per-panel 4-point Gauss against
// the linear interpolant of the samples
cd gridded_moment(const FamilySpec& check, bool conj_check, int n, const BoundaryControl& ctl) {
    static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                 0.8611363115940526};
    static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                 0.3478548451374538};
    if (ctl.grid.size() < 2)
        return 0.0;
    cd acc = 0.0;
    for (int i = 0; i + 1 < ctl.grid.size(); ++i) {
        const double s0 = ctl.grid[i], s1 = ctl.grid[i + 1];
        const double mid = 0.5 * (s0 + s1), half = 0.5 * (s1 - s0);
        for (int q = 0; q < 4; ++q) {
            const double s = mid + half * gx[q];
            const double w = (s - s0) / (s1 - s0);
            const Eigen::VectorXcd f =
                (1.0 - w) * ctl.grid_values.row(i).transpose() +
                w * ctl.grid_values.row(i + 1).transpose();
            // moment integrand: conj(v_n(horizon - s)) . f(s); eigen's dot
            // conjugates its first argument
            Eigen::VectorXcd vn = eval_member(check, n, ctl.horizon - s);
            if (conj_check)
                vn = vn.conjugate();
            acc += half * gw[q] * vn.dot(f);
        }
    }
    return acc;
}

} // namespace

Eigen::VectorXd moment_residual(const BoundaryControl& ctl, const SpectralData& sd,
                                const ControlProblem& problem, int K_check) {
    if (K_check < problem.truncation)
        throw SchemaError("K_check must cover the constrained modes");
    if (K_check > sd.modes())
        throw IndexOutOfRange("K_check exceeds the computed mode count");
    const int K = problem.truncation;
    const bool closed = !ctl.terms.empty();
    const Eigen::VectorXcd m = target_moments(problem);

    if (problem.equation == Equation::Wave) {
        const FamilySpec sin_fam =
            head_family(make_family(FamilyKind::Sin, sd, ctl.horizon, ctl.channel_vertices),
                        K_check, FamilyKind::Sin);
        const FamilySpec cos_fam = head_family(sin_fam, K_check, FamilyKind::Cos);
        Eigen::VectorXd res(2 * K_check);
        for (int n = 0; n < K_check; ++n) {
            const cd pos = closed ? closed_form_moment(sin_fam, false, n, ctl)
                                  : gridded_moment(sin_fam, false, n, ctl);
            const cd vel = closed ? closed_form_moment(cos_fam, false, n, ctl)
                                  : gridded_moment(cos_fam, false, n, ctl);
            res[n] = std::abs(pos - (n < K ? m[n] : cd(0.0)));
            res[K_check + n] = std::abs(vel - (n < K ? m[K + n] : cd(0.0)));
        }
        return res;
    }

    const FamilyKind kind =
        problem.equation == Equation::Heat ? FamilyKind::Parabolic : FamilyKind::Schrodinger;
    const bool conj_check = problem.equation == Equation::Schrodinger;
    const FamilySpec fam = head_family(
        make_family(kind, sd, ctl.horizon, ctl.channel_vertices), K_check, kind);
    Eigen::VectorXd res(K_check);
    for (int n = 0; n < K_check; ++n) {
        const cd got = closed ? closed_form_moment(fam, conj_check, n, ctl)
                              : gridded_moment(fam, conj_check, n, ctl);
        res[n] = std::abs(got - (n < K ? m[n] : cd(0.0)));
    }
    return res;
}

} // namespace treewave
