#include "treewave/evolution.hpp"

#include "treewave/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace treewave {

namespace {

using cd = std::complex<double>;

Eigen::VectorXd default_times(double T, const Eigen::VectorXd& times) {
    if (times.size() > 0)
        return times;
    return Eigen::VectorXd::LinSpaced(201, 0.0, T);
}

void check_times(const Eigen::VectorXd& times, double T) {
    if (times.size() == 0)
        throw SchemaError("evolution needs at least one output time");
    if (times[0] < 0.0)
        throw SchemaError("output times must be nonnegative");
    for (int i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1]))
            throw SchemaError("output times must be strictly increasing");
    if (times[times.size() - 1] > T * (1.0 + 1e-12) + 1e-15)
        throw SchemaError("output times exceed the evolution horizon");
}

void check_modes(const SpectralData& sd, int K) {
    if (K < 1)
        throw SchemaError("evolution needs at least one mode");
    if (K > sd.modes())
        throw IndexOutOfRange("mode count exceeds the computed spectrum");
}

Eigen::VectorXcd padded(const Eigen::VectorXcd& v, int K) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(K);
    const int n = std::min(static_cast<int>(v.size()), K);
    out.head(n) = v.head(n);
    return out;
}

// alpha columns of the control channels, in channel order
Eigen::MatrixXd restrict_columns(const Eigen::MatrixXd& full, const std::vector<int>& boundary,
                                 const std::vector<int>& channels) {
    Eigen::MatrixXd out(full.rows(), static_cast<int>(channels.size()));
    for (size_t c = 0; c < channels.size(); ++c) {
        const auto it = std::find(boundary.begin(), boundary.end(), channels[c]);
        if (it == boundary.end())
            throw InconsistentChannels("control channel is not a boundary vertex");
        out.col(static_cast<int>(c)) = full.col(static_cast<int>(it - boundary.begin()));
    }
    return out;
}

bool zero_control(const BoundaryControl& ctl) {
    return ctl.terms.empty() && ctl.grid.size() == 0;
}

bool family_span(const BoundaryControl& ctl) { return !ctl.terms.empty(); }

// control value extended by zero past the horizon
Eigen::VectorXcd control_at(const BoundaryControl& ctl, double t) {
    if (t > ctl.horizon || zero_control(ctl))
        return Eigen::VectorXcd::Zero(ctl.channels());
    return ctl.value(t);
}

// quadrature panels of [lo, hi]: split at the control sample knots, then cap
// the width; 4-point Gauss on each panel
template <typename F>
void integrate_panels(const BoundaryControl& ctl, double lo, double hi, double w_max, F&& accum) {
    static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                 0.8611363115940526};
    static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                 0.3478548451374538};
    if (!(hi > lo))
        return;
    std::vector<double> cuts = {lo};
    for (int i = 0; i < ctl.grid.size(); ++i)
        if (ctl.grid[i] > lo && ctl.grid[i] < hi)
            cuts.push_back(ctl.grid[i]);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    for (size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        const int sub = std::max(1, static_cast<int>(std::ceil((b - a) / w_max)));
        const double w = (b - a) / sub;
        for (int p = 0; p < sub; ++p) {
            const double mid = a + (p + 0.5) * w, half = 0.5 * w;
            for (int q = 0; q < 4; ++q)
                accum(mid + half * gx[q], half * gw[q]);
        }
    }
}

// sample-grid resolution guard: at least 8 samples per shortest period
void check_sample_resolution(const BoundaryControl& ctl, double rate) {
    if (ctl.grid.size() < 2)
        throw SchemaError("sampled control carries no grid");
    const double step = ctl.grid[1] - ctl.grid[0];
    if (step > 2.0 * M_PI / (8.0 * std::max(rate, 1e-300)))
        throw UnderresolvedQuadrature("control samples do not resolve the fastest mode");
}

struct WaveState {
    Eigen::VectorXcd c, cdot;
};

void wave_rotate(WaveState& st, const Eigen::VectorXd& omega, double dt) {
    for (int k = 0; k < omega.size(); ++k) {
        const double cw = std::cos(omega[k] * dt), sw = std::sin(omega[k] * dt);
        const cd c0 = st.c[k], d0 = st.cdot[k];
        st.c[k] = c0 * cw + d0 * sw / omega[k];
        st.cdot[k] = -omega[k] * c0 * sw + d0 * cw;
    }
}

// closed-form forced wave state at t <= horizon (zero initial data)
WaveState wave_closed(const BoundaryControl& ctl, const Eigen::MatrixXd& alphaR,
                      const Eigen::VectorXd& omega, double t) {
    const int K = static_cast<int>(omega.size());
    WaveState st{Eigen::VectorXcd::Zero(K), Eigen::VectorXcd::Zero(K)};
    const double h = ctl.horizon;
    for (const auto& term : ctl.terms) {
        const bool is_sin = term.fam.kind == FamilyKind::Sin;
        if (!is_sin && term.fam.kind != FamilyKind::Cos)
            throw SchemaError("wave evolution expects sin/cos family controls");
        for (int j = 0; j < term.coef.size(); ++j) {
            if (term.coef[j] == cd(0.0))
                continue;
            const double wj = term.fam.rate[j];
            const double B = wj * (h - t);
            const double cB = std::cos(B), sB = std::sin(B);
            const Eigen::VectorXd chan = alphaR * term.fam.amplitude.row(j).transpose();
            for (int k = 0; k < K; ++k) {
                if (chan[k] == 0.0)
                    continue;
                const double ss = ss_integral(omega[k], wj, 0.0, t);
                const double sc = sc_integral(omega[k], wj, 0.0, t); // sin_k cos_j
                const double cs = sc_integral(wj, omega[k], 0.0, t); // sin_j cos_k
                const double cc = cc_integral(omega[k], wj, 0.0, t);
                const double pos = is_sin ? cB * ss + sB * sc : cB * sc - sB * ss;
                const double vel = is_sin ? cB * cs + sB * cc : cB * cc - sB * cs;
                st.c[k] -= term.coef[j] * chan[k] * pos;
                st.cdot[k] -= term.coef[j] * chan[k] * omega[k] * vel;
            }
        }
    }
    return st;
}

// heat/schrodinger closed-form forced coefficient at t <= horizon
Eigen::VectorXcd first_order_closed(const SpectralData& sd, const BoundaryControl& ctl,
                                    const Eigen::MatrixXd& alphaR, int K, bool heat, double t) {
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(K);
    const double h = ctl.horizon;
    for (const auto& term : ctl.terms) {
        if (heat && term.fam.kind != FamilyKind::Parabolic)
            throw SchemaError("heat evolution expects heat-kernel family controls");
        if (!heat && term.fam.kind != FamilyKind::Schrodinger)
            throw SchemaError("schrodinger evolution expects oscillatory family controls");
        for (int j = 0; j < term.coef.size(); ++j) {
            if (term.coef[j] == cd(0.0))
                continue;
            const double rj = term.fam.rate[j];
            const Eigen::VectorXd chan = alphaR * term.fam.amplitude.row(j).transpose();
            for (int k = 0; k < K; ++k) {
                if (chan[k] == 0.0)
                    continue;
                const double sqrt_lam = std::sqrt(sd.lambda[k]);
                cd conv;
                if (heat) {
                    const double s = sd.lambda[k] + rj;
                    conv = std::exp(rj * (t - h)) * (-std::expm1(-s * t)) / s;
                } else {
                    // control phase e^{i d (h-s)} with d = -rj for the
                    // conjugated members, +rj otherwise
                    const double d = term.conjugate ? -rj : rj;
                    conv = std::exp(cd(0.0, sd.lambda[k] * t + d * h)) *
                           cis_integral(-(sd.lambda[k] + d), 0.0, t);
                }
                c[k] -= term.coef[j] * chan[k] * sqrt_lam * conv;
            }
        }
    }
    return c;
}

} // namespace

Trajectory wave_forward(const SpectralData& sd, const BoundaryControl& ctl, double T, int K,
                        Eigen::VectorXd times, const ModalState* initial) {
    check_modes(sd, K);
    times = default_times(T, times);
    check_times(times, T);
    const Eigen::VectorXd omega = sd.omega().head(K);
    const Eigen::MatrixXd alphaR =
        ctl.channels() > 0
            ? restrict_columns(sd.alpha.topRows(K), sd.boundary, ctl.channel_vertices)
            : Eigen::MatrixXd::Zero(K, 0);
    const Eigen::VectorXcd a0 = initial ? padded(initial->a, K) : Eigen::VectorXcd::Zero(K);
    const Eigen::VectorXcd b0 = initial ? padded(initial->b, K) : Eigen::VectorXcd::Zero(K);

    Trajectory out;
    out.equation = Equation::Wave;
    out.times = times;
    out.provenance = "spectral";
    out.c.resize(times.size(), K);
    out.cdot.resize(times.size(), K);

    const double h = ctl.horizon;
    auto add_free = [&](WaveState& st, double t) {
        for (int k = 0; k < K; ++k) {
            const double cw = std::cos(omega[k] * t), sw = std::sin(omega[k] * t);
            st.c[k] += a0[k] * cw + b0[k] * sw / omega[k];
            st.cdot[k] += -omega[k] * a0[k] * sw + b0[k] * cw;
        }
    };

    if (family_span(ctl) || zero_control(ctl)) {
        WaveState at_h;
        bool have_h = false;
        for (int i = 0; i < times.size(); ++i) {
            const double t = times[i];
            WaveState st;
            if (t <= h || zero_control(ctl)) {
                st = zero_control(ctl)
                         ? WaveState{Eigen::VectorXcd::Zero(K), Eigen::VectorXcd::Zero(K)}
                         : wave_closed(ctl, alphaR, omega, t);
                add_free(st, t);
            } else {
                if (!have_h) {
                    at_h = wave_closed(ctl, alphaR, omega, h);
                    add_free(at_h, h);
                    have_h = true;
                }
                st = at_h;
                wave_rotate(st, omega, t - h);
            }
            out.c.row(i) = st.c.transpose();
            out.cdot.row(i) = st.cdot.transpose();
        }
        return out;
    }

    // sampled control: exact mode rotation between outputs, panel quadrature
    // for the forced part
    check_sample_resolution(ctl, omega[K - 1]);
    const double w_max = 2.0 * M_PI / (16.0 * omega[K - 1]);
    WaveState st{a0, b0};
    double t_prev = 0.0;
    for (int i = 0; i < times.size(); ++i) {
        const double t = times[i];
        wave_rotate(st, omega, t - t_prev);
        Eigen::VectorXcd fc = Eigen::VectorXcd::Zero(K), fd = Eigen::VectorXcd::Zero(K);
        integrate_panels(ctl, t_prev, std::min(t, h), w_max, [&](double s, double w) {
            const Eigen::VectorXcd chanf = alphaR * ctl.value(s);
            for (int k = 0; k < K; ++k) {
                fc[k] += w * std::sin(omega[k] * (t - s)) * chanf[k];
                fd[k] += w * omega[k] * std::cos(omega[k] * (t - s)) * chanf[k];
            }
        });
        st.c -= fc;
        st.cdot -= fd;
        out.c.row(i) = st.c.transpose();
        out.cdot.row(i) = st.cdot.transpose();
        t_prev = t;
    }
    return out;
}

namespace {

Trajectory first_order_forward(const SpectralData& sd, const Eigen::VectorXcd& a,
                               const BoundaryControl& ctl, double tau, int K,
                               Eigen::VectorXd times, bool heat) {
    check_modes(sd, K);
    times = default_times(tau, times);
    check_times(times, tau);
    const Eigen::VectorXcd a0 = padded(a, K);
    const Eigen::MatrixXd alphaR =
        ctl.channels() > 0
            ? restrict_columns(sd.alpha.topRows(K), sd.boundary, ctl.channel_vertices)
            : Eigen::MatrixXd::Zero(K, 0);

    Trajectory out;
    out.equation = heat ? Equation::Heat : Equation::Schrodinger;
    out.times = times;
    out.provenance = "spectral";
    out.c.resize(times.size(), K);

    auto free_factor = [&](int k, double dt) {
        return heat ? cd(std::exp(-sd.lambda[k] * dt), 0.0)
                    : std::exp(cd(0.0, sd.lambda[k] * dt));
    };

    const double h = ctl.horizon;
    if (family_span(ctl) || zero_control(ctl)) {
        Eigen::VectorXcd at_h;
        bool have_h = false;
        for (int i = 0; i < times.size(); ++i) {
            const double t = times[i];
            Eigen::VectorXcd c(K);
            if (t <= h || zero_control(ctl)) {
                c = zero_control(ctl)
                        ? Eigen::VectorXcd::Zero(K)
                        : first_order_closed(sd, ctl, alphaR, K, heat, t);
                for (int k = 0; k < K; ++k)
                    c[k] += a0[k] * free_factor(k, t);
            } else {
                if (!have_h) {
                    at_h = first_order_closed(sd, ctl, alphaR, K, heat, h);
                    for (int k = 0; k < K; ++k)
                        at_h[k] += a0[k] * free_factor(k, h);
                    have_h = true;
                }
                c = at_h;
                for (int k = 0; k < K; ++k)
                    c[k] *= free_factor(k, t - h);
            }
            out.c.row(i) = c.transpose();
        }
        return out;
    }

    check_sample_resolution(ctl, sd.lambda[K - 1]);
    const double w_max = heat ? 0.5 / sd.lambda[K - 1] : 2.0 * M_PI / (16.0 * sd.lambda[K - 1]);
    Eigen::VectorXcd c = a0;
    double t_prev = 0.0;
    for (int i = 0; i < times.size(); ++i) {
        const double t = times[i];
        for (int k = 0; k < K; ++k)
            c[k] *= free_factor(k, t - t_prev);
        Eigen::VectorXcd forced = Eigen::VectorXcd::Zero(K);
        integrate_panels(ctl, t_prev, std::min(t, h), w_max, [&](double s, double w) {
            const Eigen::VectorXcd chanf = alphaR * ctl.value(s);
            for (int k = 0; k < K; ++k)
                forced[k] += w * std::sqrt(sd.lambda[k]) * free_factor(k, t - s) * chanf[k];
        });
        c -= forced;
        out.c.row(i) = c.transpose();
        t_prev = t;
    }
    return out;
}

} // namespace

Trajectory heat_forward(const SpectralData& sd, const Eigen::VectorXcd& a,
                        const BoundaryControl& ctl, double tau, int K, Eigen::VectorXd times) {
    return first_order_forward(sd, a, ctl, tau, K, std::move(times), true);
}

Trajectory schrodinger_forward(const SpectralData& sd, const Eigen::VectorXcd& a,
                               const BoundaryControl& ctl, double tau, int K,
                               Eigen::VectorXd times) {
    return first_order_forward(sd, a, ctl, tau, K, std::move(times), false);
}

FdtdConfig FdtdConfig::uniform(const MetricTree& tree, int elements) {
    if (elements < 2)
        throw MeshTooCoarse("fdtd mesh needs at least two elements per edge");
    FdtdConfig c;
    c.elements_per_edge.assign(static_cast<size_t>(tree.num_edges()), elements);
    return c;
}

GridState fdtd_wave(const MetricTree& tree, const BoundaryControl& ctl, double T,
                    const FdtdConfig& config) {
    const auto& edges = tree.spec().edges;
    const int ne = tree.num_edges();
    if (static_cast<int>(config.elements_per_edge.size()) != ne)
        throw SchemaError("fdtd element list does not match the edge count");
    if (!(T > 0.0))
        throw SchemaError("fdtd horizon must be positive");

    std::vector<double> dx(ne);
    double cfl_limit = std::numeric_limits<double>::infinity();
    for (int e = 0; e < ne; ++e) {
        if (config.elements_per_edge[e] < 2)
            throw MeshTooCoarse("fdtd mesh needs at least two elements per edge");
        dx[e] = edges[e].length / config.elements_per_edge[e];
        cfl_limit = std::min(cfl_limit, dx[e] * std::sqrt(edges[e].density.min_on(edges[e].length)));
    }
    const double dt_cap = 0.9 * cfl_limit;
    const double dt_bound = config.dt > 0.0 ? config.dt : dt_cap;
    if (dt_bound > dt_cap * (1.0 + 1e-12))
        throw CFLViolation("time step exceeds 0.9 of the CFL limit");
    const int steps = std::max(1, static_cast<int>(std::ceil(T / dt_bound - 1e-12)));
    const double dt = T / steps;

    // nodal density and vertex half-cell masses
    std::vector<Eigen::VectorXd> rho(ne);
    for (int e = 0; e < ne; ++e) {
        const int n = config.elements_per_edge[e];
        rho[e].resize(n + 1);
        for (int i = 0; i <= n; ++i)
            rho[e][i] = edges[e].density(i * dx[e]);
    }
    const int nv = tree.num_vertices();
    std::vector<double> mv(static_cast<size_t>(nv), 0.0);
    std::vector<int> vid(static_cast<size_t>(nv));
    for (const int v : tree.interior()) {
        double m = 0.0;
        for (const auto& [e, at_tail] : tree.incident(v)) {
            const double len = edges[e].length;
            m += at_tail ? edges[e].density.integral(0.0, 0.5 * dx[e])
                         : edges[e].density.integral(len - 0.5 * dx[e], len);
        }
        mv[static_cast<size_t>(tree.vertex_index(v))] = m;
    }

    // channel column per vertex id, -1 for homogeneous boundary vertices
    std::vector<int> chan_of(static_cast<size_t>(nv), -1);
    for (size_t c = 0; c < ctl.channel_vertices.size(); ++c)
        chan_of[static_cast<size_t>(tree.vertex_index(ctl.channel_vertices[c]))] =
            static_cast<int>(c);

    std::vector<Eigen::VectorXd> up(ne), uc(ne), un(ne);
    for (int e = 0; e < ne; ++e) {
        up[e].setZero(config.elements_per_edge[e] + 1);
        uc[e] = up[e];
        un[e] = up[e];
    }
    std::vector<double> vprev(static_cast<size_t>(nv), 0.0), vcur(vprev), vnext(vprev);

    auto advance = [&](double t_new) {
        for (int e = 0; e < ne; ++e) {
            const int n = config.elements_per_edge[e];
            const double c2 = dt * dt / (dx[e] * dx[e]);
            for (int i = 1; i < n; ++i)
                un[e][i] = 2.0 * uc[e][i] - up[e][i] +
                           c2 / rho[e][i] * (uc[e][i + 1] - 2.0 * uc[e][i] + uc[e][i - 1]);
        }
        for (const int v : tree.interior()) {
            const int vi = tree.vertex_index(v);
            double flux = 0.0;
            for (const auto& [e, at_tail] : tree.incident(v)) {
                const int n = config.elements_per_edge[e];
                const double inner = at_tail ? uc[e][1] : uc[e][n - 1];
                flux += (inner - vcur[static_cast<size_t>(vi)]) / dx[e];
            }
            vnext[static_cast<size_t>(vi)] = 2.0 * vcur[static_cast<size_t>(vi)] -
                                             vprev[static_cast<size_t>(vi)] +
                                             dt * dt * flux / mv[static_cast<size_t>(vi)];
        }
        const Eigen::VectorXcd f = control_at(ctl, t_new);
        for (const int v : tree.boundary()) {
            const int vi = tree.vertex_index(v);
            const int col = chan_of[static_cast<size_t>(vi)];
            vnext[static_cast<size_t>(vi)] = col >= 0 ? f[col].real() : 0.0;
        }
        for (int e = 0; e < ne; ++e) {
            const int n = config.elements_per_edge[e];
            un[e][0] = vnext[static_cast<size_t>(tree.vertex_index(edges[e].tail))];
            un[e][n] = vnext[static_cast<size_t>(tree.vertex_index(edges[e].head))];
        }
        std::swap(up, uc);
        std::swap(uc, un);
        std::swap(vprev, vcur);
        std::swap(vcur, vnext);
    };

    for (int s = 1; s <= steps; ++s)
        advance(s * dt);

    // one extra step for the centered velocity at T
    const std::vector<Eigen::VectorXd> at_T = uc, before_T = up;
    advance((steps + 1) * dt);

    GridState out;
    out.elements_per_edge = config.elements_per_edge;
    out.time = T;
    out.values = at_T;
    out.velocity.resize(ne);
    for (int e = 0; e < ne; ++e)
        out.velocity[e] = (uc[e] - before_T[e]) / (2.0 * dt);
    return out;
}

double grid_energy(const MetricTree& tree, const GridState& state) {
    if (state.velocity.empty())
        throw SchemaError("grid energy needs a velocity field");
    const auto& edges = tree.spec().edges;
    double energy = 0.0;
    for (size_t e = 0; e < state.values.size(); ++e) {
        const int n = state.elements_per_edge[e];
        const double h = edges[e].length / n;
        const auto& u = state.values[e];
        const auto& v = state.velocity[e];
        for (int j = 0; j < n; ++j) {
            const auto [m00, m01, m11] = element_mass(edges[e].density, j * h, (j + 1) * h);
            energy += 0.5 * (v[j] * v[j] * m00 + 2.0 * v[j] * v[j + 1] * m01 +
                             v[j + 1] * v[j + 1] * m11);
            const double du = u[j + 1] - u[j];
            energy += 0.5 * du * du / h;
        }
    }
    return energy;
}

namespace {

// P1 interpolation of uniform nodal values at local coordinate x
double lerp_nodes(const Eigen::VectorXd& vals, double h, double x) {
    const int last = static_cast<int>(vals.size()) - 2;
    const int i = std::clamp(static_cast<int>(std::floor(x / h)), 0, last);
    const double w = (x - i * h) / h;
    return (1.0 - w) * vals[i] + w * vals[i + 1];
}

// grid values moved onto the spectral mesh (shared layout with sd.phi)
std::vector<Eigen::VectorXd> on_spectral_mesh(const std::vector<Eigen::VectorXd>& values,
                                              const std::vector<int>& elems,
                                              const SpectralData& sd, const MetricTree& tree) {
    const auto& edges = tree.spec().edges;
    std::vector<Eigen::VectorXd> out(values.size());
    for (size_t e = 0; e < values.size(); ++e) {
        const int n_dst = sd.elements_per_edge[e];
        if (elems[e] == n_dst) {
            out[e] = values[e];
            continue;
        }
        const double h_src = edges[e].length / elems[e];
        const double h_dst = edges[e].length / n_dst;
        out[e].resize(n_dst + 1);
        for (int i = 0; i <= n_dst; ++i)
            out[e][i] = lerp_nodes(values[e], h_src, i * h_dst);
    }
    return out;
}

Eigen::VectorXcd project_field(const std::vector<Eigen::VectorXd>& u, const SpectralData& sd,
                               const MetricTree& tree, int K) {
    const auto& edges = tree.spec().edges;
    Eigen::VectorXcd a = Eigen::VectorXcd::Zero(K);
    for (size_t e = 0; e < u.size(); ++e) {
        const int n = sd.elements_per_edge[e];
        const double h = edges[e].length / n;
        for (int j = 0; j < n; ++j) {
            const auto [m00, m01, m11] = element_mass(edges[e].density, j * h, (j + 1) * h);
            for (int k = 0; k < K; ++k) {
                const auto& phi = sd.phi[static_cast<size_t>(k)][e];
                a[k] += u[e][j] * (m00 * phi[j] + m01 * phi[j + 1]) +
                        u[e][j + 1] * (m01 * phi[j] + m11 * phi[j + 1]);
            }
        }
    }
    return a;
}

} // namespace

ModalState project(const GridState& state, const SpectralData& sd, const MetricTree& tree,
                   int K) {
    check_modes(sd, K);
    if (state.values.size() != sd.elements_per_edge.size())
        throw SchemaError("grid state does not match the tree");
    const auto u = on_spectral_mesh(state.values, state.elements_per_edge, sd, tree);
    ModalState out;
    out.a = project_field(u, sd, tree, K);
    if (!state.velocity.empty()) {
        const auto v = on_spectral_mesh(state.velocity, state.elements_per_edge, sd, tree);
        out.b = project_field(v, sd, tree, K);
    }
    return out;
}

GridState lift(const ModalState& modal, const SpectralData& sd, const MetricTree& tree,
               const std::vector<int>& elements_per_edge) {
    const int K = modal.modes();
    check_modes(sd, K);
    const auto& edges = tree.spec().edges;
    if (static_cast<int>(elements_per_edge.size()) != tree.num_edges())
        throw SchemaError("element list does not match the edge count");

    GridState out;
    out.elements_per_edge = elements_per_edge;
    out.values.resize(static_cast<size_t>(tree.num_edges()));
    const bool with_velocity = modal.b.size() > 0;
    if (with_velocity)
        out.velocity.resize(static_cast<size_t>(tree.num_edges()));

    for (int e = 0; e < tree.num_edges(); ++e) {
        const int n = elements_per_edge[e];
        const double h = edges[e].length / n;
        const double h_src = edges[e].length / sd.elements_per_edge[e];
        out.values[static_cast<size_t>(e)].setZero(n + 1);
        if (with_velocity)
            out.velocity[static_cast<size_t>(e)].setZero(n + 1);
        for (int i = 0; i <= n; ++i) {
            const double x = i * h;
            for (int k = 0; k < K; ++k) {
                const double phik = lerp_nodes(sd.phi[static_cast<size_t>(k)][e], h_src, x);
                out.values[static_cast<size_t>(e)][i] += modal.a[k].real() * phik;
                if (with_velocity)
                    out.velocity[static_cast<size_t>(e)][i] += modal.b[k].real() * phik;
            }
        }
    }
    return out;
}

} // namespace treewave
