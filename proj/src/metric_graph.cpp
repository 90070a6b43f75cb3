#include "treewave/metric_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace treewave {

namespace {

// adaptive Simpson with relative tolerance; integrands here are smooth
// between knots, so the recursion stays shallow
double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_step(F&& f, double a, double b, double fa, double fm, double fb, double whole,
                     double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_integral(F&& f, double a, double b, double rel_tol) {
    if (a == b)
        return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = simpson(a, b, fa, fm, fb);
    const double scale = std::max(std::abs(whole), (b - a) * std::max({std::abs(fa), std::abs(fm), std::abs(fb)}));
    return adaptive_step(f, a, b, fa, fm, fb, whole, rel_tol * std::max(scale, 1e-300), 48);
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a)
            a = parent[a] = parent[parent[a]];
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b)
            return false;
        parent[a] = b;
        return true;
    }
};

} // namespace

// ---------------------------------------------------------------- Density

Density Density::constant(double value) {
    Density d;
    d.kind_ = Kind::Constant;
    d.c_ = value;
    return d;
}

Density Density::linear(double intercept, double slope) {
    Density d;
    d.kind_ = Kind::Linear;
    d.p_ = intercept;
    d.q_ = slope;
    return d;
}

Density Density::sampled(std::vector<double> x, std::vector<double> rho) {
    if (x.size() < 2 || x.size() != rho.size())
        throw SchemaError("sampled density needs at least two (x, rho) pairs of equal count");
    for (size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1]))
            throw SchemaError("sampled density knots must be strictly increasing");

    Density d;
    d.kind_ = Kind::Sampled;
    d.xs_ = std::move(x);
    d.ys_ = std::move(rho);

    // Fritsch-Carlson tangents: monotone data stays monotone, so positive
    // samples cannot overshoot below zero between knots
    const size_t n = d.xs_.size();
    std::vector<double> sec(n - 1);
    for (size_t i = 0; i + 1 < n; ++i)
        sec[i] = (d.ys_[i + 1] - d.ys_[i]) / (d.xs_[i + 1] - d.xs_[i]);
    d.ms_.assign(n, 0.0);
    d.ms_[0] = sec[0];
    d.ms_[n - 1] = sec[n - 2];
    for (size_t i = 1; i + 1 < n; ++i)
        d.ms_[i] = (sec[i - 1] * sec[i] > 0.0) ? 0.5 * (sec[i - 1] + sec[i]) : 0.0;
    for (size_t i = 0; i + 1 < n; ++i) {
        if (sec[i] == 0.0) {
            d.ms_[i] = d.ms_[i + 1] = 0.0;
            continue;
        }
        const double a = d.ms_[i] / sec[i], b = d.ms_[i + 1] / sec[i];
        const double s = a * a + b * b;
        if (s > 9.0) {
            const double t = 3.0 / std::sqrt(s);
            d.ms_[i] = t * a * sec[i];
            d.ms_[i + 1] = t * b * sec[i];
        }
    }
    return d;
}

double Density::cubic_eval(double x) const {
    const size_t n = xs_.size();
    if (x <= xs_.front())
        return ys_.front();
    if (x >= xs_.back())
        return ys_.back();
    size_t i = std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin() - 1;
    i = std::min(i, n - 2);
    const double h = xs_[i + 1] - xs_[i];
    const double t = (x - xs_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return ys_[i] * (2 * t3 - 3 * t2 + 1) + h * ms_[i] * (t3 - 2 * t2 + t) +
           ys_[i + 1] * (-2 * t3 + 3 * t2) + h * ms_[i + 1] * (t3 - t2);
}

double Density::operator()(double x) const {
    switch (kind_) {
    case Kind::Constant:
        return c_;
    case Kind::Linear:
        return p_ + q_ * x;
    case Kind::Sampled:
        return cubic_eval(x);
    }
    return c_;
}

double Density::min_on(double length) const {
    switch (kind_) {
    case Kind::Constant:
        return c_;
    case Kind::Linear:
        return std::min(p_, p_ + q_ * length);
    case Kind::Sampled:
        break;
    }
    // exact per-piece minimum of the Hermite cubic
    double best = std::min(ys_.front(), ys_.back());
    for (size_t i = 0; i + 1 < xs_.size(); ++i) {
        const double h = xs_[i + 1] - xs_[i];
        const double a = 2 * ys_[i] + h * ms_[i] - 2 * ys_[i + 1] + h * ms_[i + 1];
        const double b = -3 * ys_[i] - 2 * h * ms_[i] + 3 * ys_[i + 1] - h * ms_[i + 1];
        const double c = h * ms_[i];
        best = std::min(best, std::min(ys_[i], ys_[i + 1]));
        // critical points of a t^3 + b t^2 + c t + d inside (0,1)
        const double qa = 3 * a, qb = 2 * b, qc = c;
        if (std::abs(qa) < 1e-300) {
            if (std::abs(qb) > 1e-300) {
                const double t = -qc / qb;
                if (t > 0 && t < 1)
                    best = std::min(best, cubic_eval(xs_[i] + t * h));
            }
            continue;
        }
        const double disc = qb * qb - 4 * qa * qc;
        if (disc < 0)
            continue;
        const double sq = std::sqrt(disc);
        for (const double t : {(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)})
            if (t > 0 && t < 1)
                best = std::min(best, cubic_eval(xs_[i] + t * h));
    }
    (void)length;
    return best;
}

double Density::cubic_integral(double lo, double hi) const {
    double total = 0.0;
    for (size_t i = 0; i + 1 < xs_.size(); ++i) {
        const double x0 = xs_[i], x1 = xs_[i + 1];
        const double a = std::max(lo, x0), b = std::min(hi, x1);
        if (b <= a)
            continue;
        const double h = x1 - x0;
        const double ca = 2 * ys_[i] + h * ms_[i] - 2 * ys_[i + 1] + h * ms_[i + 1];
        const double cb = -3 * ys_[i] - 2 * h * ms_[i] + 3 * ys_[i + 1] - h * ms_[i + 1];
        const double cc = h * ms_[i];
        const double cd = ys_[i];
        auto prim = [&](double t) {
            return ca * t * t * t * t / 4 + cb * t * t * t / 3 + cc * t * t / 2 + cd * t;
        };
        total += h * (prim((b - x0) / h) - prim((a - x0) / h));
    }
    // flat extension outside the knot range
    if (lo < xs_.front())
        total += (std::min(hi, xs_.front()) - lo) * ys_.front();
    if (hi > xs_.back())
        total += (hi - std::max(lo, xs_.back())) * ys_.back();
    return total;
}

double Density::integral(double a, double b) const {
    switch (kind_) {
    case Kind::Constant:
        return c_ * (b - a);
    case Kind::Linear:
        return p_ * (b - a) + 0.5 * q_ * (b * b - a * a);
    case Kind::Sampled:
        return cubic_integral(a, b);
    }
    return 0.0;
}

double Density::optical_integral(double a, double b) const {
    if (b < a)
        return -optical_integral(b, a);
    switch (kind_) {
    case Kind::Constant:
        return std::sqrt(c_) * (b - a);
    case Kind::Linear: {
        if (std::abs(q_) < 1e-300)
            return std::sqrt(p_) * (b - a);
        const double fa = std::pow(p_ + q_ * a, 1.5), fb = std::pow(p_ + q_ * b, 1.5);
        return 2.0 / (3.0 * q_) * (fb - fa);
    }
    case Kind::Sampled:
        return adaptive_integral([this](double x) { return std::sqrt(cubic_eval(x)); }, a, b, 1e-10);
    }
    return 0.0;
}

// ---------------------------------------------------------------- MetricTree

MetricTree::MetricTree(GraphSpec spec) : spec_(std::move(spec)) {
    const int nv = static_cast<int>(spec_.vertices.size());
    const int ne = static_cast<int>(spec_.edges.size());
    if (nv == 0 || ne == 0)
        throw SchemaError("graph needs at least one edge and two vertices");

    vid_sorted_ = spec_.vertices;
    std::sort(vid_sorted_.begin(), vid_sorted_.end());
    if (std::adjacent_find(vid_sorted_.begin(), vid_sorted_.end()) != vid_sorted_.end())
        throw SchemaError("duplicate vertex id");
    eid_sorted_.resize(ne);
    for (int e = 0; e < ne; ++e)
        eid_sorted_[e] = spec_.edges[e].id;
    {
        auto ids = eid_sorted_;
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw SchemaError("duplicate edge id");
    }

    for (const auto& e : spec_.edges) {
        if (!(e.length > 0.0))
            throw NonpositiveLength("edge " + std::to_string(e.id) + ": length must be positive");
        const double rmin = e.density.min_on(e.length);
        if (!(rmin > 0.0))
            throw NonpositiveDensity("edge " + std::to_string(e.id) +
                                     ": density must stay positive on the edge");
        if (e.density.kind() == Density::Kind::Sampled) {
            const auto& xs = e.density.knots_x();
            if (std::abs(xs.front()) > 1e-12 || std::abs(xs.back() - e.length) > 1e-12 * std::max(1.0, e.length))
                throw SchemaError("edge " + std::to_string(e.id) +
                                  ": sampled density knots must span [0, length]");
        }
    }

    adj_.assign(nv, {});
    UnionFind uf(nv);
    for (int e = 0; e < ne; ++e) {
        const auto& es = spec_.edges[e];
        const int ti = vertex_index(es.tail), hi = vertex_index(es.head);
        if (ti == hi)
            throw CycleDetected("edge " + std::to_string(es.id) + " is a self-loop");
        if (!uf.unite(ti, hi))
            throw CycleDetected("edges form a cycle through vertex " + std::to_string(es.tail));
        adj_[ti].push_back({e, true});
        adj_[hi].push_back({e, false});
    }
    for (int v = 1; v < nv; ++v)
        if (uf.find(v) != uf.find(0))
            throw Disconnected("graph has more than one component");

    for (int v : vid_sorted_) {
        const int deg = static_cast<int>(adj_[vertex_index(v)].size());
        (deg == 1 ? boundary_ : interior_).push_back(v);
    }

    // vertex-to-vertex optical distances by DFS from every vertex
    std::vector<double> elen(ne);
    for (int e = 0; e < ne; ++e)
        elen[e] = spec_.edges[e].density.optical_integral(0.0, spec_.edges[e].length);
    vdist_.assign(nv, std::vector<double>(nv, 0.0));
    for (int s = 0; s < nv; ++s) {
        std::vector<int> stack{s};
        std::vector<char> seen(nv, 0);
        seen[s] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const auto& [e, at_tail] : adj_[u]) {
                const auto& es = spec_.edges[e];
                const int w = vertex_index(at_tail ? es.head : es.tail);
                if (seen[w])
                    continue;
                seen[w] = 1;
                vdist_[s][w] = vdist_[s][u] + elen[e];
                stack.push_back(w);
            }
        }
    }
}

MetricTree build_tree(GraphSpec spec) { return MetricTree(std::move(spec)); }

int MetricTree::vertex_index(int vertex_id) const {
    for (size_t i = 0; i < spec_.vertices.size(); ++i)
        if (spec_.vertices[i] == vertex_id)
            return static_cast<int>(i);
    throw SchemaError("unknown vertex id " + std::to_string(vertex_id));
}

int MetricTree::edge_index(int edge_id) const {
    for (size_t i = 0; i < spec_.edges.size(); ++i)
        if (spec_.edges[i].id == edge_id)
            return static_cast<int>(i);
    throw SchemaError("unknown edge id " + std::to_string(edge_id));
}

int MetricTree::degree(int vertex_id) const {
    return static_cast<int>(adj_[vertex_index(vertex_id)].size());
}

const std::vector<std::pair<int, bool>>& MetricTree::incident(int vertex_id) const {
    return adj_[vertex_index(vertex_id)];
}

double MetricTree::edge_optical_length(int edge_id) const {
    const auto& e = edge(edge_id);
    return e.density.optical_integral(0.0, e.length);
}

double MetricTree::total_optical_length() const {
    double total = 0.0;
    for (const auto& e : spec_.edges)
        total += e.density.optical_integral(0.0, e.length);
    return total;
}

bool MetricTree::is_boundary(int vertex_id) const {
    return std::find(boundary_.begin(), boundary_.end(), vertex_id) != boundary_.end();
}

GraphPoint MetricTree::vertex_point(int vertex_id) const {
    const auto& inc = adj_[vertex_index(vertex_id)];
    int best = -1;
    bool at_tail = true;
    for (const auto& [e, tail] : inc)
        if (best < 0 || spec_.edges[e].id < spec_.edges[best].id) {
            best = e;
            at_tail = tail;
        }
    const auto& es = spec_.edges[best];
    return {es.id, at_tail ? 0.0 : es.length};
}

GraphPoint MetricTree::canonical(const GraphPoint& p) const {
    const auto& es = edge(p.edge);
    if (p.x < 0.0 || p.x > es.length)
        throw IndexOutOfRange("point coordinate outside edge " + std::to_string(p.edge));
    const double snap = 1e-12 * std::max(1.0, es.length);
    if (p.x <= snap)
        return vertex_point(es.tail);
    if (p.x >= es.length - snap)
        return vertex_point(es.head);
    return p;
}

double MetricTree::vertex_distance(int va, int vb) const {
    return vdist_[vertex_index(va)][vertex_index(vb)];
}

std::vector<int> MetricTree::vertex_path(int va, int vb) const {
    const int s = vertex_index(va), t = vertex_index(vb);
    const int nv = num_vertices();
    std::vector<int> parent(nv, -1);
    std::vector<int> stack{s};
    std::vector<char> seen(nv, 0);
    seen[s] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        if (u == t)
            break;
        for (const auto& [e, at_tail] : adj_[u]) {
            const auto& es = spec_.edges[e];
            const int w = vertex_index(at_tail ? es.head : es.tail);
            if (!seen[w]) {
                seen[w] = 1;
                parent[w] = u;
                stack.push_back(w);
            }
        }
    }
    std::vector<int> path;
    for (int u = t; u != -1; u = parent[u])
        path.push_back(spec_.vertices[u]);
    std::reverse(path.begin(), path.end());
    return path;
}

// ------------------------------------------------------------- geometry ops

namespace {

// optical distance from a point to one endpoint of its own edge
double to_endpoint(const MetricTree& tree, const GraphPoint& p, bool toward_tail) {
    const auto& e = tree.edge(p.edge);
    return toward_tail ? e.density.optical_integral(0.0, p.x)
                       : e.density.optical_integral(p.x, e.length);
}

} // namespace

double optical_distance(const MetricTree& tree, const GraphPoint& a, const GraphPoint& b) {
    const GraphPoint ca = tree.canonical(a), cb = tree.canonical(b);
    if (ca.edge == cb.edge) {
        const auto& e = tree.edge(ca.edge);
        return std::abs(e.density.optical_integral(std::min(ca.x, cb.x), std::max(ca.x, cb.x)));
    }
    const auto& ea = tree.edge(ca.edge);
    const auto& eb = tree.edge(cb.edge);
    double best = std::numeric_limits<double>::infinity();
    for (const bool ta : {true, false})
        for (const bool tb : {true, false}) {
            const int va = ta ? ea.tail : ea.head;
            const int vb = tb ? eb.tail : eb.head;
            best = std::min(best, to_endpoint(tree, ca, ta) + tree.vertex_distance(va, vb) +
                                      to_endpoint(tree, cb, tb));
        }
    return best;
}

DiameterResult optical_diameter(const MetricTree& tree) {
    const auto& gamma = tree.boundary();
    DiameterResult res;
    res.vertex_a = gamma[0];
    res.vertex_b = gamma[1 % gamma.size()];
    for (size_t i = 0; i < gamma.size(); ++i)
        for (size_t j = i + 1; j < gamma.size(); ++j) {
            const double d = tree.vertex_distance(gamma[i], gamma[j]);
            if (d > res.value) {
                res.value = d;
                res.vertex_a = gamma[i];
                res.vertex_b = gamma[j];
            }
        }
    return res;
}

CenterResult optical_center(const MetricTree& tree) {
    const DiameterResult diam = optical_diameter(tree);
    const double half = 0.5 * diam.value;
    const auto path = tree.vertex_path(diam.vertex_a, diam.vertex_b);

    // walk the diametral path until the half-diameter is reached, then solve
    // the 1-D balance equation inside the edge where it happens
    double walked = 0.0;
    GraphPoint center = tree.vertex_point(diam.vertex_a);
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        const int u = path[i], v = path[i + 1];
        int eidx = -1;
        bool u_is_tail = true;
        for (const auto& [e, at_tail] : tree.incident(u)) {
            const auto& es = tree.spec().edges[e];
            if ((at_tail ? es.head : es.tail) == v) {
                eidx = e;
                u_is_tail = at_tail;
                break;
            }
        }
        const auto& es = tree.spec().edges[eidx];
        const double elen = es.density.optical_integral(0.0, es.length);
        if (walked + elen < half - 1e-14 * std::max(1.0, half)) {
            walked += elen;
            continue;
        }
        const double rem = half - walked;
        // bisection on the monotone prefix, tolerance well below 1e-10 optical units
        double lo = 0.0, hi = es.length;
        auto from_u = [&](double x) {
            return u_is_tail ? es.density.optical_integral(0.0, x)
                             : es.density.optical_integral(x, es.length);
        };
        for (int it = 0; it < 200 && (hi - lo) > 1e-14 * std::max(1.0, es.length); ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool below = from_u(mid) < rem;
            if (u_is_tail ? below : !below)
                lo = mid;
            else
                hi = mid;
        }
        center = tree.canonical({es.id, 0.5 * (lo + hi)});
        break;
    }

    CenterResult res;
    res.point = center;
    res.eccentricity = 0.0;
    for (const int g : tree.boundary())
        res.eccentricity =
            std::max(res.eccentricity, optical_distance(tree, center, tree.vertex_point(g)));
    return res;
}

double eccentricity(const MetricTree& tree, int gamma1) {
    if (!tree.is_boundary(gamma1))
        throw IndexOutOfRange("vertex " + std::to_string(gamma1) + " is not a boundary vertex");
    double best = 0.0;
    for (const int g : tree.boundary())
        if (g != gamma1)
            best = std::max(best, tree.vertex_distance(gamma1, g));
    return best;
}

} // namespace treewave
