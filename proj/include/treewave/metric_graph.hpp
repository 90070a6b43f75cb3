#pragma once

#include "treewave/errors.hpp"

#include <string>
#include <utility>
#include <vector>

namespace treewave {

// Density profile of one edge, as a function of the local coordinate
// x in [0, length]. Sampled profiles are interpolated with a monotone
// (Fritsch-Carlson) cubic so that positive data stays positive between knots.
class Density {
public:
    enum class Kind { Constant, Linear, Sampled };

    static Density constant(double value);
    static Density linear(double intercept, double slope);
    static Density sampled(std::vector<double> x, std::vector<double> rho);

    Kind kind() const { return kind_; }
    double operator()(double x) const;

    // exact minimum over [0, length] (exact per cubic piece for sampled data)
    double min_on(double length) const;

    // \int_a^b rho dx, exact for all three kinds
    double integral(double a, double b) const;

    // \int_a^b sqrt(rho) dx; exact for constant/linear, adaptive quadrature
    // with relative tolerance 1e-10 for sampled profiles
    double optical_integral(double a, double b) const;

    double constant_value() const { return c_; }
    double linear_intercept() const { return p_; }
    double linear_slope() const { return q_; }
    const std::vector<double>& knots_x() const { return xs_; }
    const std::vector<double>& knots_rho() const { return ys_; }

private:
    Density() = default;
    double cubic_eval(double x) const;
    double cubic_integral(double a, double b) const;

    Kind kind_ = Kind::Constant;
    double c_ = 1.0;
    double p_ = 0.0, q_ = 0.0;
    std::vector<double> xs_, ys_, ms_; // knots, values, Hermite tangents
};

struct EdgeSpec {
    int id = 0;
    int tail = 0;
    int head = 0;
    double length = 0.0;
    Density density = Density::constant(1.0);
};

struct GraphSpec {
    std::vector<int> vertices;
    std::vector<EdgeSpec> edges;
};

// A point of the tree: local coordinate x in [0, length] on an edge,
// measured from the tail. Vertex points canonicalize to the lowest
// incident edge id with an endpoint coordinate.
struct GraphPoint {
    int edge = 0; // edge id
    double x = 0.0;
};

class MetricTree {
public:
    explicit MetricTree(GraphSpec spec); // prefer build_tree()

    const GraphSpec& spec() const { return spec_; }
    int num_edges() const { return static_cast<int>(spec_.edges.size()); }
    int num_vertices() const { return static_cast<int>(spec_.vertices.size()); }

    // degree-1 vertex ids in ascending order; this ordering is the global
    // contract for all vector-valued boundary quantities
    const std::vector<int>& boundary() const { return boundary_; }
    const std::vector<int>& interior() const { return interior_; }

    int vertex_index(int vertex_id) const;
    int edge_index(int edge_id) const;
    const EdgeSpec& edge(int edge_id) const { return spec_.edges[edge_index(edge_id)]; }
    int degree(int vertex_id) const;
    // (edge array index, incident at tail?) pairs for a vertex
    const std::vector<std::pair<int, bool>>& incident(int vertex_id) const;

    double edge_optical_length(int edge_id) const;
    double total_optical_length() const;

    GraphPoint vertex_point(int vertex_id) const;  // canonical form
    GraphPoint canonical(const GraphPoint& p) const;
    bool is_boundary(int vertex_id) const;

    // vertex-to-vertex optical distance (precomputed)
    double vertex_distance(int va, int vb) const;
    // vertex id sequence of the unique path between two vertices
    std::vector<int> vertex_path(int va, int vb) const;

private:
    GraphSpec spec_;
    std::vector<int> boundary_, interior_;
    std::vector<std::vector<std::pair<int, bool>>> adj_; // by vertex index
    std::vector<std::vector<double>> vdist_;             // by vertex index
    std::vector<int> vid_sorted_;                        // id -> index map base
    std::vector<int> eid_sorted_;
};

MetricTree build_tree(GraphSpec spec);

double optical_distance(const MetricTree& tree, const GraphPoint& a, const GraphPoint& b);

struct DiameterResult {
    double value = 0.0;
    int vertex_a = 0, vertex_b = 0; // attaining boundary pair
};
DiameterResult optical_diameter(const MetricTree& tree);

struct CenterResult {
    GraphPoint point;
    double eccentricity = 0.0; // max_gamma sigma(point, gamma) = d/2 on a tree
};
CenterResult optical_center(const MetricTree& tree);

// d_1: largest optical distance from gamma1 to the other boundary vertices
double eccentricity(const MetricTree& tree, int gamma1);

} // namespace treewave
