#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace nehari {

using Vector = Eigen::VectorXd;

/// Vertex identifiers keep their input type so graphs round-trip through JSON.
using VertexId = std::variant<std::int64_t, std::string>;

std::string to_string(const VertexId& id);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Structural problems: bad indices, unknown identifiers, duplicate entries.
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct WeightEntry {
    std::size_t to;
    double weight;
};

/// A weighted graph (b, c) over a vertex measure m.
///
/// Edge weights are stored as directed entries b(x,y) so that an asymmetric
/// or self-looped input survives construction and can be reported by
/// validate_graph(). The killing term c is the stored primitive; the
/// potential V = (c + m) / m is derived.
class WeightedGraph {
public:
    class Builder;

    std::size_t size() const { return ids_.size(); }
    const std::vector<VertexId>& ids() const { return ids_; }
    const VertexId& id(std::size_t x) const { return ids_.at(x); }
    std::span<const double> measure() const { return m_; }
    std::span<const double> killing() const { return c_; }
    double measure(std::size_t x) const { return m_[x]; }
    double killing(std::size_t x) const { return c_[x]; }
    double potential(std::size_t x) const { return (c_[x] + m_[x]) / m_[x]; }
    Vector measure_vector() const;
    Vector potential_vector() const;

    /// Directed entries b(x, .) sorted by target index.
    std::span<const WeightEntry> neighbors(std::size_t x) const;
    /// b(x, y), zero when no entry exists.
    double weight(std::size_t x, std::size_t y) const;
    std::size_t entry_count() const { return entries_.size(); }

    /// Throws GraphError for an unknown identifier.
    std::size_t index_of(const VertexId& id) const;
    bool contains(const VertexId& id) const;

    /// m(A) = sum of m over A.
    double measure_of(std::span<const std::size_t> subset) const;

    friend bool operator==(const WeightedGraph& a, const WeightedGraph& b);

private:
    std::vector<VertexId> ids_;
    std::vector<double> m_;
    std::vector<double> c_;
    std::vector<std::size_t> offsets_;
    std::vector<WeightEntry> entries_;
};

class WeightedGraph::Builder {
public:
    /// Returns the index of the new vertex. Duplicate identifiers throw.
    std::size_t add_vertex(VertexId id, double m, double c = 0.0);
    /// Sets c from a prescribed potential: c = m (V - 1). V < 1 is kept (and
    /// yields a negative c) so that validation can name the vertex.
    std::size_t add_vertex_with_potential(VertexId id, double m, double potential);

    /// Single directed entry b(x, y).
    Builder& set_weight(std::size_t x, std::size_t y, double b);
    /// Symmetric pair b(x, y) = b(y, x) = b.
    Builder& add_edge(std::size_t x, std::size_t y, double b);

    std::size_t size() const { return ids_.size(); }
    WeightedGraph build() const;

private:
    struct Directed {
        std::size_t from;
        std::size_t to;
        double weight;
    };
    std::vector<VertexId> ids_;
    std::vector<double> m_;
    std::vector<double> c_;
    std::vector<Directed> entries_;
    std::set<std::pair<std::size_t, std::size_t>> seen_;
};

// ---------------------------------------------------------------------------
// Norms and forms evaluated by direct summation over vertices and edges.

double inner_m(const WeightedGraph& g, const Vector& u, const Vector& v);
/// Weighted l^p_m norm; p = infinity gives the (unweighted) sup norm.
double norm_lp(const WeightedGraph& g, const Vector& u, double p);
double norm_inf(const Vector& u);

/// Neumann form q(u, v) = 1/2 sum_{x,y} b(x,y)(u(y)-u(x))(v(y)-v(x)) + sum m V u v.
double neumann_form(const WeightedGraph& g, const Vector& u, const Vector& v);
double neumann_form(const WeightedGraph& g, const Vector& u);
/// Only the edge part 1/2 sum b (du)^2.
double edge_energy(const WeightedGraph& g, const Vector& u);
double norm_E(const WeightedGraph& g, const Vector& u);

/// A vertex function bound to its graph.
class GraphFunction {
public:
    GraphFunction(const WeightedGraph& g, Vector values);

    const WeightedGraph& graph() const { return *graph_; }
    const Vector& values() const { return values_; }
    double operator[](std::size_t x) const { return values_[static_cast<Eigen::Index>(x)]; }

    double norm_l2() const { return nehari::norm_lp(*graph_, values_, 2.0); }
    double norm_lp(double p) const { return nehari::norm_lp(*graph_, values_, p); }
    double norm_inf() const { return nehari::norm_inf(values_); }
    double norm_E() const { return nehari::norm_E(*graph_, values_); }

private:
    const WeightedGraph* graph_;
    Vector values_;
};

// ---------------------------------------------------------------------------
// Validation.

struct Check {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<Check> checks;

    bool passed() const;
    const Check* find(const std::string& name) const;
    std::vector<std::string> failures() const;
};

/// Runs (b0), (b1), (b2), m > 0, c >= 0, V >= 1 and connectivity checks.
ValidationReport validate_graph(const WeightedGraph& g);

bool is_connected(const WeightedGraph& g);
/// Connected components of the subgraph induced by `subset`.
std::vector<std::vector<std::size_t>> induced_components(const WeightedGraph& g,
                                                         std::span<const std::size_t> subset);

// ---------------------------------------------------------------------------
// Path metric d(x,y) with edge length 1 / b(x,y).

/// Single-source distances (Dijkstra); unreachable vertices get infinity.
std::vector<double> distances_from(const WeightedGraph& g, std::size_t source);
double path_metric(const WeightedGraph& g, std::size_t x, std::size_t y);
double path_metric(const WeightedGraph& g, const VertexId& x, const VertexId& y);

/// sup over pairs of `subset` of d(x, y); paths may leave the subset.
double diameter(const WeightedGraph& g, std::span<const std::size_t> subset);

/// Ordered double sum of 1/b(x,y) over x, y in `subset` with b(x,y) > 0.
/// Throws GraphError naming a separating cut when the subset is disconnected.
double check_summability(const WeightedGraph& g, std::span<const std::size_t> subset);

struct PoincareResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool ok = true;
};

/// Oscillation of u over `subset` against diam(subset)^{1/2} q(u)^{1/2}.
PoincareResult poincare_check(const WeightedGraph& g, std::span<const std::size_t> subset,
                              const Vector& u, double tol = 1e-12);

/// C(K) = (sum_{x not in K} m(x)^2 / (c(x) + m(x)))^{1/2} + m(K)^{1/2}, so that
/// ||u||_{l^1_m} <= C(K) ||u||_E.
double ell1_embedding_constant(const WeightedGraph& g, std::span<const std::size_t> subset);

// ---------------------------------------------------------------------------
// Families of finite truncations.

struct TruncationFamily {
    std::function<WeightedGraph(int)> generate;
    /// K_t as indices into generate(t).
    std::function<std::vector<std::size_t>(const WeightedGraph&, int)> subset;
};

struct GrowthRow {
    int t = 0;
    double inf_potential_outside = 0.0;
    double measure_inside = 0.0;
    std::size_t outside_count = 0;
};

/// Rows (t, inf_{x not in K_t} V(x), m(K_t)). Throws when a complement is empty
/// or when K_t is not contained in K_{t+1} (compared by vertex id).
std::vector<GrowthRow> check_potential_growth(const TruncationFamily& family,
                                              std::span<const int> ts);

/// Line graph on {-n_minus, ..., n_plus}: m(i) = 1/(i+1) and b(i,i+1) = i+1 for
/// i >= 0, m(i) = 1/i^2 and b(i,i+1) = i^2 for i < 0. The potential is V(i) = i
/// for i >= 1 and V(i) = 1 for i <= 0. With `literal_potential` the unclamped
/// values V(i) = max(i, 0) are used instead; such a graph fails validation.
WeightedGraph example_line_graph(int n_minus, int n_plus, bool literal_potential = false);

/// K_t = {-n_minus, ..., t} inside example_line_graph(n_minus, t + extra).
TruncationFamily line_graph_family(int n_minus, int extra = 10);

/// Indices of the vertices {-(count-1), ..., 0} of a line graph, i.e. the
/// truncated negative half together with its attaching vertex 0.
std::vector<std::size_t> line_graph_negative_half(const WeightedGraph& g, int count);

/// Path graph 0 - 1 - ... - (n-1) with constant m, b and c.
WeightedGraph path_graph(std::size_t n, double m = 1.0, double b = 1.0, double c = 0.0);

std::vector<std::size_t> all_vertices(const WeightedGraph& g);
std::vector<std::size_t> complement_of(const WeightedGraph& g, std::span<const std::size_t> subset);

}  // namespace nehari
