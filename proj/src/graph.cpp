#include "nehari/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace nehari {

std::string to_string(const VertexId& id)
{
    if (const auto* i = std::get_if<std::int64_t>(&id)) {
        return std::to_string(*i);
    }
    return std::get<std::string>(id);
}

// ---------------------------------------------------------------------------
// WeightedGraph

Vector WeightedGraph::measure_vector() const
{
    return Eigen::Map<const Vector>(m_.data(), static_cast<Eigen::Index>(m_.size()));
}

Vector WeightedGraph::potential_vector() const
{
    Vector v(static_cast<Eigen::Index>(size()));
    for (std::size_t x = 0; x < size(); ++x) {
        v[static_cast<Eigen::Index>(x)] = potential(x);
    }
    return v;
}

std::span<const WeightEntry> WeightedGraph::neighbors(std::size_t x) const
{
    if (x >= size()) {
        throw GraphError(fmt::format("vertex index {} out of range (n = {})", x, size()));
    }
    return {entries_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
}

double WeightedGraph::weight(std::size_t x, std::size_t y) const
{
    const auto row = neighbors(x);
    const auto it = std::lower_bound(row.begin(), row.end(), y,
                                     [](const WeightEntry& e, std::size_t t) { return e.to < t; });
    return (it != row.end() && it->to == y) ? it->weight : 0.0;
}

std::size_t WeightedGraph::index_of(const VertexId& id) const
{
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) {
        throw GraphError("unknown vertex identifier '" + to_string(id) + "'");
    }
    return static_cast<std::size_t>(it - ids_.begin());
}

bool WeightedGraph::contains(const VertexId& id) const
{
    return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

double WeightedGraph::measure_of(std::span<const std::size_t> subset) const
{
    double total = 0.0;
    for (const auto x : subset) {
        total += m_.at(x);
    }
    return total;
}

bool operator==(const WeightedGraph& a, const WeightedGraph& b)
{
    if (a.ids_ != b.ids_ || a.m_ != b.m_ || a.c_ != b.c_ || a.offsets_ != b.offsets_) {
        return false;
    }
    return std::equal(a.entries_.begin(), a.entries_.end(), b.entries_.begin(), b.entries_.end(),
                      [](const WeightEntry& l, const WeightEntry& r) {
                          return l.to == r.to && l.weight == r.weight;
                      });
}

std::size_t WeightedGraph::Builder::add_vertex(VertexId id, double m, double c)
{
    if (std::find(ids_.begin(), ids_.end(), id) != ids_.end()) {
        throw GraphError("duplicate vertex identifier '" + to_string(id) + "'");
    }
    ids_.push_back(std::move(id));
    m_.push_back(m);
    c_.push_back(c);
    return ids_.size() - 1;
}

std::size_t WeightedGraph::Builder::add_vertex_with_potential(VertexId id, double m, double potential)
{
    return add_vertex(std::move(id), m, m * (potential - 1.0));
}

WeightedGraph::Builder& WeightedGraph::Builder::set_weight(std::size_t x, std::size_t y, double b)
{
    if (x >= ids_.size() || y >= ids_.size()) {
        throw GraphError(fmt::format("edge ({}, {}) references a vertex index out of range (n = {})",
                                     x, y, ids_.size()));
    }
    if (!seen_.emplace(x, y).second) {
        throw GraphError("duplicate edge entry (" + to_string(ids_[x]) + ", " +
                         to_string(ids_[y]) + ")");
    }
    entries_.push_back({x, y, b});
    return *this;
}

WeightedGraph::Builder& WeightedGraph::Builder::add_edge(std::size_t x, std::size_t y, double b)
{
    set_weight(x, y, b);
    if (x != y) {
        set_weight(y, x, b);
    }
    return *this;
}

WeightedGraph WeightedGraph::Builder::build() const
{
    WeightedGraph g;
    g.ids_ = ids_;
    g.m_ = m_;
    g.c_ = c_;
    const std::size_t n = ids_.size();
    g.offsets_.assign(n + 1, 0);
    for (const auto& e : entries_) {
        ++g.offsets_[e.from + 1];
    }
    for (std::size_t x = 0; x < n; ++x) {
        g.offsets_[x + 1] += g.offsets_[x];
    }
    g.entries_.resize(entries_.size());
    auto cursor = g.offsets_;
    for (const auto& e : entries_) {
        g.entries_[cursor[e.from]++] = {e.to, e.weight};
    }
    for (std::size_t x = 0; x < n; ++x) {
        std::sort(g.entries_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[x]),
                  g.entries_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[x + 1]),
                  [](const WeightEntry& a, const WeightEntry& b) { return a.to < b.to; });
    }
    return g;
}

// ---------------------------------------------------------------------------
// Norms and forms

double inner_m(const WeightedGraph& g, const Vector& u, const Vector& v)
{
    double total = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x) {
        const auto i = static_cast<Eigen::Index>(x);
        total += g.measure(x) * u[i] * v[i];
    }
    return total;
}

double norm_inf(const Vector& u)
{
    return u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
}

double norm_lp(const WeightedGraph& g, const Vector& u, double p)
{
    if (std::isinf(p)) {
        return norm_inf(u);
    }
    if (!(p >= 1.0)) {
        throw std::invalid_argument("l^p norm requires p >= 1");
    }
    // Scale by the sup norm so large p does not overflow.
    const double scale = norm_inf(u);
    if (scale == 0.0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x) {
        total += g.measure(x) * std::pow(std::abs(u[static_cast<Eigen::Index>(x)]) / scale, p);
    }
    return scale * std::pow(total, 1.0 / p);
}

double neumann_form(const WeightedGraph& g, const Vector& u, const Vector& v)
{
    double edges = 0.0;
    double diag = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x) {
        const auto ix = static_cast<Eigen::Index>(x);
        for (const auto& e : g.neighbors(x)) {
            const auto iy = static_cast<Eigen::Index>(e.to);
            edges += e.weight * (u[iy] - u[ix]) * (v[iy] - v[ix]);
        }
        diag += (g.killing(x) + g.measure(x)) * u[ix] * v[ix];
    }
    return 0.5 * edges + diag;
}

double neumann_form(const WeightedGraph& g, const Vector& u)
{
    return neumann_form(g, u, u);
}

double edge_energy(const WeightedGraph& g, const Vector& u)
{
    double edges = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x) {
        for (const auto& e : g.neighbors(x)) {
            const double d = u[static_cast<Eigen::Index>(e.to)] - u[static_cast<Eigen::Index>(x)];
            edges += e.weight * d * d;
        }
    }
    return 0.5 * edges;
}

double norm_E(const WeightedGraph& g, const Vector& u)
{
    return std::sqrt(std::max(0.0, neumann_form(g, u)));
}

GraphFunction::GraphFunction(const WeightedGraph& g, Vector values)
    : graph_(&g), values_(std::move(values))
{
    if (static_cast<std::size_t>(values_.size()) != g.size()) {
        throw GraphError(fmt::format("vertex function has {} values for a graph with {} vertices",
                                     values_.size(), g.size()));
    }
    if (!values_.allFinite()) {
        throw GraphError("vertex function values must be finite");
    }
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* ValidationReport::find(const std::string& name) const
{
    for (const auto& c : checks) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

std::vector<std::string> ValidationReport::failures() const
{
    std::vector<std::string> out;
    for (const auto& c : checks) {
        if (!c.passed) {
            out.push_back(c.name + ": " + c.detail);
        }
    }
    return out;
}

namespace {

void fail_once(Check& check, const std::string& detail)
{
    if (check.passed) {
        check.passed = false;
        check.detail = detail;
    }
}

}  // namespace

bool is_connected(const WeightedGraph& g)
{
    if (g.size() == 0) {
        return false;
    }
    return induced_components(g, all_vertices(g)).size() == 1;
}

std::vector<std::vector<std::size_t>> induced_components(const WeightedGraph& g,
                                                         std::span<const std::size_t> subset)
{
    const std::size_t n = g.size();
    std::vector<char> inside(n, 0);
    for (const auto x : subset) {
        inside.at(x) = 1;
    }
    // Undirected adjacency: an entry in either direction connects the pair.
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t x = 0; x < n; ++x) {
        for (const auto& e : g.neighbors(x)) {
            if (e.weight > 0.0 && e.to != x && inside[x] && inside[e.to]) {
                adj[x].push_back(e.to);
                adj[e.to].push_back(x);
            }
        }
    }
    std::vector<char> seen(n, 0);
    std::vector<std::vector<std::size_t>> comps;
    for (const auto start : subset) {
        if (seen[start]) {
            continue;
        }
        std::vector<std::size_t> comp;
        std::queue<std::size_t> frontier;
        frontier.push(start);
        seen[start] = 1;
        while (!frontier.empty()) {
            const auto x = frontier.front();
            frontier.pop();
            comp.push_back(x);
            for (const auto y : adj[x]) {
                if (!seen[y]) {
                    seen[y] = 1;
                    frontier.push(y);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

ValidationReport validate_graph(const WeightedGraph& g)
{
    Check b0{"b0_zero_diagonal"};
    Check b1{"b1_symmetry"};
    Check b2{"b2_finite_degree"};
    Check nonneg{"weights_nonnegative"};
    Check mpos{"measure_positive"};
    Check cnonneg{"killing_nonnegative"};
    Check vge1{"potential_at_least_one"};
    Check conn{"connected"};

    const auto name = [&g](std::size_t x) { return to_string(g.id(x)); };

    if (g.size() == 0) {
        fail_once(conn, "graph has no vertices");
    }
    for (std::size_t x = 0; x < g.size(); ++x) {
        double degree = 0.0;
        for (const auto& e : g.neighbors(x)) {
            if (e.to == x && e.weight != 0.0) {
                fail_once(b0, fmt::format("b({0},{0}) = {1} must vanish", name(x), e.weight));
            }
            if (!(e.weight >= 0.0)) {
                fail_once(nonneg, fmt::format("b({},{}) = {} is negative", name(x), name(e.to), e.weight));
            }
            const double back = g.weight(e.to, x);
            if (back != e.weight) {
                fail_once(b1, fmt::format("b({},{}) = {} but b({},{}) = {}", name(x), name(e.to),
                                          e.weight, name(e.to), name(x), back));
            }
            degree += e.weight;
        }
        if (!std::isfinite(degree)) {
            fail_once(b2, fmt::format("sum of b({}, .) is not finite", name(x)));
        }
        const double m = g.measure(x);
        const double c = g.killing(x);
        if (!(m > 0.0) || !std::isfinite(m)) {
            fail_once(mpos, fmt::format("m({}) = {} must be positive", name(x), m));
        }
        if (!(c >= 0.0) || !std::isfinite(c)) {
            fail_once(cnonneg, fmt::format("c({}) = {} must be nonnegative", name(x), c));
        }
        const double v = (c + m) / m;
        if (!(v >= 1.0)) {
            fail_once(vge1, fmt::format("V must be >= 1, but V({}) = {}", name(x), v));
        }
    }
    if (g.size() > 0) {
        const auto comps = induced_components(g, all_vertices(g));
        if (comps.size() > 1) {
            fail_once(conn, fmt::format("{} components; vertex {} is not reachable from {}", comps.size(),
                                        name(comps[1].front()), name(comps[0].front())));
        }
    }
    return ValidationReport{{b0, b1, b2, nonneg, mpos, cnonneg, vge1, conn}};
}

// ---------------------------------------------------------------------------
// Path metric

std::vector<double> distances_from(const WeightedGraph& g, std::size_t source)
{
    const std::size_t n = g.size();
    if (source >= n) {
        throw GraphError(fmt::format("vertex index {} out of range (n = {})", source, n));
    }
    std::vector<double> dist(n, kInfinity);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, x] = heap.top();
        heap.pop();
        if (d > dist[x]) {
            continue;
        }
        for (const auto& e : g.neighbors(x)) {
            if (e.weight <= 0.0 || e.to == x) {
                continue;
            }
            const double nd = d + 1.0 / e.weight;
            if (nd < dist[e.to]) {
                dist[e.to] = nd;
                heap.emplace(nd, e.to);
            }
        }
    }
    return dist;
}

double path_metric(const WeightedGraph& g, std::size_t x, std::size_t y)
{
    if (y >= g.size()) {
        throw GraphError(fmt::format("vertex index {} out of range (n = {})", y, g.size()));
    }
    return distances_from(g, x)[y];
}

double path_metric(const WeightedGraph& g, const VertexId& x, const VertexId& y)
{
    return path_metric(g, g.index_of(x), g.index_of(y));
}

double diameter(const WeightedGraph& g, std::span<const std::size_t> subset)
{
    if (subset.empty()) {
        throw GraphError("diameter of an empty subset is undefined");
    }
    double diam = 0.0;
    for (const auto x : subset) {
        const auto dist = distances_from(g, x);
        for (const auto y : subset) {
            diam = std::max(diam, dist.at(y));
        }
    }
    return diam;
}

double check_summability(const WeightedGraph& g, std::span<const std::size_t> subset)
{
    const auto comps = induced_components(g, subset);
    if (comps.size() > 1) {
        std::ostringstream cut;
        cut << "subset is not connected: {";
        for (std::size_t i = 0; i < comps[0].size(); ++i) {
            cut << (i ? ", " : "") << to_string(g.id(comps[0][i]));
        }
        cut << "} is separated from the remaining " << (subset.size() - comps[0].size())
            << " vertices of the subset";
        throw GraphError(cut.str());
    }
    std::vector<char> inside(g.size(), 0);
    for (const auto x : subset) {
        inside.at(x) = 1;
    }
    double total = 0.0;
    for (const auto x : subset) {
        for (const auto& e : g.neighbors(x)) {
            if (inside[e.to] && e.weight > 0.0) {
                total += 1.0 / e.weight;
            }
        }
    }
    return total;
}

PoincareResult poincare_check(const WeightedGraph& g, std::span<const std::size_t> subset,
                              const Vector& u, double tol)
{
    PoincareResult r;
    if (subset.empty()) {
        return r;
    }
    double hi = -kInfinity;
    double lo = kInfinity;
    for (const auto x : subset) {
        const double v = u[static_cast<Eigen::Index>(x)];
        hi = std::max(hi, v);
        lo = std::min(lo, v);
    }
    r.lhs = hi - lo;
    r.rhs = std::sqrt(diameter(g, subset)) * std::sqrt(std::max(0.0, neumann_form(g, u)));
    r.ok = r.lhs <= r.rhs + tol * (1.0 + r.rhs);
    return r;
}

double ell1_embedding_constant(const WeightedGraph& g, std::span<const std::size_t> subset)
{
    std::vector<char> inside(g.size(), 0);
    for (const auto x : subset) {
        inside.at(x) = 1;
    }
    double outside = 0.0;
    double measure_inside = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x) {
        const double m = g.measure(x);
        if (inside[x]) {
            measure_inside += m;
        } else {
            outside += m * m / (g.killing(x) + m);
        }
    }
    return std::sqrt(outside) + std::sqrt(measure_inside);
}

// ---------------------------------------------------------------------------
// Truncation families

std::vector<GrowthRow> check_potential_growth(const TruncationFamily& family,
                                              std::span<const int> ts)
{
    std::vector<GrowthRow> rows;
    std::set<VertexId> previous;
    bool have_previous = false;
    for (const int t : ts) {
        const WeightedGraph g = family.generate(t);
        const auto inside = family.subset(g, t);
        const auto outside = complement_of(g, inside);
        if (outside.empty()) {
            throw GraphError(fmt::format("complement of K_{} is empty in the generated truncation", t));
        }
        std::set<VertexId> current;
        for (const auto x : inside) {
            current.insert(g.id(x));
        }
        if (have_previous && !std::includes(current.begin(), current.end(), previous.begin(), previous.end())) {
            throw GraphError(fmt::format("K_{} does not contain the previous subset", t));
        }
        GrowthRow row;
        row.t = t;
        row.inf_potential_outside = kInfinity;
        for (const auto x : outside) {
            row.inf_potential_outside = std::min(row.inf_potential_outside, g.potential(x));
        }
        row.measure_inside = g.measure_of(inside);
        row.outside_count = outside.size();
        rows.push_back(row);
        previous = std::move(current);
        have_previous = true;
    }
    return rows;
}

WeightedGraph example_line_graph(int n_minus, int n_plus, bool literal_potential)
{
    if (n_minus < 1 || n_plus < 1) {
        throw GraphError("line graph requires n_minus >= 1 and n_plus >= 1");
    }
    WeightedGraph::Builder builder;
    for (int i = -n_minus; i <= n_plus; ++i) {
        const double di = static_cast<double>(i);
        const double m = i >= 0 ? 1.0 / (di + 1.0) : 1.0 / (di * di);
        double v = 0.0;
        if (literal_potential) {
            v = i >= 0 ? di : 0.0;
        } else {
            v = i >= 1 ? di : 1.0;
        }
        builder.add_vertex_with_potential(static_cast<std::int64_t>(i), m, v);
    }
    for (int i = -n_minus; i < n_plus; ++i) {
        const double di = static_cast<double>(i);
        const double b = i >= 0 ? di + 1.0 : di * di;
        const auto x = static_cast<std::size_t>(i + n_minus);
        builder.add_edge(x, x + 1, b);
    }
    return builder.build();
}

TruncationFamily line_graph_family(int n_minus, int extra)
{
    TruncationFamily family;
    family.generate = [n_minus, extra](int t) { return example_line_graph(n_minus, t + extra); };
    family.subset = [n_minus](const WeightedGraph& g, int t) {
        std::vector<std::size_t> k;
        for (int i = -n_minus; i <= t; ++i) {
            k.push_back(g.index_of(static_cast<std::int64_t>(i)));
        }
        return k;
    };
    return family;
}

std::vector<std::size_t> line_graph_negative_half(const WeightedGraph& g, int count)
{
    std::vector<std::size_t> out;
    for (int i = -(count - 1); i <= 0; ++i) {
        out.push_back(g.index_of(static_cast<std::int64_t>(i)));
    }
    return out;
}

WeightedGraph path_graph(std::size_t n, double m, double b, double c)
{
    WeightedGraph::Builder builder;
    for (std::size_t i = 0; i < n; ++i) {
        builder.add_vertex(static_cast<std::int64_t>(i), m, c);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        builder.add_edge(i, i + 1, b);
    }
    return builder.build();
}

std::vector<std::size_t> all_vertices(const WeightedGraph& g)
{
    std::vector<std::size_t> out(g.size());
    for (std::size_t x = 0; x < g.size(); ++x) {
        out[x] = x;
    }
    return out;
}

std::vector<std::size_t> complement_of(const WeightedGraph& g, std::span<const std::size_t> subset)
{
    std::vector<char> inside(g.size(), 0);
    for (const auto x : subset) {
        inside.at(x) = 1;
    }
    std::vector<std::size_t> out;
    for (std::size_t x = 0; x < g.size(); ++x) {
        if (!inside[x]) {
            out.push_back(x);
        }
    }
    return out;
}

}  // namespace nehari
