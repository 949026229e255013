#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nehari/graph.hpp"

namespace nehari {

/// Structural constants used by the critical-value and bifurcation bounds:
/// 0 < q F(x,s) <= f(x,s) s, F(x,s) >= a0 |s|^p and |f(x,s)| <= a1 |s|^{p-1}.
struct NonlinearityParams {
    double p = 0.0;
    double q = 0.0;
    double a0 = 0.0;
    double a1 = 0.0;
};

/// Evaluator pair (f, F) with an optional derivative df = d/ds f.
///
/// Custom nonlinearities must supply F explicitly; nothing is integrated
/// numerically. When df is absent it is approximated by central differences.
class Nonlinearity {
public:
    using Eval = std::function<double(std::size_t, double)>;

    enum class Kind { Power, Custom };

    static Nonlinearity custom(Eval f, Eval F, Eval df = {},
                               std::optional<NonlinearityParams> params = std::nullopt,
                               bool odd = false);

    Kind kind() const { return kind_; }
    const std::optional<NonlinearityParams>& params() const { return params_; }
    bool is_odd() const { return odd_; }

    double f(std::size_t x, double s) const { return f_(x, s); }
    double F(std::size_t x, double s) const { return F_(x, s); }
    double df(std::size_t x, double s) const;

    /// Power weights g(x); empty for custom kinds.
    const std::vector<double>& weights() const { return g_; }

private:
    friend Nonlinearity power_nonlinearity(double p, std::vector<double> g);

    Kind kind_ = Kind::Custom;
    Eval f_;
    Eval F_;
    Eval df_;
    std::optional<NonlinearityParams> params_;
    bool odd_ = false;
    std::vector<double> g_;
};

/// f(x,s) = g(x)|s|^{p-2}s and F(x,s) = g(x)|s|^p/p with params
/// (p, q = p, a0 = min g / p, a1 = max g). Requires p > 2 and g > 0.
Nonlinearity power_nonlinearity(double p, std::vector<double> g);

struct AssumptionReport {
    std::vector<Check> checks;
    bool passed() const;
    const Check* find(const std::string& name) const;
};

/// Grid validation of (f1)-(f4), positivity of F and, when params are
/// present, the AR condition and the two power bounds. The grid is used for
/// both signs; it should reach |s| >= 10 and contain values near 0.
///
/// (f3) is checked as strict monotonicity of f/|s| on each half-line, (f4)
/// as F/s^2 increasing over the outermost decade of the grid and (f2) as
/// f/s shrinking when |s| drops by a decade near 0. These are heuristics:
/// a pass means "passes on the grid".
AssumptionReport validate_assumptions(const Nonlinearity& nl, std::span<const double> grid,
                                      std::span<const std::size_t> vertices);

/// Symmetric logarithmic grid {+-s_min, ..., +-s_max} with `per_decade` points per decade.
std::vector<double> log_grid(double s_min = 1e-6, double s_max = 10.0, int per_decade = 8);

/// Psi(u) = sum m(x) F(x, u(x)).
double Psi(const WeightedGraph& g, const Nonlinearity& nl, const Vector& u);
/// r(x) = f(x, u(x)) so that sum m r h is the derivative of Psi along h.
Vector grad_Psi(const WeightedGraph& g, const Nonlinearity& nl, const Vector& u);
/// Pointwise df(x, u(x)).
Vector dgrad_Psi(const WeightedGraph& g, const Nonlinearity& nl, const Vector& u);

}  // namespace nehari
