#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nehari/graph.hpp"
#include "nehari/nonlinearity.hpp"
#include "nehari/solver.hpp"
#include "nehari/spectral.hpp"

namespace nehari {

enum class Side { Below, Above };

std::string to_string(Side side);
/// "below" or "above"; throws ConfigError otherwise.
Side parse_side(const std::string& text);

struct SweepOptions {
    /// delta_i = start * ratio^i * gap, i = 0..count-1, unless `deltas` is set.
    double start = 0.5;
    double ratio = 0.5;
    int count = 10;
    /// Explicit offsets from the target eigenvalue, in absolute units.
    std::optional<std::vector<double>> deltas;
    /// Continuation: each row starts from the previous solution.
    bool warm_start = true;
    /// Rows re-solved from random starts to guard the continuation branch.
    int cross_checks = 3;
    SolverConfig solver;
    EigenOptions eigen;
};

struct SweepRow {
    double lambda = 0.0;
    double delta = 0.0;
    double norm_E = 0.0;
    double norm_lp = 0.0;
    double energy = 0.0;
    double level = 0.0;
    double residual = 0.0;
    double nehari_ray = 0.0;
    double nehari_f = 0.0;
    /// ||u||_p^p <= C1 kappa J(u).
    bool bound_lp_ok = false;
    std::string status;
};

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

struct CrossCheck {
    std::size_t row = 0;
    double continued_level = 0.0;
    double cold_level = 0.0;
    bool agree = false;
};

struct SweepResult {
    int kappa = 1;
    /// 1-based index k of the approached eigenvalue lambda_k.
    std::size_t target_k = 1;
    Side side = Side::Below;
    double target_value = 0.0;
    double gap = 0.0;
    double p = 0.0;
    std::vector<SweepRow> rows;
    ScalingFit fit;
    /// slope >= 1/(p-2) - 0.1
    bool scaling_ok = false;
    std::vector<CrossCheck> cross_checks;

    double expected_exponent() const { return 1.0 / (p - 2.0); }
};

/// Least squares of log ||u||_E on log delta. Pairs with a non-positive entry
/// are dropped; throws std::invalid_argument when fewer than two remain.
ScalingFit fit_scaling(std::span<const double> deltas, std::span<const double> norms);
ScalingFit fit_scaling(std::span<const SweepRow> rows);

/// Ground states at lambda = lambda_k - delta (Below) or lambda_k + delta
/// (Above). kappa = +1 pairs with Below and kappa = -1 with Above. The
/// default gap is lambda_k - lambda_{k-1} below (lambda_2 - lambda_1 for k = 1)
/// and lambda_{k+1} - lambda_k above. Throws SolverError with fewer than 5
/// converged rows.
SweepResult bifurcation_sweep(const WeightedGraph& g, const Nonlinearity& nl, int kappa, std::size_t target_k,
                              Side side, const SweepOptions& options = {});

struct AuditCount {
    std::string name;
    std::size_t checked = 0;
    std::size_t passed = 0;
    std::string witness;
    bool ok() const { return passed == checked; }
};

struct AuditReport {
    std::vector<AuditCount> counts;
    bool ok() const;
    const AuditCount* find(const std::string& name) const;
};

class AuditError : public std::runtime_error {
public:
    AuditError(const std::string& what, AuditReport report)
        : std::runtime_error(what), report_(std::move(report))
    {
    }
    const AuditReport& report() const { return report_; }

private:
    AuditReport report_;
};

struct AuditOptions {
    std::size_t n_random = 200;
    std::uint64_t seed = 0;
    /// K for the l^1 embedding constant; all vertices when empty.
    std::vector<std::size_t> subset;
    /// Relative slack of the form bounds.
    double rel_tol = 1e-10;
    EigenOptions eigen;
};

/// For each lambda and n_random random vectors: both form bounds on E^+-, the
/// l^1 embedding bound with C(K), the oscillation bound, ||u||_{l^2_m} <= ||u||_E,
/// the interpolation ||u||_p^p <= ||u||_inf^{p-1} ||u||_1 and, when the
/// nonlinearity has params, q Psi(u) <= sum m f(u) u and Psi(u) >= a0 ||u||_p^p.
/// Throws AuditError carrying the report and a witness on any failure.
AuditReport audit_inequalities(const WeightedGraph& g, const Nonlinearity& nl, std::span<const double> lambdas,
                               const AuditOptions& options = {});

}  // namespace nehari
