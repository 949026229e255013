#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nehari/graph.hpp"
#include "nehari/nonlinearity.hpp"
#include "nehari/spectral.hpp"

namespace nehari {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolverConfig {
    /// +1 self-focusing, -1 defocusing.
    int kappa = 1;
    double lambda = 0.0;
    double tol_grad = 1e-9;
    double tol_inner = 1e-11;
    int max_outer_iters = 200;
    int max_inner_iters = 100;
    int n_starts = 8;
    std::uint64_t seed = 0;
    int threads = 1;

    /// Throws ConfigError.
    void validate() const;
};

/// Everything the energy needs: the graph, its forms and the nonlinearity.
/// The referenced objects must outlive the problem.
struct Problem {
    const WeightedGraph& graph;
    const FormMatrices& forms;
    const Nonlinearity& nl;
};

/// J_lambda(u) = 1/2 q_lambda(u) - kappa Psi(u).
double J(const Problem& pb, const SolverConfig& cfg, const Vector& u);

/// Vertex function r with sum m r v = J'(u) v, evaluated from the graph as
/// r = -Delta u + V u - lambda u - kappa f(u). r = 0 iff u solves the equation.
Vector grad_J(const Problem& pb, const SolverConfig& cfg, const Vector& u);

/// J'(u) v = sum m r v.
double grad_J_pairing(const Problem& pb, const SolverConfig& cfg, const Vector& u, const Vector& v);

/// The subspace F on which kappa J is non-positive, and its complement.
struct NehariSplitting {
    Splitting splitting;
    /// Eigen-indices spanning F: E^- + E^0 for kappa = +1, E^+ + E^0 for kappa = -1.
    std::vector<std::size_t> f_indices;
    /// Eigen-indices of the complement inside the computed window.
    std::vector<std::size_t> complement_indices;
    /// Part of the complement not covered by the window (kappa = +1 only).
    bool complement_has_remainder = false;

    bool complement_empty() const { return complement_indices.empty() && !complement_has_remainder; }
};

/// Builds F per the sign of kappa. kappa = -1 needs the full spectrum.
NehariSplitting nehari_splitting(const SpectralData& spec, const SolverConfig& cfg);

struct InnerResult {
    Vector u;
    /// max over Ê(w) of kappa J.
    double value = 0.0;
    double t = 0.0;
    /// E-normalized component of w off F (possibly reflected so t >= 0).
    Vector w_hat;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Hessian of kappa J restricted to Ê(w) negative definite at the maximizer.
    bool second_order_ok = false;
    /// |J'(u) u| and max over the F basis of |J'(u) e|.
    double nehari_ray = 0.0;
    double nehari_f = 0.0;
};

/// Maximizes kappa J over {t w_perp + v : t >= 0, v in F} by safeguarded Newton
/// in the (dim F + 1) coordinates. Throws SolverError when w lies in F.
InnerResult inner_maximize(const Problem& pb, const SolverConfig& cfg, const SpectralData& spec,
                           const NehariSplitting& ns, const Vector& w);

struct StartReport {
    int index = 0;
    std::uint64_t seed = 0;
    std::string status;
    int outer_iterations = 0;
    int polish_iterations = 0;
    double residual = 0.0;
    double level = 0.0;
    double norm_E = 0.0;
};

struct GroundStateResult {
    /// "converged", "no_nontrivial".
    std::string status;
    Vector u;
    double energy = 0.0;
    /// kappa J(u), the estimate of the ground level c_lambda.
    double level = 0.0;
    int kappa = 1;
    double lambda = 0.0;
    double delta = 0.0;
    /// ||r||_{l^2_m}
    double residual_grad = 0.0;
    /// E-dual norm (r^T M A^{-1} M r)^{1/2}
    double residual_grad_E = 0.0;
    double nehari_ray = 0.0;
    double nehari_f = 0.0;
    double norm_E = 0.0;
    double norm_l2 = 0.0;
    double norm_lp = 0.0;
    double norm_inf = 0.0;
    double p = 2.0;
    bool second_order_ok = false;
    /// |max over Ê(u) of kappa J - kappa J(u)|, re-solved at the returned point.
    double minimax_gap = 0.0;
    std::vector<StartReport> starts;

    bool nontrivial() const { return status == "converged"; }
};

/// Minimizes w -> max over Ê(w) of kappa J over the unit E-sphere of the
/// complement of F from cfg.n_starts random starts (seed + index), then
/// polishes the best point with Newton on J'(u) = 0. An optional warm start
/// replaces the first random start.
GroundStateResult ground_state(const Problem& pb, const SolverConfig& cfg, const SpectralData& spec,
                               const std::optional<Vector>& warm_start = std::nullopt);

struct NoSolutionRun {
    int index = 0;
    double initial_norm_E = 0.0;
    double final_norm_E = 0.0;
    double final_residual = 0.0;
    int iterations = 0;
    bool collapsed = false;
};

struct NoSolutionReport {
    std::vector<NoSolutionRun> runs;
    bool all_collapsed = false;
    std::size_t samples = 0;
    std::size_t positive_samples = 0;
    /// Smallest J'(u) u / ||u||_E^2 over the samples.
    double min_scaled_pairing = 0.0;
    bool certified() const { return all_collapsed && positive_samples == samples; }
};

/// For kappa = -1 and lambda <= lambda_1: multi-start Levenberg-Marquardt
/// minimization of ||J'(u)||^2 must collapse to 0 (||u||_E < 1e-6), and
/// J'(u) u > 0 must hold on random samples. A run that reaches a nontrivial
/// zero of the residual throws SolverError.
NoSolutionReport verify_no_solution(const Problem& pb, const SolverConfig& cfg, const SpectralData& spec,
                                    std::size_t samples = 1000);

struct CriticalValueReport {
    bool skipped = false;
    std::string note;
    double lp_power = 0.0;
    double C1 = 0.0;
    double level = 0.0;
    bool bound_lp_ok = true;
    double delta = 0.0;
    double norm_E_sq = 0.0;
    /// delta ||u||_E^2 / (kappa J(u)); reported, not asserted.
    double energy_ratio = 0.0;
};

/// ||u||_p^p <= C1 kappa J(u) with C1 = [q (1/2 - 1/q) a0]^{-1}. Throws
/// SolverError on violation when `enforce` is set.
CriticalValueReport check_critical_value_bounds(const GroundStateResult& result, const Problem& pb,
                                                double rel_tol = 1e-9, bool enforce = true);

}  // namespace nehari
