#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "nehari/graph.hpp"

namespace nehari {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Matrix = Eigen::MatrixXd;

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SpectralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stiffness A (u^T A v = q(u, v)) and diagonal mass M = diag(m).
struct FormMatrices {
    SparseMatrix A;
    Vector mass;

    std::size_t size() const { return static_cast<std::size_t>(mass.size()); }
    double q(const Vector& u, const Vector& v) const { return u.dot(A * v); }
    double q(const Vector& u) const { return q(u, u); }
    double mass_inner(const Vector& u, const Vector& v) const { return u.dot(mass.cwiseProduct(v)); }
    Matrix dense_A() const { return Matrix(A); }
};

/// Builds A = graph Laplacian of b + diag(c + m). Throws ValidationError when
/// validate_graph() fails.
FormMatrices assemble(const WeightedGraph& g);

/// q_lambda(u, v) = u^T A v - lambda u^T M v.
double q_lambda(const FormMatrices& fm, double lambda, const Vector& u, const Vector& v);

enum class EigenMethod { Auto, Dense, Lanczos };

struct EigenOptions {
    EigenMethod method = EigenMethod::Auto;
    /// Auto uses the dense solver up to this size.
    std::size_t dense_limit = 512;
    /// Relative residual ||A e - lambda M e|| / ||A e|| required of every pair.
    double tol = 1e-10;
    std::uint64_t seed = 0;
};

/// Ascending eigenpairs of A e = lambda M e with M-orthonormal eigenvectors.
struct SpectralData {
    Vector eigenvalues;
    Matrix eigenvectors;
    std::vector<double> residuals;
    /// Copy of diag(M) so projections are self-contained.
    Vector mass;
    EigenMethod method = EigenMethod::Dense;

    std::size_t count() const { return static_cast<std::size_t>(eigenvalues.size()); }
    std::size_t dimension() const { return static_cast<std::size_t>(mass.size()); }
    bool complete() const { return count() == dimension(); }
    Vector vector(std::size_t n) const { return eigenvectors.col(static_cast<Eigen::Index>(n)); }
    double value(std::size_t n) const { return eigenvalues[static_cast<Eigen::Index>(n)]; }
    /// e_n^T M u
    double coefficient(std::size_t n, const Vector& u) const;
};

/// k smallest eigenpairs. Dense generalized solver or shift-invert Lanczos
/// with full reorthogonalization in the M inner product.
SpectralData eigensolve(const FormMatrices& fm, std::size_t k, const EigenOptions& options = {});

/// Starts from min(n, 32) pairs and doubles until some eigenvalue exceeds lambda
/// or the whole spectrum is computed.
SpectralData spectral_window(const FormMatrices& fm, double lambda, const EigenOptions& options = {});

/// Default E^0 membership tolerance 1e-9 (1 + |lambda|).
double default_split_tol(double lambda);

/// Partition of the computed eigenpairs by comparison with lambda.
struct Splitting {
    double lambda = 0.0;
    double tol = 0.0;
    std::vector<std::size_t> minus;
    std::vector<std::size_t> zero;
    std::vector<std::size_t> plus;
    /// Distance from lambda to the computed eigenvalues.
    double delta = 0.0;
    /// True when the window stops short of the spectrum; E^+ is then the
    /// M-orthogonal complement of E^- + E^0 rather than a span of columns.
    bool truncated = false;

    /// 0-based index of the first eigenvalue above lambda.
    std::size_t first_above() const { return plus.front(); }
};

/// Throws SpectralError("insufficient spectral window") when lambda is not
/// below some computed eigenvalue. tol < 0 selects default_split_tol().
Splitting split(const SpectralData& spec, double lambda, double tol = -1.0);

enum class Part { Minus, Zero, Plus };

/// P u = sum_{n in part} (e_n^T M u) e_n, with P^+ = I - P^- - P^0 on a truncated window.
Vector project(const Splitting& spl, const SpectralData& spec, Part part, const Vector& u);

struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool ok = true;
};

struct FormBoundReport {
    /// 1-based k with lambda in (lambda_{k-1}, lambda_k).
    std::size_t k = 0;
    BoundCheck lower;
    bool has_upper = false;
    BoundCheck upper;
    bool ok() const { return lower.ok && (!has_upper || upper.ok); }
};

/// q_lambda(P^+u) >= (lambda_k - lambda)/lambda_k ||P^+u||_E^2 and, for k > 1,
/// q_lambda(P^-u) <= (lambda_{k-1} - lambda)/lambda_{k-1} ||P^-u||_E^2, each with
/// slack rel_tol * ||P^{+-}u||_E^2. Throws SpectralError when lambda is an eigenvalue.
FormBoundReport verify_form_bounds(const Splitting& spl, const SpectralData& spec,
                                   const FormMatrices& fm, const Vector& u, double rel_tol = 1e-10);

struct ProjectorBound {
    double lower = 0.0;
    double upper = 0.0;
};

/// Certified interval for the l^p_m operator norm of P^-: a sampled lower
/// estimate and the Hoelder bound sum_j ||e_j||_p ||e_j||_{p'}.
ProjectorBound projector_lp_bound(const Splitting& spl, const SpectralData& spec, double p,
                                  std::size_t samples = 200, std::uint64_t seed = 0);

/// l^p norm with respect to the vertex weights `mass`; p = infinity is the sup norm.
double weighted_lp(const Vector& mass, const Vector& u, double p);

}  // namespace nehari
