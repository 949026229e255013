#include "nehari/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

namespace nehari {

FormMatrices assemble(const WeightedGraph& g)
{
    const auto report = validate_graph(g);
    if (!report.passed()) {
        std::string msg = "graph failed validation";
        for (const auto& f : report.failures()) {
            msg += "; " + f;
        }
        throw ValidationError(msg);
    }
    const auto n = static_cast<Eigen::Index>(g.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(g.entry_count() * 2 + g.size());
    for (std::size_t x = 0; x < g.size(); ++x) {
        const auto ix = static_cast<Eigen::Index>(x);
        double degree = 0.0;
        for (const auto& e : g.neighbors(x)) {
            triplets.emplace_back(ix, static_cast<Eigen::Index>(e.to), -e.weight);
            degree += e.weight;
        }
        triplets.emplace_back(ix, ix, degree + g.killing(x) + g.measure(x));
    }
    FormMatrices fm;
    fm.A.resize(n, n);
    fm.A.setFromTriplets(triplets.begin(), triplets.end());
    fm.A.makeCompressed();
    fm.mass = g.measure_vector();
    return fm;
}

double q_lambda(const FormMatrices& fm, double lambda, const Vector& u, const Vector& v)
{
    return fm.q(u, v) - lambda * fm.mass_inner(u, v);
}

double SpectralData::coefficient(std::size_t n, const Vector& u) const
{
    return eigenvectors.col(static_cast<Eigen::Index>(n)).dot(mass.cwiseProduct(u));
}

namespace {

// First non-negligible coordinate positive.
void normalize_signs(Matrix& vecs)
{
    for (Eigen::Index j = 0; j < vecs.cols(); ++j) {
        const double scale = vecs.col(j).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
            if (std::abs(vecs(i, j)) > 1e-8 * scale) {
                if (vecs(i, j) < 0.0) {
                    vecs.col(j) *= -1.0;
                }
                break;
            }
        }
    }
}

std::vector<double> relative_residuals(const FormMatrices& fm, const Vector& values, const Matrix& vecs)
{
    std::vector<double> res;
    for (Eigen::Index j = 0; j < values.size(); ++j) {
        const Vector e = vecs.col(j);
        const Vector Ae = fm.A * e;
        const Vector r = Ae - values[j] * fm.mass.cwiseProduct(e);
        const double denom = std::max(Ae.norm(), 1e-300);
        res.push_back(r.norm() / denom);
    }
    return res;
}

SpectralData dense_solve(const FormMatrices& fm, std::size_t k)
{
    const Matrix A = fm.dense_A();
    const Matrix M = fm.mass.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(A, M, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (solver.info() != Eigen::Success) {
        throw SpectralError("dense generalized eigensolver failed");
    }
    SpectralData sd;
    const auto kk = static_cast<Eigen::Index>(k);
    sd.eigenvalues = solver.eigenvalues().head(kk);
    sd.eigenvectors = solver.eigenvectors().leftCols(kk);
    // Re-normalize in the M inner product to remove rounding from the Cholesky transform.
    for (Eigen::Index j = 0; j < kk; ++j) {
        const double nrm = std::sqrt(fm.mass_inner(sd.eigenvectors.col(j), sd.eigenvectors.col(j)));
        sd.eigenvectors.col(j) /= nrm;
    }
    sd.method = EigenMethod::Dense;
    return sd;
}

// Shift-invert Lanczos on T = A^{-1} M, which is self-adjoint in the M inner
// product; its largest eigenvalues 1/lambda give the smallest lambda. The
// Krylov basis is fully reorthogonalized and grown until the wanted Ritz pairs
// meet the residual tolerance; at dimension n the projection is exact.
SpectralData lanczos_solve(const FormMatrices& fm, std::size_t k, const EigenOptions& opts)
{
    const auto n = static_cast<Eigen::Index>(fm.size());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(fm.A);
    if (ldlt.info() != Eigen::Success) {
        throw SpectralError("factorization of the stiffness matrix failed");
    }
    const Vector& mass = fm.mass;
    const auto m_dot = [&mass](const Vector& a, const Vector& b) { return a.dot(mass.cwiseProduct(b)); };

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto random_vector = [&] {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = normal(rng);
        }
        return v;
    };

    Matrix basis(n, std::min<Eigen::Index>(n, 64));
    std::vector<double> alpha;
    std::vector<double> beta;  // beta[j] couples basis j and j+1

    const auto orthogonalize = [&](Vector& w, Eigen::Index cols) {
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index i = 0; i < cols; ++i) {
                w -= m_dot(basis.col(i), w) * basis.col(i);
            }
        }
    };
    const auto start_vector = [&](Eigen::Index cols) -> bool {
        for (int attempt = 0; attempt < 8; ++attempt) {
            Vector v = random_vector();
            orthogonalize(v, cols);
            const double nrm = std::sqrt(m_dot(v, v));
            if (nrm > 1e-8) {
                basis.col(cols) = v / nrm;
                return true;
            }
        }
        return false;
    };

    if (!start_vector(0)) {
        throw SpectralError("could not draw a Lanczos start vector");
    }
    Eigen::Index dim = 1;
    SpectralData best;
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::Index next_check = std::max<Eigen::Index>(kk + 1, 8);

    while (true) {
        // Extend the Krylov basis by one vector.
        const Vector vj = basis.col(dim - 1);
        Vector w = ldlt.solve(mass.cwiseProduct(vj));
        const double a = m_dot(vj, w);
        alpha.push_back(a);
        orthogonalize(w, dim);
        const double b = std::sqrt(std::max(0.0, m_dot(w, w)));

        const bool last = dim == n;
        if (dim >= next_check || last) {
            const auto d = static_cast<Eigen::Index>(alpha.size());
            Matrix T = Matrix::Zero(d, d);
            for (Eigen::Index i = 0; i < d; ++i) {
                T(i, i) = alpha[static_cast<std::size_t>(i)];
                if (i + 1 < d) {
                    T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
                }
            }
            Eigen::SelfAdjointEigenSolver<Matrix> tri(T);
            // Largest theta first.
            const Eigen::Index want = std::min(kk, d);
            Vector values(want);
            Matrix vecs(n, want);
            for (Eigen::Index j = 0; j < want; ++j) {
                const Eigen::Index col = d - 1 - j;
                values[j] = 1.0 / tri.eigenvalues()[col];
                Vector y = basis.leftCols(d) * tri.eigenvectors().col(col);
                y /= std::sqrt(m_dot(y, y));
                vecs.col(j) = y;
            }
            const auto res = relative_residuals(fm, values, vecs);
            const bool converged =
                want == kk && std::all_of(res.begin(), res.end(), [&](double r) { return r <= opts.tol; });
            if (converged || last) {
                best.eigenvalues = values;
                best.eigenvectors = vecs;
                if (!converged) {
                    const double worst = *std::max_element(res.begin(), res.end());
                    throw SpectralError(fmt::format(
                        "Lanczos did not converge: worst relative residual {:.3e} > tol {:.3e} at dimension {}",
                        worst, opts.tol, dim));
                }
                break;
            }
            next_check = std::min<Eigen::Index>(n, dim + std::max<Eigen::Index>(4, dim / 4));
        }

        if (basis.cols() == dim) {
            basis.conservativeResize(n, std::min<Eigen::Index>(n, 2 * dim));
        }
        if (b > 1e-12 * std::max(1.0, std::abs(a))) {
            basis.col(dim) = w / b;
            beta.push_back(b);
        } else {
            // Invariant subspace found; restart in its orthogonal complement.
            if (!start_vector(dim)) {
                throw SpectralError("Lanczos restart failed");
            }
            beta.push_back(0.0);
        }
        ++dim;
    }

    // Ritz values come out descending in theta, i.e. ascending in lambda.
    best.method = EigenMethod::Lanczos;
    return best;
}

}  // namespace

SpectralData eigensolve(const FormMatrices& fm, std::size_t k, const EigenOptions& options)
{
    const std::size_t n = fm.size();
    if (k == 0 || k > n) {
        throw SpectralError(fmt::format("requested {} eigenpairs of a problem of size {}", k, n));
    }
    EigenMethod method = options.method;
    if (method == EigenMethod::Auto) {
        method = n <= options.dense_limit ? EigenMethod::Dense : EigenMethod::Lanczos;
    }
    SpectralData sd = method == EigenMethod::Dense ? dense_solve(fm, k) : lanczos_solve(fm, k, options);
    normalize_signs(sd.eigenvectors);
    sd.mass = fm.mass;
    sd.residuals = relative_residuals(fm, sd.eigenvalues, sd.eigenvectors);
    const double worst = *std::max_element(sd.residuals.begin(), sd.residuals.end());
    // Dense results are exact up to rounding; only flag gross failures there.
    const double limit = method == EigenMethod::Dense ? std::max(options.tol, 1e-8) : options.tol;
    if (worst > limit) {
        throw SpectralError(fmt::format("eigensolver residual {:.3e} exceeds tolerance {:.3e}", worst, limit));
    }
    return sd;
}

SpectralData spectral_window(const FormMatrices& fm, double lambda, const EigenOptions& options)
{
    const std::size_t n = fm.size();
    std::size_t k = std::min<std::size_t>(n, 32);
    while (true) {
        SpectralData sd = eigensolve(fm, k, options);
        if (sd.eigenvalues.maxCoeff() > lambda + default_split_tol(lambda) || k == n) {
            return sd;
        }
        k = std::min(n, 2 * k);
    }
}

double default_split_tol(double lambda)
{
    return 1e-9 * (1.0 + std::abs(lambda));
}

Splitting split(const SpectralData& spec, double lambda, double tol)
{
    Splitting spl;
    spl.lambda = lambda;
    spl.tol = tol < 0.0 ? default_split_tol(lambda) : tol;
    spl.delta = kInfinity;
    for (std::size_t n = 0; n < spec.count(); ++n) {
        const double ev = spec.value(n);
        if (std::abs(ev - lambda) <= spl.tol) {
            spl.zero.push_back(n);
        } else if (ev < lambda) {
            spl.minus.push_back(n);
        } else {
            spl.plus.push_back(n);
        }
        spl.delta = std::min(spl.delta, std::abs(ev - lambda));
    }
    if (spl.plus.empty()) {
        throw SpectralError(fmt::format(
            "insufficient spectral window: lambda = {} is not below any of the {} computed eigenvalues",
            lambda, spec.count()));
    }
    spl.truncated = !spec.complete();
    return spl;
}

namespace {

Vector span_projection(const SpectralData& spec, const std::vector<std::size_t>& idx, const Vector& u)
{
    Vector out = Vector::Zero(u.size());
    for (const auto n : idx) {
        out += spec.coefficient(n, u) * spec.eigenvectors.col(static_cast<Eigen::Index>(n));
    }
    return out;
}

}  // namespace

Vector project(const Splitting& spl, const SpectralData& spec, Part part, const Vector& u)
{
    switch (part) {
    case Part::Minus:
        return span_projection(spec, spl.minus, u);
    case Part::Zero:
        return span_projection(spec, spl.zero, u);
    case Part::Plus:
        if (spl.truncated) {
            return u - span_projection(spec, spl.minus, u) - span_projection(spec, spl.zero, u);
        }
        return span_projection(spec, spl.plus, u);
    }
    return u;
}

FormBoundReport verify_form_bounds(const Splitting& spl, const SpectralData& spec,
                                   const FormMatrices& fm, const Vector& u, double rel_tol)
{
    if (!spl.zero.empty()) {
        throw SpectralError(fmt::format("lambda = {} lies in the spectrum", spl.lambda));
    }
    FormBoundReport report;
    const double lambda = spl.lambda;
    const std::size_t k0 = spl.first_above();
    report.k = k0 + 1;

    const Vector up = project(spl, spec, Part::Plus, u);
    const double lk = spec.value(k0);
    const double e_plus = fm.q(up);
    report.lower.lhs = q_lambda(fm, lambda, up, up);
    report.lower.rhs = (lk - lambda) / lk * e_plus;
    report.lower.ok = report.lower.lhs >= report.lower.rhs - rel_tol * e_plus;

    if (k0 > 0) {
        report.has_upper = true;
        const Vector um = project(spl, spec, Part::Minus, u);
        const double lkm1 = spec.value(k0 - 1);
        const double e_minus = fm.q(um);
        report.upper.lhs = q_lambda(fm, lambda, um, um);
        report.upper.rhs = (lkm1 - lambda) / lkm1 * e_minus;
        report.upper.ok = report.upper.lhs <= report.upper.rhs + rel_tol * e_minus;
    }
    return report;
}

double weighted_lp(const Vector& mass, const Vector& u, double p)
{
    if (std::isinf(p)) {
        return u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
    }
    const double scale = u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        return 0.0;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        total += mass[i] * std::pow(std::abs(u[i]) / scale, p);
    }
    return scale * std::pow(total, 1.0 / p);
}

ProjectorBound projector_lp_bound(const Splitting& spl, const SpectralData& spec, double p,
                                  std::size_t samples, std::uint64_t seed)
{
    if (!(p >= 1.0)) {
        throw std::invalid_argument("projector bound requires p >= 1");
    }
    ProjectorBound bound;
    if (spl.minus.empty()) {
        return bound;
    }
    const double conj = std::isinf(p) ? 1.0 : (p == 1.0 ? kInfinity : p / (p - 1.0));
    for (const auto j : spl.minus) {
        const Vector e = spec.vector(j);
        bound.upper += weighted_lp(spec.mass, e, p) * weighted_lp(spec.mass, e, conj);
    }

    const auto n = static_cast<Eigen::Index>(spec.dimension());
    const auto ratio = [&](const Vector& u) {
        const double denom = weighted_lp(spec.mass, u, p);
        return denom > 0.0 ? weighted_lp(spec.mass, project(spl, spec, Part::Minus, u), p) / denom : 0.0;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        bound.lower = std::max(bound.lower, ratio(Vector::Unit(n, i)));
    }
    for (const auto j : spl.minus) {
        bound.lower = std::max(bound.lower, ratio(spec.vector(j)));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t s = 0; s < samples; ++s) {
        Vector u(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            u[i] = normal(rng);
        }
        bound.lower = std::max(bound.lower, ratio(u));
    }
    return bound;
}

}  // namespace nehari
