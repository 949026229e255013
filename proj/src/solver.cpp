#include "nehari/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "nehari/parallel.hpp"

namespace nehari {

void SolverConfig::validate() const
{
    if (kappa != 1 && kappa != -1) {
        throw ConfigError(fmt::format("kappa must be +1 or -1 (got {})", kappa));
    }
    if (!std::isfinite(lambda)) {
        throw ConfigError("lambda must be finite");
    }
    if (!(tol_grad > 0.0) || !(tol_inner > 0.0)) {
        throw ConfigError("tolerances must be positive");
    }
    if (max_outer_iters < 1 || max_inner_iters < 1) {
        throw ConfigError("iteration caps must be positive");
    }
    if (n_starts < 1) {
        throw ConfigError("n_starts must be at least 1");
    }
    if (threads < 1) {
        throw ConfigError("threads must be at least 1");
    }
}

double J(const Problem& pb, const SolverConfig& cfg, const Vector& u)
{
    const double ql = neumann_form(pb.graph, u) - cfg.lambda * inner_m(pb.graph, u, u);
    return 0.5 * ql - cfg.kappa * Psi(pb.graph, pb.nl, u);
}

Vector grad_J(const Problem& pb, const SolverConfig& cfg, const Vector& u)
{
    const auto& g = pb.graph;
    Vector r(u.size());
    for (std::size_t x = 0; x < g.size(); ++x) {
        const auto ix = static_cast<Eigen::Index>(x);
        double flux = 0.0;
        for (const auto& e : g.neighbors(x)) {
            flux += e.weight * (u[ix] - u[static_cast<Eigen::Index>(e.to)]);
        }
        r[ix] = flux / g.measure(x) + (g.potential(x) - cfg.lambda) * u[ix] - cfg.kappa * pb.nl.f(x, u[ix]);
    }
    return r;
}

double grad_J_pairing(const Problem& pb, const SolverConfig& cfg, const Vector& u, const Vector& v)
{
    return inner_m(pb.graph, grad_J(pb, cfg, u), v);
}

NehariSplitting nehari_splitting(const SpectralData& spec, const SolverConfig& cfg)
{
    NehariSplitting ns;
    if (cfg.kappa == 1) {
        ns.splitting = split(spec, cfg.lambda);
        const auto& s = ns.splitting;
        ns.f_indices = s.minus;
        ns.f_indices.insert(ns.f_indices.end(), s.zero.begin(), s.zero.end());
        ns.complement_indices = s.plus;
        ns.complement_has_remainder = s.truncated;
        return ns;
    }
    if (!spec.complete()) {
        throw SpectralError(fmt::format(
            "kappa = -1 needs the full spectrum ({} of {} eigenpairs computed)", spec.count(), spec.dimension()));
    }
    // E^+ may be empty here, so the splitting is built without split().
    auto& s = ns.splitting;
    s.lambda = cfg.lambda;
    s.tol = default_split_tol(cfg.lambda);
    s.delta = kInfinity;
    for (std::size_t n = 0; n < spec.count(); ++n) {
        const double ev = spec.value(n);
        if (std::abs(ev - cfg.lambda) <= s.tol) {
            s.zero.push_back(n);
        } else if (ev < cfg.lambda) {
            s.minus.push_back(n);
        } else {
            s.plus.push_back(n);
        }
        s.delta = std::min(s.delta, std::abs(ev - cfg.lambda));
    }
    ns.f_indices = s.plus;
    ns.f_indices.insert(ns.f_indices.end(), s.zero.begin(), s.zero.end());
    std::sort(ns.f_indices.begin(), ns.f_indices.end());
    ns.complement_indices = s.minus;
    return ns;
}

namespace {

constexpr double kCollapseNorm = 1e-6;

struct StartOutcome {
    StartReport report;
    Vector u;
    bool converged = false;
};

struct NewtonRun {
    Vector y;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

class Engine {
public:
    Engine(const Problem& pb, const SolverConfig& cfg, const SpectralData& spec, const NehariSplitting& ns)
        : pb_(pb), cfg_(cfg), spec_(spec), ns_(ns), mass_(pb.forms.mass), n_(pb.forms.mass.size())
    {
        if (spec.dimension() != pb.forms.size()) {
            throw SpectralError("spectral data does not match the graph size");
        }
        B_.resize(n_, static_cast<Eigen::Index>(ns.f_indices.size()));
        for (std::size_t j = 0; j < ns.f_indices.size(); ++j) {
            B_.col(static_cast<Eigen::Index>(j)) = spec.eigenvectors.col(static_cast<Eigen::Index>(ns.f_indices[j]));
        }
    }

    Vector shifted(const Vector& u) const { return pb_.forms.A * u - cfg_.lambda * mass_.cwiseProduct(u); }

    double kJ(const Vector& u) const
    {
        return cfg_.kappa * 0.5 * u.dot(shifted(u)) - Psi(pb_.graph, pb_.nl, u);
    }

    Vector f(const Vector& u) const { return grad_Psi(pb_.graph, pb_.nl, u); }
    Vector df(const Vector& u) const { return dgrad_Psi(pb_.graph, pb_.nl, u); }

    Vector residual(const Vector& u) const
    {
        return shifted(u).cwiseQuotient(mass_) - cfg_.kappa * f(u);
    }

    double norm_m(const Vector& r) const { return std::sqrt(r.dot(mass_.cwiseProduct(r))); }
    double norm_E(const Vector& u) const { return std::sqrt(std::max(0.0, u.dot(pb_.forms.A * u))); }

    Vector complement(const Vector& x) const
    {
        if (ns_.complement_has_remainder) {
            if (B_.cols() == 0) {
                return x;
            }
            return x - B_ * (B_.transpose() * mass_.cwiseProduct(x));
        }
        Vector out = Vector::Zero(n_);
        for (const auto n : ns_.complement_indices) {
            out += spec_.coefficient(n, x) * spec_.eigenvectors.col(static_cast<Eigen::Index>(n));
        }
        return out;
    }

    double nehari_f(const Vector& r) const
    {
        double worst = 0.0;
        const Vector mr = mass_.cwiseProduct(r);
        for (Eigen::Index j = 0; j < B_.cols(); ++j) {
            worst = std::max(worst, std::abs(B_.col(j).dot(mr)));
        }
        return worst;
    }

    InnerResult inner(const Vector& w) const;
    StartOutcome run_start(const Vector& w0, int index, std::uint64_t seed) const;
    Vector random_start(std::uint64_t seed) const;

private:
    Vector precondition(const Vector& r) const;
    std::optional<Vector> newton_step(const Vector& u) const;
    int polish(Vector& u) const;

    const Problem& pb_;
    const SolverConfig& cfg_;
    const SpectralData& spec_;
    const NehariSplitting& ns_;
    const Vector& mass_;
    Eigen::Index n_;
    Matrix B_;
};

// Coordinates y = (t, c) for u = t w_hat + B c.
class InnerProblem {
public:
    InnerProblem(const Engine& eng, const Problem& pb, const SolverConfig& cfg, Matrix W)
        : eng_(eng), pb_(pb), cfg_(cfg), W_(std::move(W))
    {
        const Vector& mass = pb.forms.mass;
        Matrix AW = pb.forms.A * W_;
        AW -= cfg.lambda * (mass.asDiagonal() * W_);
        K_ = W_.transpose() * AW;
        K_ = 0.5 * (K_ + K_.transpose()).eval();
    }

    const Matrix& W() const { return W_; }
    const Matrix& K() const { return K_; }
    void reflect()
    {
        W_.col(0) *= -1.0;
        K_.row(0) *= -1.0;
        K_.col(0) *= -1.0;
    }

    double value(const Vector& y) const
    {
        const Vector u = W_ * y;
        return cfg_.kappa * 0.5 * y.dot(K_ * y) - Psi(pb_.graph, pb_.nl, u);
    }

    // Returns the gradient and a scale for the relative stopping test.
    Vector gradient(const Vector& y, double* scale = nullptr) const
    {
        const Vector u = W_ * y;
        const Vector lin = cfg_.kappa * (K_ * y);
        const Vector nonlin = W_.transpose() * pb_.forms.mass.cwiseProduct(eng_.f(u));
        if (scale != nullptr) {
            *scale = std::max(1.0, lin.norm() + nonlin.norm());
        }
        return lin - nonlin;
    }

    Matrix hessian(const Vector& y) const
    {
        const Vector u = W_ * y;
        const Vector dm = pb_.forms.mass.cwiseProduct(eng_.df(u));
        return cfg_.kappa * K_ - W_.transpose() * dm.asDiagonal() * W_;
    }

    NewtonRun newton(Vector y) const
    {
        NewtonRun run;
        for (run.iterations = 0; run.iterations < cfg_.max_inner_iters; ++run.iterations) {
            double scale = 1.0;
            const Vector g = gradient(y, &scale);
            run.grad_norm = g.norm();
            if (run.grad_norm <= cfg_.tol_inner * scale) {
                run.converged = true;
                break;
            }
            const Matrix H = hessian(y);
            Vector step;
            Eigen::LLT<Matrix> llt(-H);
            const bool definite = llt.info() == Eigen::Success;
            if (definite) {
                step = llt.solve(g);
            } else {
                Eigen::SelfAdjointEigenSolver<Matrix> es(H);
                const Vector& ev = es.eigenvalues();
                const double floor = std::max(1e-10 * ev.cwiseAbs().maxCoeff(), 1e-300);
                Vector coeff = es.eigenvectors().transpose() * g;
                for (Eigen::Index i = 0; i < coeff.size(); ++i) {
                    coeff[i] /= std::max(std::abs(ev[i]), floor);
                }
                step = es.eigenvectors() * coeff;
            }

            const double phi0 = value(y);
            const double slope = g.dot(step);
            const double noise = 1e-13 * std::max(1.0, std::abs(phi0));
            double alpha = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 40; ++ls) {
                const Vector trial = y + alpha * step;
                if (alpha * slope <= noise) {
                    // Below the rounding floor of the objective: use the gradient norm.
                    if (gradient(trial).norm() < run.grad_norm) {
                        y = trial;
                        accepted = true;
                    }
                    break;
                }
                if (value(trial) >= phi0 + 1e-4 * alpha * slope) {
                    y = trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) {
                break;
            }
        }
        if (!run.converged) {
            double scale = 1.0;
            run.grad_norm = gradient(y, &scale).norm();
            run.converged = run.grad_norm <= cfg_.tol_inner * scale;
        }
        run.y = std::move(y);
        return run;
    }

private:
    const Engine& eng_;
    const Problem& pb_;
    const SolverConfig& cfg_;
    Matrix W_;
    Matrix K_;
};

InnerResult Engine::inner(const Vector& w) const
{
    const Vector wp = complement(w);
    const double nw = norm_E(wp);
    const double nref = norm_E(w);
    if (!(nw > 1e-12 * nref) || !(nw > 0.0)) {
        throw SolverError("inner maximization: w lies in F");
    }
    const Eigen::Index d = B_.cols();
    Matrix W(n_, d + 1);
    W.col(0) = wp / nw;
    W.rightCols(d) = B_;
    InnerProblem prob(*this, pb_, cfg_, std::move(W));

    const double a = cfg_.kappa * prob.K()(0, 0);
    if (!(a > 0.0)) {
        throw SolverError("inner maximization: the quadratic part is not positive along w");
    }
    const Vector w_hat = prob.W().col(0);
    auto dphi = [&](double t) {
        const Vector u = t * w_hat;
        return a * t - w_hat.dot(mass_.cwiseProduct(f(u)));
    };
    double lo = 0.5;
    double hi = 1.0;
    if (dphi(hi) > 0.0) {
        while (dphi(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e150) {
                throw SolverError("inner maximization: kappa J is unbounded along w");
            }
        }
    } else {
        while (dphi(lo) <= 0.0) {
            hi = lo;
            lo *= 0.5;
            if (lo < 1e-150) {
                throw SolverError("inner maximization: no positive ray maximum");
            }
        }
    }
    for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (dphi(mid) > 0.0 ? lo : hi) = mid;
    }
    const double t0 = 0.5 * (lo + hi);

    Vector y0 = Vector::Zero(d + 1);
    y0[0] = t0;
    NewtonRun run = prob.newton(y0);
    if (!run.converged) {
        std::mt19937_64 rng(cfg_.seed + 0x9e3779b97f4a7c15ULL);
        std::uniform_real_distribution<double> ut(0.5, 1.5);
        std::normal_distribution<double> nc(0.0, 0.1 * t0);
        std::optional<NewtonRun> best;
        for (int k = 0; k < 5; ++k) {
            Vector y = Vector::Zero(d + 1);
            y[0] = t0 * ut(rng);
            for (Eigen::Index j = 1; j <= d; ++j) {
                y[j] = nc(rng);
            }
            NewtonRun trial = prob.newton(y);
            if (trial.converged && (!best || prob.value(trial.y) > prob.value(best->y))) {
                best = std::move(trial);
            }
        }
        if (!best) {
            throw SolverError(fmt::format("inner maximization did not converge (|g| = {})", run.grad_norm));
        }
        const int used = run.iterations;
        run = std::move(*best);
        run.iterations += used;
    }
    if (run.y[0] < 0.0) {
        prob.reflect();
        run.y[0] = -run.y[0];
    }

    InnerResult res;
    res.u = prob.W() * run.y;
    res.value = kJ(res.u);
    res.t = run.y[0];
    res.w_hat = prob.W().col(0);
    res.grad_norm = run.grad_norm;
    res.iterations = run.iterations;
    res.converged = run.converged;
    Eigen::SelfAdjointEigenSolver<Matrix> es(prob.hessian(run.y), Eigen::EigenvaluesOnly);
    res.second_order_ok = es.eigenvalues().maxCoeff() < 0.0;
    const Vector r = residual(res.u);
    res.nehari_ray = std::abs(r.dot(mass_.cwiseProduct(res.u)));
    res.nehari_f = nehari_f(r);
    return res;
}

// Coefficientwise 1/|lambda_n - lambda| on the complement; the part beyond a
// truncated window is scaled by the largest computed gap.
Vector Engine::precondition(const Vector& r) const
{
    Vector out = Vector::Zero(n_);
    Vector covered = Vector::Zero(n_);
    for (const auto n : ns_.complement_indices) {
        const double c = spec_.coefficient(n, r);
        const auto col = spec_.eigenvectors.col(static_cast<Eigen::Index>(n));
        out += c / std::abs(spec_.value(n) - cfg_.lambda) * col;
        covered += c * col;
    }
    if (ns_.complement_has_remainder) {
        const double top = spec_.eigenvalues.maxCoeff() - cfg_.lambda;
        out += (complement(r) - covered) / top;
    }
    return out;
}

// Solves (A - lambda M - kappa M diag f'(u)) delta = -M r(u).
std::optional<Vector> Engine::newton_step(const Vector& u) const
{
    const Vector rhs = -mass_.cwiseProduct(residual(u));
    const Vector dm = cfg_.kappa * mass_.cwiseProduct(df(u));
    Vector delta;
    if (n_ <= 512) {
        Matrix Jm = pb_.forms.dense_A();
        Jm.diagonal() -= cfg_.lambda * mass_ + dm;
        delta = Jm.partialPivLu().solve(rhs);
    } else {
        SparseMatrix Jm = pb_.forms.A;
        for (Eigen::Index i = 0; i < n_; ++i) {
            Jm.coeffRef(i, i) -= cfg_.lambda * mass_[i] + dm[i];
        }
        Eigen::SparseLU<SparseMatrix> lu;
        lu.compute(Jm);
        if (lu.info() != Eigen::Success) {
            return std::nullopt;
        }
        delta = lu.solve(rhs);
    }
    if (!delta.allFinite()) {
        return std::nullopt;
    }
    return delta;
}

// Newton on J'(u) = 0 with a residual line search.
int Engine::polish(Vector& u) const
{
    double res = norm_m(residual(u));
    int it = 0;
    for (; it < 50; ++it) {
        const auto delta = newton_step(u);
        if (!delta) {
            break;
        }
        double alpha = 1.0;
        bool accepted = false;
        double next = res;
        for (int ls = 0; ls < 30; ++ls) {
            const Vector trial = u + alpha * *delta;
            next = norm_m(residual(trial));
            if (next < res) {
                u = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            break;
        }
        res = next;
    }
    return it;
}

Vector Engine::random_start(std::uint64_t seed) const
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Vector x(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            x[i] = normal(rng);
        }
        Vector w = complement(x);
        const double nw = norm_E(w);
        if (nw > 1e-8 * norm_E(x)) {
            return w / nw;
        }
    }
    throw SolverError("could not draw a start outside F");
}

StartOutcome Engine::run_start(const Vector& w0, int index, std::uint64_t seed) const
{
    StartOutcome out;
    out.report.index = index;
    out.report.seed = seed;

    InnerResult cur = inner(w0);
    double phi = cur.value;
    int stalls = 0;
    int it = 0;
    Vector u = cur.u;
    // Descend until the relative residual reaches `handoff`, then polish; a
    // polish that climbs above the descent level is discarded and the handoff
    // tightened.
    for (double handoff = 1e-3;; handoff *= 1e-3) {
        bool stuck = false;
        for (; it < cfg_.max_outer_iters; ++it) {
            const Vector r = residual(cur.u);
            const double res = norm_m(r);
            const double ref = norm_m(shifted(cur.u).cwiseQuotient(mass_)) + norm_m(f(cur.u));
            if (res <= cfg_.tol_grad || res <= handoff * ref) {
                break;
            }
            auto tangent = [&](Vector D) {
                D -= cur.w_hat.dot(pb_.forms.A * D) * cur.w_hat;
                return D;
            };
            // Projected Newton direction first, preconditioned gradient second.
            std::vector<std::pair<Vector, int>> directions;
            if (const auto delta = newton_step(cur.u)) {
                directions.emplace_back(tangent(complement(*delta) / cur.t), 8);
            }
            directions.emplace_back(tangent(-cfg_.kappa * precondition(r) / cur.t), 40);

            bool moved = false;
            double gain = 0.0;
            for (const auto& [D, tries] : directions) {
                double alpha = 1.0;
                for (int ls = 0; ls < tries && !moved; ++ls) {
                    Vector trial = cur.w_hat + alpha * D;
                    trial /= norm_E(trial);
                    try {
                        InnerResult cand = inner(trial);
                        if (cand.value < phi) {
                            gain = phi - cand.value;
                            phi = cand.value;
                            cur = std::move(cand);
                            moved = true;
                        }
                    } catch (const SolverError&) {
                    }
                    alpha *= 0.5;
                }
                if (moved) {
                    break;
                }
            }
            stalls = gain <= 1e-15 * std::abs(phi) ? stalls + 1 : 0;
            if (!moved || stalls >= 3) {
                stuck = true;
                break;
            }
        }

        u = cur.u;
        const double res0 = norm_m(residual(u));
        Vector polished = u;
        out.report.polish_iterations += polish(polished);
        const double res1 = norm_m(residual(polished));
        const bool below = kJ(polished) <= phi + 1e-10 * std::abs(phi);
        if (res1 < res0 && below && norm_E(polished) >= kCollapseNorm) {
            u = polished;
        }
        const bool done = norm_m(residual(u)) <= cfg_.tol_grad;
        if (done || stuck || it >= cfg_.max_outer_iters || handoff < 1e-12) {
            break;
        }
    }
    out.report.outer_iterations = it;

    out.u = u;
    out.report.residual = norm_m(residual(u));
    out.report.level = kJ(u);
    out.report.norm_E = norm_E(u);
    if (out.report.norm_E < kCollapseNorm) {
        out.report.status = "collapsed";
    } else if (out.report.residual <= cfg_.tol_grad) {
        out.report.status = "converged";
        out.converged = true;
    } else {
        out.report.status = "not_converged";
    }
    return out;
}

void sign_normalize(Vector& u)
{
    const double scale = u.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (std::abs(u[i]) > 1e-12 * scale) {
            if (u[i] < 0.0) {
                u = -u;
            }
            return;
        }
    }
}

bool lexicographically_less(const Vector& a, const Vector& b)
{
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) {
            return a[i] < b[i];
        }
    }
    return false;
}

double dual_E_norm(const FormMatrices& fm, const Vector& r)
{
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(fm.A);
    if (ldlt.info() != Eigen::Success) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const Vector mr = fm.mass.cwiseProduct(r);
    return std::sqrt(std::max(0.0, mr.dot(ldlt.solve(mr))));
}

void fill_norms(GroundStateResult& res, const Problem& pb)
{
    const auto& u = res.u;
    res.norm_E = std::sqrt(std::max(0.0, pb.forms.q(u)));
    res.norm_l2 = std::sqrt(pb.forms.mass_inner(u, u));
    res.norm_lp = norm_lp(pb.graph, u, res.p);
    res.norm_inf = u.size() > 0 ? norm_inf(u) : 0.0;
}

}  // namespace

InnerResult inner_maximize(const Problem& pb, const SolverConfig& cfg, const SpectralData& spec,
                           const NehariSplitting& ns, const Vector& w)
{
    cfg.validate();
    const Engine eng(pb, cfg, spec, ns);
    return eng.inner(w);
}

GroundStateResult ground_state(const Problem& pb, const SolverConfig& cfg, const SpectralData& spec,
                               const std::optional<Vector>& warm_start)
{
    cfg.validate();
    const NehariSplitting ns = nehari_splitting(spec, cfg);

    GroundStateResult res;
    res.kappa = cfg.kappa;
    res.lambda = cfg.lambda;
    res.delta = ns.splitting.delta;
    res.p = pb.nl.params() ? pb.nl.params()->p : 2.0;
    const auto n = static_cast<Eigen::Index>(pb.forms.size());

    if (ns.complement_empty()) {
        res.status = "no_nontrivial";
        res.u = Vector::Zero(n);
        fill_norms(res, pb);
        return res;
    }

    const Engine eng(pb, cfg, spec, ns);
    const auto count = static_cast<std::size_t>(cfg.n_starts);
    std::vector<StartOutcome> outs(count);
    parallel_for(count, cfg.threads, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seed + i;
        auto& out = outs[i];
        try {
            const Vector w = (i == 0 && warm_start) ? *warm_start : eng.random_start(seed);
            out = eng.run_start(w, static_cast<int>(i), seed);
        } catch (const SolverError& e) {
            out.report.index = static_cast<int>(i);
            out.report.seed = seed;
            out.report.status = fmt::format("failed: {}", e.what());
        }
    });

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < count; ++i) {
        auto& o = outs[i];
        if (!o.converged) {
            continue;
        }
        if (pb.nl.is_odd()) {
            sign_normalize(o.u);
        }
        if (!best) {
            best = i;
            continue;
        }
        const double lb = outs[*best].report.level;
        const double li = o.report.level;
        const double tie = 1e-10 * std::max(1.0, std::abs(lb));
        if (li < lb - tie || (std::abs(li - lb) <= tie && lexicographically_less(o.u, outs[*best].u))) {
            best = i;
        }
    }
    for (const auto& o : outs) {
        res.starts.push_back(o.report);
    }

    if (!best) {
        const bool collapsed = std::all_of(outs.begin(), outs.end(),
                                           [](const StartOutcome& o) { return o.report.status == "collapsed"; });
        if (collapsed) {
            res.status = "no_nontrivial";
            res.u = Vector::Zero(n);
            fill_norms(res, pb);
            return res;
        }
        double best_res = kInfinity;
        for (const auto& o : outs) {
            if (o.u.size() > 0) {
                best_res = std::min(best_res, o.report.residual);
            }
        }
        throw SolverError(fmt::format("all {} starts failed to converge (best residual {})", count, best_res));
    }

    res.status = "converged";
    res.u = outs[*best].u;
    res.energy = J(pb, cfg, res.u);
    res.level = cfg.kappa * res.energy;
    const Vector r = grad_J(pb, cfg, res.u);
    res.residual_grad = std::sqrt(pb.forms.mass_inner(r, r));
    res.residual_grad_E = dual_E_norm(pb.forms, r);
    res.nehari_ray = std::abs(pb.forms.mass_inner(r, res.u));
    res.nehari_f = eng.nehari_f(r);
    fill_norms(res, pb);
    try {
        const InnerResult check = eng.inner(res.u);
        res.minimax_gap = std::abs(check.value - res.level);
        res.second_order_ok = check.second_order_ok;
    } catch (const SolverError&) {
        res.minimax_gap = kInfinity;
        res.second_order_ok = false;
    }
    if (!(res.level > 0.0)) {
        throw SolverError(fmt::format("nontrivial critical point with kappa J = {} <= 0", res.level));
    }
    return res;
}

NoSolutionReport verify_no_solution(const Problem& pb, const SolverConfig& cfg, const SpectralData& spec,
                                    std::size_t samples)
{
    cfg.validate();
    if (cfg.kappa != -1) {
        throw ConfigError("verify_no_solution requires kappa = -1");
    }
    if (spec.count() == 0) {
        throw SpectralError("no eigenvalues computed");
    }
    const double lambda1 = spec.value(0);
    if (cfg.lambda > lambda1 + default_split_tol(lambda1)) {
        throw ConfigError(fmt::format("verify_no_solution requires lambda <= lambda_1 = {} (got {})",
                                      lambda1, cfg.lambda));
    }
    const auto n = static_cast<Eigen::Index>(pb.forms.size());
    const Vector& mass = pb.forms.mass;
    Matrix L = pb.forms.dense_A();
    L.diagonal() -= cfg.lambda * mass;
    const Matrix Lm = mass.cwiseInverse().asDiagonal() * L;

    auto normE = [&](const Vector& u) { return std::sqrt(std::max(0.0, pb.forms.q(u))); };
    auto residual = [&](const Vector& u) {
        return Vector(Lm * u - cfg.kappa * grad_Psi(pb.graph, pb.nl, u));
    };
    auto norm_m = [&](const Vector& r) { return std::sqrt(r.dot(mass.cwiseProduct(r))); };

    NoSolutionReport report;
    for (int i = 0; i < cfg.n_starts; ++i) {
        std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(i));
        std::normal_distribution<double> normal(0.0, 2.0);
        Vector u(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            u[k] = normal(rng);
        }
        NoSolutionRun run;
        run.index = i;
        run.initial_norm_E = normE(u);
        Vector r = residual(u);
        double res = norm_m(r);
        double mu = -1.0;
        for (run.iterations = 0; run.iterations < 2000; ++run.iterations) {
            const double nE = normE(u);
            if (nE < kCollapseNorm) {
                run.collapsed = true;
                break;
            }
            if (res <= 1e-14 * nE) {
                throw SolverError(fmt::format(
                    "residual minimization reached a nontrivial zero (||u||_E = {}, residual = {})", nE, res));
            }
            Matrix Jr = Lm;
            Jr.diagonal() -= cfg.kappa * dgrad_Psi(pb.graph, pb.nl, u);
            // The Jacobian is square: try the undamped step before forming
            // the (squared-condition) normal equations.
            {
                const Vector delta = Jr.partialPivLu().solve(-r);
                if (delta.allFinite()) {
                    const Vector trial = u + delta;
                    const Vector rt = residual(trial);
                    const double rest = norm_m(rt);
                    if (rest < res) {
                        u = trial;
                        r = rt;
                        res = rest;
                        continue;
                    }
                }
            }
            const Matrix G = Jr.transpose() * mass.asDiagonal() * Jr;
            const Vector grad = Jr.transpose() * mass.cwiseProduct(r);
            const double gmax = G.diagonal().maxCoeff();
            if (mu < 0.0) {
                mu = 1e-3 * gmax;
            }
            bool accepted = false;
            while (mu <= 1e20 * gmax) {
                Matrix S = G;
                S.diagonal().array() += mu;
                const Vector delta = S.ldlt().solve(-grad);
                const Vector trial = u + delta;
                const Vector rt = residual(trial);
                const double rest = norm_m(rt);
                if (rest < res) {
                    u = trial;
                    r = rt;
                    res = rest;
                    mu = std::max(mu / 3.0, 1e-15 * gmax);
                    accepted = true;
                    break;
                }
                mu *= 4.0;
            }
            if (!accepted) {
                break;
            }
        }
        run.final_norm_E = normE(u);
        run.final_residual = res;
        run.collapsed = run.final_norm_E < kCollapseNorm;
        report.runs.push_back(run);
    }
    report.all_collapsed = std::all_of(report.runs.begin(), report.runs.end(),
                                       [](const NoSolutionRun& r) { return r.collapsed; });

    std::mt19937_64 rng(cfg.seed + 1000003ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> expo(-3.0, 1.0);
    report.samples = samples;
    report.min_scaled_pairing = kInfinity;
    for (std::size_t s = 0; s < samples; ++s) {
        Vector u(n);
        do {
            for (Eigen::Index k = 0; k < n; ++k) {
                u[k] = normal(rng);
            }
        } while (u.squaredNorm() == 0.0);
        u *= std::pow(10.0, expo(rng));
        const double pairing = residual(u).dot(mass.cwiseProduct(u));
        if (pairing > 0.0) {
            ++report.positive_samples;
        }
        report.min_scaled_pairing = std::min(report.min_scaled_pairing, pairing / pb.forms.q(u));
    }
    return report;
}

CriticalValueReport check_critical_value_bounds(const GroundStateResult& result, const Problem& pb,
                                                double rel_tol, bool enforce)
{
    CriticalValueReport rep;
    if (!result.nontrivial() || result.u.size() == 0 || result.u.cwiseAbs().maxCoeff() == 0.0) {
        rep.skipped = true;
        rep.note = "u = 0: the bounds are vacuous";
        return rep;
    }
    const auto& params = pb.nl.params();
    if (!params) {
        throw ConfigError("critical-value bounds need nonlinearity params (p, q, a0, a1)");
    }
    const double p = params->p;
    const double q = params->q;
    rep.lp_power = std::pow(norm_lp(pb.graph, result.u, p), p);
    rep.C1 = 1.0 / (q * (0.5 - 1.0 / q) * params->a0);
    rep.level = result.level;
    rep.bound_lp_ok = rep.lp_power <= rep.C1 * rep.level * (1.0 + rel_tol);
    rep.delta = result.delta;
    rep.norm_E_sq = pb.forms.q(result.u);
    rep.energy_ratio = rep.delta * rep.norm_E_sq / rep.level;
    if (enforce && !rep.bound_lp_ok) {
        throw SolverError(fmt::format("||u||_p^p = {} exceeds C1 kappa J = {} * {}", rep.lp_power, rep.C1,
                                      rep.level));
    }
    return rep;
}

}  // namespace nehari
