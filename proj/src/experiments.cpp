#include "nehari/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "nehari/parallel.hpp"

namespace nehari {

std::string to_string(Side side)
{
    return side == Side::Below ? "below" : "above";
}

Side parse_side(const std::string& text)
{
    if (text == "below") {
        return Side::Below;
    }
    if (text == "above") {
        return Side::Above;
    }
    throw ConfigError(fmt::format("side must be \"below\" or \"above\" (got \"{}\")", text));
}

ScalingFit fit_scaling(std::span<const double> deltas, std::span<const double> norms)
{
    if (deltas.size() != norms.size()) {
        throw std::invalid_argument("fit_scaling: deltas and norms differ in length");
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (deltas[i] > 0.0 && norms[i] > 0.0 && std::isfinite(deltas[i]) && std::isfinite(norms[i])) {
            xs.push_back(std::log(deltas[i]));
            ys.push_back(std::log(norms[i]));
        }
    }
    if (xs.size() < 2) {
        throw std::invalid_argument(fmt::format("fit_scaling needs at least 2 usable rows (got {})", xs.size()));
    }
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("fit_scaling: all deltas coincide");
    }
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.points = xs.size();
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += e * e;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

ScalingFit fit_scaling(std::span<const SweepRow> rows)
{
    std::vector<double> deltas;
    std::vector<double> norms;
    for (const auto& r : rows) {
        deltas.push_back(r.delta);
        norms.push_back(r.norm_E);
    }
    return fit_scaling(deltas, norms);
}

namespace {

std::vector<double> sweep_offsets(const SweepOptions& o, double gap)
{
    std::vector<double> out;
    if (o.deltas) {
        out = *o.deltas;
        if (out.empty()) {
            throw ConfigError("sweep grid: explicit delta list is empty");
        }
    } else {
        if (!(o.start > 0.0) || !std::isfinite(o.start)) {
            throw ConfigError(fmt::format("sweep grid: start must be positive (got {})", o.start));
        }
        if (!(o.ratio > 0.0 && o.ratio < 1.0)) {
            throw ConfigError(fmt::format("sweep grid: ratio must lie in (0, 1) (got {})", o.ratio));
        }
        if (o.count < 1) {
            throw ConfigError(fmt::format("sweep grid: count must be positive (got {})", o.count));
        }
        for (int i = 0; i < o.count; ++i) {
            out.push_back(o.start * std::pow(o.ratio, i) * gap);
        }
    }
    for (const double d : out) {
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw ConfigError(fmt::format("sweep grid: offsets must be positive and finite (got {})", d));
        }
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

SweepRow make_row(const GroundStateResult& r, const Problem& pb)
{
    SweepRow row;
    row.lambda = r.lambda;
    row.delta = r.delta;
    row.status = r.status;
    row.norm_E = r.norm_E;
    row.norm_lp = r.norm_lp;
    row.energy = r.energy;
    row.level = r.level;
    row.residual = r.residual_grad;
    row.nehari_ray = r.nehari_ray;
    row.nehari_f = r.nehari_f;
    if (r.nontrivial()) {
        row.bound_lp_ok = check_critical_value_bounds(r, pb, 1e-9, false).bound_lp_ok;
    }
    return row;
}

}  // namespace

SweepResult bifurcation_sweep(const WeightedGraph& g, const Nonlinearity& nl, int kappa, std::size_t target_k,
                              Side side, const SweepOptions& options)
{
    if (kappa != 1 && kappa != -1) {
        throw ConfigError(fmt::format("kappa must be +1 or -1 (got {})", kappa));
    }
    if ((kappa == 1 && side != Side::Below) || (kappa == -1 && side != Side::Above)) {
        throw ConfigError("sweeps approach lambda_k from below for kappa = +1 and from above for kappa = -1");
    }
    if (!nl.params()) {
        throw ConfigError("bifurcation sweeps need nonlinearity params (p, q, a0, a1)");
    }
    const FormMatrices fm = assemble(g);
    const std::size_t n = fm.size();
    if (target_k < 1 || target_k > n) {
        throw ConfigError(fmt::format("target index k = {} outside 1..{}", target_k, n));
    }
    const std::size_t want = kappa == -1 ? n : std::min(n, std::max<std::size_t>(target_k + 1, 32));
    const SpectralData spec = eigensolve(fm, want, options.eigen);

    SweepResult res;
    res.kappa = kappa;
    res.target_k = target_k;
    res.side = side;
    res.p = nl.params()->p;
    const std::size_t k0 = target_k - 1;
    res.target_value = spec.value(k0);
    if (side == Side::Below) {
        if (target_k > 1) {
            res.gap = res.target_value - spec.value(k0 - 1);
        } else {
            res.gap = n > 1 ? spec.value(1) - spec.value(0) : 1.0;
        }
    } else {
        res.gap = target_k < n ? spec.value(k0 + 1) - res.target_value : 1.0;
    }
    if (!(res.gap > default_split_tol(res.target_value))) {
        throw ConfigError(fmt::format("lambda_{} = {} is not separated from its neighbour (gap {})", target_k,
                                      res.target_value, res.gap));
    }
    const auto offsets = sweep_offsets(options, res.gap);
    const double sign = side == Side::Below ? -1.0 : 1.0;

    const Problem pb{g, fm, nl};
    auto config_for = [&](double offset, int threads) {
        SolverConfig cfg = options.solver;
        cfg.kappa = kappa;
        cfg.lambda = res.target_value + sign * offset;
        cfg.threads = threads;
        return cfg;
    };
    auto solve = [&](const SolverConfig& cfg, const std::optional<Vector>& warm) -> std::optional<GroundStateResult> {
        try {
            return ground_state(pb, cfg, spec, warm);
        } catch (const SolverError&) {
            return std::nullopt;
        }
    };
    auto failed_row = [&](double offset) {
        SweepRow row;
        row.lambda = res.target_value + sign * offset;
        row.delta = offset;
        row.status = "failed";
        return row;
    };

    res.rows.resize(offsets.size());
    if (options.warm_start) {
        std::optional<Vector> warm;
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            const auto r = solve(config_for(offsets[i], options.solver.threads), warm);
            if (r && r->nontrivial()) {
                warm = r->u;
            }
            res.rows[i] = r ? make_row(*r, pb) : failed_row(offsets[i]);
        }
        std::vector<std::size_t> picks(offsets.size());
        std::iota(picks.begin(), picks.end(), 0);
        std::mt19937_64 rng(options.solver.seed);
        std::shuffle(picks.begin(), picks.end(), rng);
        picks.resize(std::min<std::size_t>(picks.size(), static_cast<std::size_t>(std::max(0, options.cross_checks))));
        std::sort(picks.begin(), picks.end());
        for (const auto i : picks) {
            const auto cold = solve(config_for(offsets[i], options.solver.threads), std::nullopt);
            CrossCheck cc;
            cc.row = i;
            cc.continued_level = res.rows[i].level;
            cc.cold_level = cold && cold->nontrivial() ? cold->level : kInfinity;
            const double tol = 1e-8 * std::max(std::abs(cc.continued_level), std::abs(cc.cold_level));
            cc.agree = std::abs(cc.cold_level - cc.continued_level) <= tol;
            // A lower cold level means continuation tracked a higher branch.
            if (cold && cold->nontrivial() &&
                (res.rows[i].status != "converged" || cc.cold_level < cc.continued_level - tol)) {
                res.rows[i] = make_row(*cold, pb);
            }
            res.cross_checks.push_back(cc);
        }
    } else {
        parallel_for(offsets.size(), options.solver.threads, [&](std::size_t i) {
            const auto r = solve(config_for(offsets[i], 1), std::nullopt);
            res.rows[i] = r ? make_row(*r, pb) : failed_row(offsets[i]);
        });
    }

    std::vector<SweepRow> converged;
    for (const auto& row : res.rows) {
        if (row.status == "converged") {
            converged.push_back(row);
        }
    }
    if (converged.size() < 5) {
        throw SolverError(fmt::format("sweep produced {} converged rows; at least 5 are needed", converged.size()));
    }
    res.fit = fit_scaling(converged);
    res.scaling_ok = res.fit.slope >= res.expected_exponent() - 0.1;
    return res;
}

bool AuditReport::ok() const
{
    return std::all_of(counts.begin(), counts.end(), [](const AuditCount& c) { return c.ok(); });
}

const AuditCount* AuditReport::find(const std::string& name) const
{
    for (const auto& c : counts) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

AuditReport audit_inequalities(const WeightedGraph& g, const Nonlinearity& nl, std::span<const double> lambdas,
                               const AuditOptions& options)
{
    const FormMatrices fm = assemble(g);
    const auto n = static_cast<Eigen::Index>(fm.size());
    const auto everything = all_vertices(g);
    const auto subset = options.subset.empty() ? everything : options.subset;
    const double c_k = ell1_embedding_constant(g, subset);
    const auto& params = nl.params();
    const double p = params ? params->p : 4.0;
    constexpr double slack = 1e-12;

    AuditReport report;
    report.counts = {{"form_lower"}, {"form_upper"}, {"ell1_embedding"}, {"poincare"},
                     {"l2_below_E"}, {"interpolation"}};
    if (params) {
        report.counts.push_back({"AR_chain"});
        report.counts.push_back({"Psi_lower"});
    }
    auto record = [&](const std::string& name, bool ok, const std::string& where, double lhs, double rhs) {
        for (auto& c : report.counts) {
            if (c.name == name) {
                ++c.checked;
                if (ok) {
                    ++c.passed;
                } else if (c.witness.empty()) {
                    c.witness = fmt::format("{}: lhs = {:.17g}, rhs = {:.17g}", where, lhs, rhs);
                }
                return;
            }
        }
    };

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> expo(-2.0, 1.0);
    for (const double lambda : lambdas) {
        const SpectralData spec = spectral_window(fm, lambda, options.eigen);
        const Splitting spl = split(spec, lambda);
        if (!spl.zero.empty()) {
            throw ConfigError(fmt::format("audit lambda = {} lies on the spectrum", lambda));
        }
        for (std::size_t s = 0; s < options.n_random; ++s) {
            Vector u(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                u[i] = normal(rng);
            }
            u *= std::pow(10.0, expo(rng));
            const std::string where = fmt::format("lambda = {}, sample {}", lambda, s);

            const auto fb = verify_form_bounds(spl, spec, fm, u, options.rel_tol);
            record("form_lower", fb.lower.ok, where, fb.lower.lhs, fb.lower.rhs);
            if (fb.has_upper) {
                record("form_upper", fb.upper.ok, where, fb.upper.lhs, fb.upper.rhs);
            }

            const double nE = std::sqrt(std::max(0.0, fm.q(u)));
            const double l1 = norm_lp(g, u, 1.0);
            record("ell1_embedding", l1 <= c_k * nE * (1.0 + slack), where, l1, c_k * nE);

            const auto pc = poincare_check(g, everything, u);
            record("poincare", pc.ok, where, pc.lhs, pc.rhs);

            const double l2 = norm_lp(g, u, 2.0);
            record("l2_below_E", l2 <= nE * (1.0 + slack), where, l2, nE);

            const double lpp = std::pow(norm_lp(g, u, p), p);
            const double interp = std::pow(norm_inf(u), p - 1.0) * l1;
            record("interpolation", lpp <= interp * (1.0 + slack), where, lpp, interp);

            if (params) {
                const double psi = Psi(g, nl, u);
                const double fu = inner_m(g, grad_Psi(g, nl, u), u);
                record("AR_chain", params->q * psi <= fu * (1.0 + slack), where, params->q * psi, fu);
                record("Psi_lower", psi >= params->a0 * lpp * (1.0 - slack), where, psi, params->a0 * lpp);
            }
        }
    }
    if (!report.ok()) {
        std::string msg = "inequality audit failed";
        for (const auto& c : report.counts) {
            if (!c.ok()) {
                msg += fmt::format("; {} ({}/{} passed) at {}", c.name, c.passed, c.checked, c.witness);
            }
        }
        throw AuditError(msg, report);
    }
    return report;
}

}  // namespace nehari
