#include "nehari/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace nehari {

Nonlinearity Nonlinearity::custom(Eval f, Eval F, Eval df, std::optional<NonlinearityParams> params,
                                  bool odd)
{
    if (!f || !F) {
        throw std::invalid_argument("custom nonlinearity requires both f and its primitive F");
    }
    Nonlinearity nl;
    nl.kind_ = Kind::Custom;
    nl.f_ = std::move(f);
    nl.F_ = std::move(F);
    nl.df_ = std::move(df);
    nl.params_ = params;
    nl.odd_ = odd;
    return nl;
}

double Nonlinearity::df(std::size_t x, double s) const
{
    if (df_) {
        return df_(x, s);
    }
    const double h = 1e-6 * std::max(1.0, std::abs(s));
    return (f_(x, s + h) - f_(x, s - h)) / (2.0 * h);
}

Nonlinearity power_nonlinearity(double p, std::vector<double> g)
{
    if (!(p > 2.0)) {
        throw std::invalid_argument(fmt::format("power nonlinearity requires p > 2 (got {})", p));
    }
    if (g.empty()) {
        throw std::invalid_argument("power nonlinearity requires vertex weights g");
    }
    for (const double w : g) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument(fmt::format("power nonlinearity requires g > 0 (got {})", w));
        }
    }
    const auto [gmin, gmax] = std::minmax_element(g.begin(), g.end());

    Nonlinearity nl;
    nl.kind_ = Nonlinearity::Kind::Power;
    nl.odd_ = true;
    nl.params_ = NonlinearityParams{p, p, *gmin / p, *gmax};
    nl.g_ = std::move(g);
    const auto weights = nl.g_;
    // p = 4 is the common case; keep it exact and cheap.
    if (p == 4.0) {
        nl.f_ = [weights](std::size_t x, double s) { return weights[x] * s * s * s; };
        nl.F_ = [weights](std::size_t x, double s) { return 0.25 * weights[x] * s * s * s * s; };
        nl.df_ = [weights](std::size_t x, double s) { return 3.0 * weights[x] * s * s; };
    } else {
        nl.f_ = [weights, p](std::size_t x, double s) {
            return weights[x] * std::pow(std::abs(s), p - 2.0) * s;
        };
        nl.F_ = [weights, p](std::size_t x, double s) {
            return weights[x] * std::pow(std::abs(s), p) / p;
        };
        nl.df_ = [weights, p](std::size_t x, double s) {
            return (p - 1.0) * weights[x] * std::pow(std::abs(s), p - 2.0);
        };
    }
    return nl;
}

// ---------------------------------------------------------------------------

bool AssumptionReport::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* AssumptionReport::find(const std::string& name) const
{
    for (const auto& c : checks) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

std::vector<double> log_grid(double s_min, double s_max, int per_decade)
{
    std::vector<double> pos;
    const double decades = std::log10(s_max / s_min);
    const int count = static_cast<int>(std::ceil(decades * per_decade));
    for (int i = 0; i <= count; ++i) {
        pos.push_back(s_min * std::pow(10.0, decades * i / count));
    }
    std::vector<double> grid;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
        grid.push_back(-*it);
    }
    grid.insert(grid.end(), pos.begin(), pos.end());
    return grid;
}

namespace {

void fail_once(Check& check, std::size_t x, double s, const std::string& what)
{
    if (check.passed) {
        check.passed = false;
        check.detail = fmt::format("x = {}, s = {}: {}", x, s, what);
    }
}

}  // namespace

AssumptionReport validate_assumptions(const Nonlinearity& nl, std::span<const double> grid,
                                      std::span<const std::size_t> vertices)
{
    Check f1{"f1_zero_at_origin"};
    Check f2{"f2_sublinear_near_zero"};
    Check f3{"f3_strictly_increasing_ratio"};
    Check f4{"f4_superquadratic_primitive"};
    Check fpos{"F_positive"};
    Check ar{"AR_condition"};
    Check lower{"power_lower_bound"};
    Check upper{"power_upper_bound"};

    std::vector<double> pos;
    std::vector<double> neg;
    for (const double s : grid) {
        if (s > 0.0) {
            pos.push_back(s);
        } else if (s < 0.0) {
            neg.push_back(s);
        }
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    const auto& params = nl.params();
    constexpr double rel = 1e-12;

    for (const auto x : vertices) {
        if (nl.f(x, 0.0) != 0.0 || nl.F(x, 0.0) != 0.0) {
            fail_once(f1, x, 0.0, fmt::format("f = {}, F = {}", nl.f(x, 0.0), nl.F(x, 0.0)));
        }
        for (const double s : grid) {
            if (s == 0.0) {
                continue;
            }
            const double f = nl.f(x, s);
            const double F = nl.F(x, s);
            if (!std::isfinite(f) || !std::isfinite(F)) {
                fail_once(f1, x, s, "non-finite value");
                continue;
            }
            if (!(F > 0.0)) {
                fail_once(fpos, x, s, fmt::format("F = {}", F));
            }
            if (params) {
                const double fs = f * s;
                if (!(params->q * F > 0.0) || params->q * F > fs * (1.0 + rel)) {
                    fail_once(ar, x, s, fmt::format("q F = {} vs f s = {}", params->q * F, fs));
                }
                const double sp = std::pow(std::abs(s), params->p);
                if (F < params->a0 * sp * (1.0 - rel)) {
                    fail_once(lower, x, s, fmt::format("F = {} < a0 |s|^p = {}", F, params->a0 * sp));
                }
                const double bound = params->a1 * std::pow(std::abs(s), params->p - 1.0);
                if (std::abs(f) > bound * (1.0 + rel)) {
                    fail_once(upper, x, s, fmt::format("|f| = {} > a1 |s|^(p-1) = {}", std::abs(f), bound));
                }
            }
        }

        // (f3): f/|s| strictly increasing along each half-line.
        for (const auto* half : {&neg, &pos}) {
            for (std::size_t i = 1; i < half->size(); ++i) {
                const double s0 = (*half)[i - 1];
                const double s1 = (*half)[i];
                const double r0 = nl.f(x, s0) / std::abs(s0);
                const double r1 = nl.f(x, s1) / std::abs(s1);
                if (!(r1 > r0)) {
                    fail_once(f3, x, s1, fmt::format("f/|s| = {} does not exceed {} at s = {}", r1, r0, s0));
                }
            }
        }

        // (f2): the modulus |f/s| decreases toward 0 over the innermost decade.
        for (const auto* half : {&neg, &pos}) {
            if (half->empty()) {
                continue;
            }
            const double inner = half == &pos ? half->front() : half->back();
            const double outer = inner * 10.0;
            const double r_inner = std::abs(nl.f(x, inner) / inner);
            const double r_outer = std::abs(nl.f(x, outer) / outer);
            if (!(r_inner < r_outer)) {
                fail_once(f2, x, inner,
                          fmt::format("|f/s| = {} does not decrease from {} at s = {}", r_inner, r_outer, outer));
            }
        }

        // (f4): F/s^2 increasing over the outermost decade.
        for (const auto* half : {&neg, &pos}) {
            if (half->empty()) {
                continue;
            }
            const double s_max = std::max(std::abs(half->front()), std::abs(half->back()));
            std::vector<double> outer;
            for (const double s : *half) {
                if (std::abs(s) >= s_max / 10.0) {
                    outer.push_back(std::abs(s));
                }
            }
            std::sort(outer.begin(), outer.end());
            const double sign = half == &pos ? 1.0 : -1.0;
            for (std::size_t i = 1; i < outer.size(); ++i) {
                const double s0 = sign * outer[i - 1];
                const double s1 = sign * outer[i];
                const double r0 = nl.F(x, s0) / (s0 * s0);
                const double r1 = nl.F(x, s1) / (s1 * s1);
                if (!(r1 > r0)) {
                    fail_once(f4, x, s1, fmt::format("F/s^2 = {} does not exceed {}", r1, r0));
                }
            }
        }
    }

    AssumptionReport report{{f1, f2, f3, f4, fpos}};
    if (params) {
        report.checks.push_back(ar);
        report.checks.push_back(lower);
        report.checks.push_back(upper);
    }
    return report;
}

// ---------------------------------------------------------------------------

double Psi(const WeightedGraph& g, const Nonlinearity& nl, const Vector& u)
{
    double total = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x) {
        total += g.measure(x) * nl.F(x, u[static_cast<Eigen::Index>(x)]);
    }
    return total;
}

Vector grad_Psi(const WeightedGraph& g, const Nonlinearity& nl, const Vector& u)
{
    Vector r(u.size());
    for (std::size_t x = 0; x < g.size(); ++x) {
        const auto i = static_cast<Eigen::Index>(x);
        r[i] = nl.f(x, u[i]);
    }
    return r;
}

Vector dgrad_Psi(const WeightedGraph& g, const Nonlinearity& nl, const Vector& u)
{
    Vector r(u.size());
    for (std::size_t x = 0; x < g.size(); ++x) {
        const auto i = static_cast<Eigen::Index>(x);
        r[i] = nl.df(x, u[i]);
    }
    return r;
}

}  // namespace nehari
