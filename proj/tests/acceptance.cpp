#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "nehari/cli.hpp"
#include "nehari/experiments.hpp"
#include "nehari/io.hpp"
#include "support.hpp"

using namespace nehari;
using nehari::testing::random_connected_graph;
using nehari::testing::random_vector;
using nehari::testing::ScratchDir;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Accumulates failures; the first few are kept as the detail line.
class Tally {
public:
    void check(bool ok, const std::string& what)
    {
        ++checked_;
        if (!ok) {
            ++failed_;
            if (failed_ <= 3) {
                notes_ += (notes_.empty() ? "" : "; ") + what;
            }
        }
    }
    Outcome outcome(const std::string& summary) const
    {
        if (failed_ == 0) {
            return {true, fmt::format("{} ({} checks)", summary, checked_)};
        }
        return {false, fmt::format("{} failed of {}: {}", failed_, checked_, notes_)};
    }

private:
    std::size_t checked_ = 0;
    std::size_t failed_ = 0;
    std::string notes_;
};

Nonlinearity quartic(std::size_t n)
{
    return power_nonlinearity(4.0, std::vector<double>(n, 1.0));
}

double relative_error(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// ---------------------------------------------------------------------------

Outcome spectrum_oracle()
{
    Tally t;
    const FormMatrices fm = assemble(path_graph(3));
    const double expected[] = {1.0, 2.0, 4.0};
    for (EigenMethod m : {EigenMethod::Dense, EigenMethod::Lanczos}) {
        EigenOptions opts;
        opts.method = m;
        const SpectralData sd = eigensolve(fm, 3, opts);
        for (std::size_t i = 0; i < 3; ++i) {
            t.check(std::abs(sd.value(i) - expected[i]) <= 1e-10,
                    fmt::format("{} lambda_{} = {:.17g}", m == EigenMethod::Dense ? "dense" : "lanczos", i + 1,
                                sd.value(i)));
        }
    }
    return t.outcome("P3 eigenvalues {1,2,4} to 1e-10, dense and Lanczos");
}

Outcome closed_form_ground_state()
{
    Tally t;
    const WeightedGraph g = path_graph(1);
    const FormMatrices fm = assemble(g);
    const Nonlinearity nl = quartic(1);
    const Problem pb{g, fm, nl};
    for (double lambda : {0.0, 0.5, 0.9, 0.99}) {
        SolverConfig cfg;
        cfg.lambda = lambda;
        const GroundStateResult r = ground_state(pb, cfg, spectral_window(fm, lambda));
        t.check(r.nontrivial(), fmt::format("lambda {} status {}", lambda, r.status));
        const double u = std::abs(r.u[0]);
        t.check(std::abs(u - std::sqrt(1.0 - lambda)) <= 1e-8, fmt::format("lambda {} u = {:.17g}", lambda, u));
        if (lambda == 0.0) {
            t.check(std::abs(u - 1.0) <= 1e-9, fmt::format("u = {:.17g}", u));
            t.check(std::abs(r.energy - 0.25) <= 1e-9, fmt::format("J = {:.17g}", r.energy));
        }
    }
    return t.outcome("single vertex u = sqrt(1 - lambda), J(1) = 0.25");
}

Outcome bifurcation_scaling()
{
    Tally t;
    const SweepResult single = bifurcation_sweep(path_graph(1), quartic(1), 1, 1, Side::Below);
    t.check(std::abs(single.fit.slope - 0.5) <= 1e-4, fmt::format("single slope {:.10f}", single.fit.slope));

    const SweepResult p20 = bifurcation_sweep(path_graph(20), quartic(20), 1, 1, Side::Below);
    t.check(p20.fit.slope >= 0.5 - 0.1, fmt::format("P20 slope {:.6f}", p20.fit.slope));
    t.check(p20.rows.front().delta / p20.rows.back().delta >= 100.0, "P20 grid spans fewer than 2 decades");
    t.check(p20.rows.size() == 10, fmt::format("P20 {} rows", p20.rows.size()));
    for (const auto& row : p20.rows) {
        const double worst = std::max({row.residual, row.nehari_ray, row.nehari_f});
        t.check(row.status == "converged" && worst <= 1e-8,
                fmt::format("row delta {:.3g} residual {:.3g}", row.delta, worst));
        t.check(row.bound_lp_ok, fmt::format("row delta {:.3g} violates the lp bound", row.delta));
    }
    return t.outcome(fmt::format("slopes {:.8f} (single) and {:.6f} (P20)", single.fit.slope, p20.fit.slope));
}

Outcome nonexistence()
{
    Tally t;
    const std::vector<WeightedGraph> graphs{path_graph(3), random_connected_graph(15, 2024, 10)};
    for (const auto& g : graphs) {
        const FormMatrices fm = assemble(g);
        const Nonlinearity nl = quartic(g.size());
        const Problem pb{g, fm, nl};
        const SpectralData sd = eigensolve(fm, g.size());
        for (double lambda : {0.5, sd.value(0)}) {
            SolverConfig cfg;
            cfg.kappa = -1;
            cfg.lambda = lambda;
            const NoSolutionReport rep = verify_no_solution(pb, cfg, sd, 1000);
            t.check(rep.runs.size() == 8, fmt::format("{} runs", rep.runs.size()));
            for (const auto& run : rep.runs) {
                t.check(run.final_norm_E < 1e-6,
                        fmt::format("n={} lambda={:.6g} run {} ends at ||u||_E {:.3g}", g.size(), lambda, run.index,
                                    run.final_norm_E));
            }
            t.check(rep.samples == 1000 && rep.positive_samples == 1000,
                    fmt::format("{} of {} samples positive", rep.positive_samples, rep.samples));
        }
    }
    return t.outcome("P3 and random 15-vertex graph, lambda in {0.5, lambda_1}");
}

Outcome form_bounds()
{
    Tally t;
    std::mt19937_64 rng(61);
    const std::vector<WeightedGraph> graphs{path_graph(3), random_connected_graph(15, 61, 6),
                                            example_line_graph(6, 10)};
    for (const auto& g : graphs) {
        const FormMatrices fm = assemble(g);
        const SpectralData sd = eigensolve(fm, g.size());
        const std::vector<double> lambdas{0.5 * sd.value(0), 0.5 * (sd.value(0) + sd.value(1)),
                                          0.5 * (sd.value(1) + sd.value(2))};
        for (double lambda : lambdas) {
            const Splitting spl = split(sd, lambda);
            for (int i = 0; i < 200; ++i) {
                const FormBoundReport rep = verify_form_bounds(spl, sd, fm, random_vector(g.size(), rng), 1e-10);
                t.check(rep.ok(), fmt::format("n={} lambda={:.6g}", g.size(), lambda));
            }
            // Single-mode saturation on both sides of lambda.
            const std::size_t k = spl.first_above();
            const FormBoundReport plus = verify_form_bounds(spl, sd, fm, sd.vector(k), 1e-10);
            t.check(std::abs(plus.lower.lhs - plus.lower.rhs) <= 1e-10 * std::max(1.0, std::abs(plus.lower.rhs)),
                    fmt::format("lower saturation gap {:.3g}", plus.lower.lhs - plus.lower.rhs));
            if (k > 0) {
                const FormBoundReport minus = verify_form_bounds(spl, sd, fm, sd.vector(k - 1), 1e-10);
                t.check(std::abs(minus.upper.lhs - minus.upper.rhs) <=
                            1e-10 * std::max(1.0, std::abs(minus.upper.rhs)),
                        fmt::format("upper saturation gap {:.3g}", minus.upper.lhs - minus.upper.rhs));
            }
        }
    }
    return t.outcome("3 graphs x 3 lambdas x 200 vectors plus single-mode saturation");
}

Outcome embeddings()
{
    Tally t;
    std::mt19937_64 rng(6);
    auto run = [&](const WeightedGraph& g, const std::vector<std::size_t>& k, const std::string& name) {
        const double c = ell1_embedding_constant(g, k);
        const auto all = all_vertices(g);
        for (int i = 0; i < 100; ++i) {
            const Vector u = random_vector(g.size(), rng);
            const double l1 = norm_lp(g, u, 1.0);
            t.check(l1 <= c * norm_E(g, u) * (1.0 + 1e-12), fmt::format("{} l1 bound", name));
            t.check(poincare_check(g, all, u).ok, fmt::format("{} oscillation bound", name));
        }
    };
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const WeightedGraph g = random_connected_graph(10 + 5 * seed, 500 + seed, 3 * seed);
        std::vector<std::size_t> k;
        for (std::size_t x = 0; x < g.size(); x += 2) {
            k.push_back(x);
        }
        run(g, k, fmt::format("random graph {}", seed));
    }
    for (int n : {10, 50, 100, 200}) {
        const int n_minus = n / 2;
        const WeightedGraph g = example_line_graph(n_minus, n - n_minus - 1);
        run(g, line_graph_negative_half(g, n_minus), fmt::format("line graph n={}", g.size()));
    }
    return t.outcome("10 random graphs and line truncations up to 200 vertices");
}

Outcome gradient_checks()
{
    Tally t;
    const double eps = 1e-5;
    std::mt19937_64 rng(7);
    const std::vector<WeightedGraph> graphs{path_graph(3), random_connected_graph(20, 77, 12),
                                            example_line_graph(5, 10)};
    double worst = 0.0;
    for (const auto& g : graphs) {
        const FormMatrices fm = assemble(g);
        const Nonlinearity nl = power_nonlinearity(3.5, std::vector<double>(g.size(), 1.0));
        const Problem pb{g, fm, nl};
        SolverConfig cfg;
        cfg.lambda = 1.3;
        for (int i = 0; i < 50; ++i) {
            const Vector u = random_vector(g.size(), rng);
            const Vector h = random_vector(g.size(), rng);
            const Vector up = u + eps * h;
            const Vector um = u - eps * h;
            const double fd_j = (J(pb, cfg, up) - J(pb, cfg, um)) / (2.0 * eps);
            const double fd_psi = (Psi(g, nl, up) - Psi(g, nl, um)) / (2.0 * eps);
            const double ej = relative_error(fd_j, grad_J_pairing(pb, cfg, u, h));
            const double ep = relative_error(fd_psi, inner_m(g, grad_Psi(g, nl, u), h));
            worst = std::max({worst, ej, ep});
            t.check(ej <= 1e-6, fmt::format("grad_J n={} rel {:.3g}", g.size(), ej));
            t.check(ep <= 1e-6, fmt::format("grad_Psi n={} rel {:.3g}", g.size(), ep));
        }
    }
    return t.outcome(fmt::format("worst relative error {:.2e}", worst));
}

Outcome line_graph_diagnostics()
{
    Tally t;
    std::vector<int> ts;
    for (int n = 1; n <= 10; ++n) {
        ts.push_back(n);
    }
    const auto rows = check_potential_growth(line_graph_family(10), ts);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double expected = ts[i] + 1.0;
        t.check(std::abs(rows[i].inf_potential_outside - expected) <= 1e-12 * expected,
                fmt::format("n={} inf V = {:.17g}", ts[i], rows[i].inf_potential_outside));
    }
    for (int n = 1; n <= 100; ++n) {
        const WeightedGraph g = example_line_graph(n, 1);
        double partial = 0.0;
        for (int z = 1; z <= n - 1; ++z) {
            partial += 1.0 / (static_cast<double>(z) * z);
        }
        const double d = diameter(g, line_graph_negative_half(g, n));
        t.check(std::abs(d - partial) <= 1e-12, fmt::format("n={} diam {:.17g} vs {:.17g}", n, d, partial));
    }
    return t.outcome("inf V outside K_n = n + 1 for n = 1..10; negative-half diameters for n = 1..100");
}

Outcome determinism()
{
    Tally t;
    ScratchDir dir("acceptance");
    write_atomic(dir / "p20.json", dump(graph_to_json(path_graph(20))));
    write_atomic(dir / "solve.json", R"({"graph": "p20.json", "nonlinearity": {"type": "power", "p": 4},
                                         "kappa": 1, "lambda": 2.5, "solver": {"seed": 3}})");
    write_atomic(dir / "sweep.json", R"({"graph": "p20.json", "nonlinearity": {"type": "power", "p": 4},
                                         "kappa": 1, "target_k": 1, "side": "below"})");
    auto run = [&](const std::string& cmd, const std::string& cfg, const std::string& out) {
        const std::string c = (dir / cfg).string();
        const std::string o = (dir / out).string();
        const char* argv[] = {"nehari", cmd.c_str(), c.c_str(), "--seed", "11", "--out-dir", o.c_str()};
        std::ostringstream sink;
        return run_cli(7, argv, sink, sink);
    };
    t.check(run("solve", "solve.json", "solve_a") == kExitOk, "first solve");
    t.check(run("solve", "solve.json", "solve_b") == kExitOk, "second solve");
    t.check(run("sweep", "sweep.json", "sweep_a") == kExitOk, "first sweep");
    t.check(run("sweep", "sweep.json", "sweep_b") == kExitOk, "second sweep");
    t.check(read_file(dir / "solve_a/result.json") == read_file(dir / "solve_b/result.json"), "result.json differs");
    for (const char* name : {"sweep.json", "sweep.csv", "sweep_plot.dat"}) {
        t.check(read_file(dir / "sweep_a" / name) == read_file(dir / "sweep_b" / name),
                fmt::format("{} differs", name));
    }
    return t.outcome("repeated solve and sweep outputs are byte-identical");
}

}  // namespace

int main()
{
    struct Criterion {
        const char* id;
        const char* title;
        double budget;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"AC1", "spectrum oracle", 1.0, spectrum_oracle},
        {"AC2", "closed-form ground state", 1.0, closed_form_ground_state},
        {"AC3", "bifurcation scaling", 60.0, bifurcation_scaling},
        {"AC4", "nonexistence below the spectrum", 30.0, nonexistence},
        {"AC5", "form bounds", 0.0, form_bounds},
        {"AC6", "embedding suite", 0.0, embeddings},
        {"AC7", "gradient checks", 0.0, gradient_checks},
        {"AC8", "line-graph diagnostics", 0.0, line_graph_diagnostics},
        {"AC9", "determinism", 0.0, determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget > 0.0 && secs >= c.budget) {
            o.pass = false;
            o.detail += fmt::format("; runtime {:.3f} s exceeds {:.0f} s", secs, c.budget);
        }
        failures += o.pass ? 0 : 1;
        fmt::print("{} {} {:<32} {:8.3f} s  {}\n", c.id, o.pass ? "PASS" : "FAIL", c.title, secs, o.detail);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
