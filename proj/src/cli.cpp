#include "nehari/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "nehari/io.hpp"

namespace nehari {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    std::optional<double> tol;
};

int resolve_threads(const Globals& gl, int configured)
{
    if (gl.threads) {
        if (*gl.threads < 1) {
            throw ConfigError("--threads must be at least 1");
        }
        return *gl.threads;
    }
    if (const char* env = std::getenv("NEHARI_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 4096) {
            throw ConfigError(fmt::format("NEHARI_THREADS must be a positive integer (got '{}')", env));
        }
        return static_cast<int>(v);
    }
    return configured;
}

fs::path out_dir(const Globals& gl)
{
    return gl.out_dir ? fs::path(*gl.out_dir) : fs::path(".");
}

std::string command_line(int argc, const char* const* argv)
{
    std::string s;
    for (int i = 0; i < argc; ++i) {
        s += (i == 0 ? "" : " ");
        s += argv[i];
    }
    return s;
}

FileDigest digest(const fs::path& path)
{
    const fs::path abs = fs::absolute(path).lexically_normal();
    return {abs.string(), sha256_file(abs)};
}

class Session {
public:
    Session(std::string command, std::uint64_t seed) : started_(utc_timestamp())
    {
        manifest_.command = std::move(command);
        manifest_.seed = seed;
        manifest_.started = started_;
    }

    void input(const fs::path& path) { manifest_.inputs.push_back(digest(path)); }
    void config(const Json& effective) { manifest_.config_hash = sha256_hex(dump(effective)); }

    fs::path write(const fs::path& path, const std::string& contents)
    {
        write_atomic(path, contents);
        manifest_.outputs.push_back(digest(path));
        return path;
    }

    fs::path finish(const fs::path& dir, const std::string& name)
    {
        manifest_.finished = utc_timestamp();
        const fs::path path = dir / (name + ".manifest.json");
        write_atomic(path, dump(manifest_to_json(manifest_)));
        return path;
    }

private:
    std::string started_;
    RunManifest manifest_;
};

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path, std::ostream& out)
{
    const WeightedGraph g = load_graph(path);
    ValidationReport report = validate_graph(g);

    const std::vector<std::size_t> all = all_vertices(g);
    if (report.passed() && g.size() > 0) {
        Check diam{"finite_diameter", true, ""};
        const double d = diameter(g, all);
        diam.passed = std::isfinite(d);
        diam.detail = fmt::format("diam = {:.17g}", d);
        report.checks.push_back(diam);

        Check summ{"summability", true, ""};
        try {
            summ.detail = fmt::format("sum 1/b = {:.17g}", check_summability(g, all));
        } catch (const GraphError& e) {
            summ.passed = false;
            summ.detail = e.what();
        }
        report.checks.push_back(summ);
    }

    out << fmt::format("graph '{}': {} vertices, {} weight entries\n", path, g.size(), g.entry_count());
    for (const auto& c : report.checks) {
        out << fmt::format("  {:<16} {}{}\n", c.name, c.passed ? "ok" : "FAIL",
                           c.detail.empty() ? "" : "  " + c.detail);
    }
    out << (report.passed() ? "valid\n" : "invalid\n");
    return report.passed() ? kExitOk : kExitValidation;
}

int cmd_spectrum(const std::string& path, std::optional<std::size_t> k, const std::string& method,
                 const Globals& gl, const std::string& cmdline, std::ostream& out)
{
    const WeightedGraph g = load_graph(path);
    const std::size_t want = k.value_or(g.size());
    if (want == 0 || want > g.size()) {
        throw ConfigError(fmt::format("k must lie in [1, {}] (got {})", g.size(), want));
    }
    EigenOptions opts;
    if (method == "auto") {
        opts.method = EigenMethod::Auto;
    } else if (method == "dense") {
        opts.method = EigenMethod::Dense;
    } else if (method == "lanczos") {
        opts.method = EigenMethod::Lanczos;
    } else {
        throw ConfigError(fmt::format("--method must be auto, dense or lanczos (got '{}')", method));
    }
    if (gl.tol) {
        opts.tol = *gl.tol;
    }
    if (gl.seed) {
        opts.seed = *gl.seed;
    }
    Json effective = {{"graph", graph_to_json(g)}, {"k", want}};
    effective["spectrum"] = {{"method", method}, {"tol", opts.tol}, {"seed", opts.seed}};

    Session session(cmdline, opts.seed);
    session.input(path);
    session.config(effective);

    const FormMatrices fm = assemble(g);
    const SpectralData spec = eigensolve(fm, want, opts);

    const fs::path dir = out_dir(gl);
    session.write(dir / "spectrum.json", dump(spectrum_to_json(spec, g)));
    session.finish(dir, "spectrum");

    out << fmt::format("{} eigenvalues:", spec.count());
    for (std::size_t i = 0; i < spec.count(); ++i) {
        out << fmt::format(" {:.12g}", spec.value(i));
    }
    out << "\n";
    return kExitOk;
}

int cmd_solve(const std::string& path, const Globals& gl, const std::string& cmdline, std::ostream& out)
{
    const Json doc = parse_json(read_file(path), path);
    RunConfig cfg = run_config_from_json(doc, fs::path(path).parent_path());
    if (gl.seed) {
        cfg.solver.seed = *gl.seed;
        cfg.eigen.seed = *gl.seed;
    }
    if (gl.tol) {
        cfg.solver.tol_grad = *gl.tol;
    }
    cfg.solver.threads = resolve_threads(gl, cfg.solver.threads);
    cfg.solver.validate();

    Session session(cmdline, cfg.solver.seed);
    session.input(path);
    if (cfg.graph.path) {
        session.input(*cfg.graph.path);
    }
    session.config(effective_json(cfg));

    const WeightedGraph& g = cfg.graph.graph;
    const Nonlinearity nl = nonlinearity_from_json(cfg.nonlinearity, g.size());
    const FormMatrices fm = assemble(g);
    const SpectralData spec =
        cfg.solver.kappa == -1 ? eigensolve(fm, g.size(), cfg.eigen) : spectral_window(fm, cfg.solver.lambda, cfg.eigen);
    const Problem pb{g, fm, nl};

    const GroundStateResult result = ground_state(pb, cfg.solver, spec);
    std::optional<CriticalValueReport> bounds;
    if (result.nontrivial()) {
        bounds = check_critical_value_bounds(result, pb);
    }

    const fs::path dir = out_dir(gl);
    session.write(dir / "result.json", dump(result_to_json(result, g, bounds)));
    session.finish(dir, "solve");

    if (result.nontrivial()) {
        out << fmt::format("converged: energy {:.15g}, level {:.15g}, residual {:.3e}, ||u||_E {:.12g}\n",
                           result.energy, result.level, result.residual_grad, result.norm_E);
    } else {
        out << fmt::format("{}: every start collapsed to u = 0\n", result.status);
    }
    return kExitOk;
}

int cmd_sweep(const std::string& path, const Globals& gl, const std::string& cmdline, std::ostream& out)
{
    const Json doc = parse_json(read_file(path), path);
    SweepConfig cfg = sweep_config_from_json(doc, fs::path(path).parent_path());
    if (gl.seed) {
        cfg.options.solver.seed = *gl.seed;
        cfg.options.eigen.seed = *gl.seed;
    }
    if (gl.tol) {
        cfg.options.solver.tol_grad = *gl.tol;
    }
    cfg.options.solver.threads = resolve_threads(gl, cfg.options.solver.threads);
    cfg.options.solver.validate();

    Session session(cmdline, cfg.options.solver.seed);
    session.input(path);
    if (cfg.graph.path) {
        session.input(*cfg.graph.path);
    }
    session.config(effective_json(cfg));

    const WeightedGraph& g = cfg.graph.graph;
    const Nonlinearity nl = nonlinearity_from_json(cfg.nonlinearity, g.size());
    const SweepResult sweep = bifurcation_sweep(g, nl, cfg.kappa, cfg.target_k, cfg.side, cfg.options);

    const fs::path dir = out_dir(gl);
    session.write(dir / "sweep.json", dump(sweep_to_json(sweep)));
    session.write(dir / "sweep.csv", sweep_to_csv(sweep));
    session.write(dir / "sweep_plot.dat", sweep_plot_data(sweep));
    session.finish(dir, "sweep");

    out << fmt::format("{} rows, slope {:.10f} (expected >= {:.4f}), r^2 {:.12f}, scaling {}\n", sweep.rows.size(),
                       sweep.fit.slope, sweep.expected_exponent() - 0.1, sweep.fit.r_squared,
                       sweep.scaling_ok ? "ok" : "FAIL");
    return sweep.scaling_ok ? kExitOk : kExitValidation;
}

int cmd_audit(const std::string& path, std::vector<double> lambdas, double p, std::size_t n_random,
              const Globals& gl, const std::string& cmdline, std::ostream& out)
{
    const WeightedGraph g = load_graph(path);
    if (!(p > 2.0)) {
        throw ConfigError("--p must exceed 2");
    }
    const Nonlinearity nl = power_nonlinearity(p, std::vector<double>(g.size(), 1.0));
    AuditOptions opts;
    opts.n_random = n_random;
    if (gl.seed) {
        opts.seed = *gl.seed;
        opts.eigen.seed = *gl.seed;
    }
    if (gl.tol) {
        opts.rel_tol = *gl.tol;
    }
    if (lambdas.empty()) {
        const FormMatrices fm = assemble(g);
        const SpectralData spec = eigensolve(fm, std::min<std::size_t>(g.size(), 4), opts.eigen);
        lambdas.push_back(0.5 * spec.value(0));
        for (std::size_t i = 1; i < spec.count() && lambdas.size() < 3; ++i) {
            if (spec.value(i) - spec.value(i - 1) > default_split_tol(spec.value(i))) {
                lambdas.push_back(0.5 * (spec.value(i - 1) + spec.value(i)));
            }
        }
    }

    Session session(cmdline, opts.seed);
    session.input(path);
    session.config({{"graph", graph_to_json(g)},
                    {"lambdas", lambdas},
                    {"p", p},
                    {"n_random", n_random},
                    {"seed", opts.seed},
                    {"rel_tol", opts.rel_tol}});

    AuditReport report;
    int code = kExitOk;
    try {
        report = audit_inequalities(g, nl, lambdas, opts);
    } catch (const AuditError& e) {
        report = e.report();
        code = kExitValidation;
    }

    const fs::path dir = out_dir(gl);
    session.write(dir / "audit.json", dump(audit_to_json(report)));
    session.finish(dir, "audit");

    for (const auto& c : report.counts) {
        out << fmt::format("  {:<16} {}/{}{}\n", c.name, c.passed, c.checked,
                           c.witness.empty() ? "" : "  " + c.witness);
    }
    out << (report.ok() ? "all inequalities hold\n" : "audit FAILED\n");
    return code;
}

int cmd_example(const std::string& name, int size, int n_minus, int n_plus, bool literal, const Globals& gl,
                std::ostream& out)
{
    auto build = [&] {
        if (name == "line") {
            if (n_minus < 1 || n_plus < 1) {
                throw ConfigError("line example needs --n-minus >= 1 and --n-plus >= 1");
            }
            return example_line_graph(n_minus, n_plus, literal);
        }
        if (name == "path") {
            if (size < 1) {
                throw ConfigError("--size must be at least 1");
            }
            return path_graph(static_cast<std::size_t>(size));
        }
        if (name == "single") {
            return path_graph(1);
        }
        throw ConfigError(fmt::format("unknown example '{}' (line, path, single)", name));
    };
    const WeightedGraph g = build();
    const std::string text = dump(graph_to_json(g));
    if (gl.out_dir) {
        const fs::path file = fs::path(*gl.out_dir) / (name + ".json");
        write_atomic(file, text);
        out << file.string() << "\n";
    } else {
        out << text;
    }
    return kExitOk;
}

int cmd_verify(const std::string& path, std::ostream& out)
{
    const RunManifest m = manifest_from_json(parse_json(read_file(path), path));
    const std::vector<std::string> problems = verify_manifest(m);
    for (const auto& p : problems) {
        out << "  " << p << "\n";
    }
    out << fmt::format("{} files checked, {} mismatched\n", m.inputs.size() + m.outputs.size(), problems.size());
    return problems.empty() ? kExitOk : kExitValidation;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Nehari-manifold ground states of the discrete NLS on weighted graphs", "nehari"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Globals gl;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string dir;
    double tol = 0.0;
    auto* seed_opt = app.add_option("--seed", seed, "Base seed for random starts and samples");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads (fallback: NEHARI_THREADS)");
    auto* dir_opt = app.add_option("--out-dir", dir, "Directory for output files");
    auto* tol_opt = app.add_option("--tol", tol, "Gradient, eigen or audit tolerance for the command");

    std::string input;
    auto* validate = app.add_subcommand("validate", "Check a graph file");
    validate->add_option("graph", input, "Graph JSON")->required();

    std::optional<std::size_t> k;
    std::string method = "auto";
    auto* spectrum = app.add_subcommand("spectrum", "Lowest eigenpairs of the generalized problem");
    spectrum->add_option("graph", input, "Graph JSON")->required();
    spectrum->add_option("-k", k, "Number of eigenpairs (default: all)");
    spectrum->add_option("--method", method, "auto, dense or lanczos");

    auto* solve = app.add_subcommand("solve", "Ground state for a run configuration");
    solve->add_option("config", input, "Run configuration JSON")->required();

    auto* sweep = app.add_subcommand("sweep", "Bifurcation sweep for a sweep configuration");
    sweep->add_option("config", input, "Sweep configuration JSON")->required();

    std::vector<double> lambdas;
    double p = 4.0;
    std::size_t n_random = 200;
    auto* audit = app.add_subcommand("audit", "Randomized check of the form, embedding and growth inequalities");
    audit->add_option("graph", input, "Graph JSON")->required();
    audit->add_option("--lambda", lambdas, "Spectral parameter (repeatable)");
    audit->add_option("--p", p, "Exponent of the power nonlinearity");
    audit->add_option("--n-random", n_random, "Random vectors per parameter");

    std::string name;
    int size = 3;
    int n_minus = 10;
    int n_plus = 10;
    bool literal = false;
    auto* example = app.add_subcommand("example", "Emit a built-in graph (line, path, single)");
    example->add_option("name", name, "Example name")->required();
    example->add_option("--size", size, "Vertices of the path example");
    example->add_option("--n-minus", n_minus, "Negative extent of the line example");
    example->add_option("--n-plus", n_plus, "Positive extent of the line example");
    example->add_flag("--literal-potential", literal, "Line example with V(i) = max(i, 0)");

    auto* verify = app.add_subcommand("verify", "Recompute the digests recorded in a manifest");
    verify->add_option("manifest", input, "Manifest JSON")->required();

    for (auto* sub : {validate, spectrum, solve, sweep, audit, example, verify}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*seed_opt) {
        gl.seed = seed;
    }
    if (*threads_opt) {
        gl.threads = threads;
    }
    if (*dir_opt) {
        gl.out_dir = dir;
    }
    if (*tol_opt) {
        if (!(tol > 0.0)) {
            err << "error: --tol must be positive\n";
            return kExitConfig;
        }
        gl.tol = tol;
    }
    const std::string cmdline = command_line(argc, argv);

    try {
        if (*validate) {
            return cmd_validate(input, out);
        }
        if (*spectrum) {
            return cmd_spectrum(input, k, method, gl, cmdline, out);
        }
        if (*solve) {
            return cmd_solve(input, gl, cmdline, out);
        }
        if (*sweep) {
            return cmd_sweep(input, gl, cmdline, out);
        }
        if (*audit) {
            return cmd_audit(input, lambdas, p, n_random, gl, cmdline, out);
        }
        if (*example) {
            return cmd_example(name, size, n_minus, n_plus, literal, gl, out);
        }
        return cmd_verify(input, out);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const AuditError& e) {
        err << "audit error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const GraphError& e) {
        err << "graph error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        err << "invalid argument: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SpectralError& e) {
        err << "spectral error: " << e.what() << "\n";
        return kExitSpectral;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolver;
    }
}

}  // namespace nehari
