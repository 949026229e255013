#include "nehari/io.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <unistd.h>

namespace nehari {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const fs::path& path, const std::string& contents)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += fmt::format(".tmp.{}", ::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
        }
    }
    fs::rename(tmp, path);
}

Json parse_json(const std::string& text, const std::string& origin)
{
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        const std::size_t stop = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ParseError(fmt::format("{}:{}:{}: {}", origin, line, column, e.what()));
    }
}

namespace {

void require_object(const Json& doc, const std::string& where)
{
    if (!doc.is_object()) {
        throw ConfigError(fmt::format("{} must be a JSON object", where));
    }
}

void allow_keys(const Json& doc, std::initializer_list<const char*> allowed, const std::string& where)
{
    require_object(doc, where);
    for (const auto& [key, value] : doc.items()) {
        bool known = false;
        for (const char* a : allowed) {
            known = known || key == a;
        }
        if (!known) {
            throw ConfigError(fmt::format("{}: unknown field \"{}\"", where, key));
        }
    }
}

const Json& require(const Json& doc, const char* key, const std::string& where)
{
    const auto it = doc.find(key);
    if (it == doc.end()) {
        throw ConfigError(fmt::format("{}: missing field \"{}\"", where, key));
    }
    return *it;
}

double number(const Json& v, const std::string& what)
{
    if (!v.is_number()) {
        throw ConfigError(fmt::format("{} must be a number", what));
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(fmt::format("{} must be finite", what));
    }
    return x;
}

std::uint64_t non_negative(const Json& v, const std::string& what)
{
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(fmt::format("{} must be a non-negative integer", what));
}

std::int64_t integer(const Json& v, const std::string& what)
{
    if (!v.is_number_integer()) {
        throw ConfigError(fmt::format("{} must be an integer", what));
    }
    return v.get<std::int64_t>();
}

bool boolean(const Json& v, const std::string& what)
{
    if (!v.is_boolean()) {
        throw ConfigError(fmt::format("{} must be true or false", what));
    }
    return v.get<bool>();
}

VertexId vertex_id(const Json& v, const std::string& what)
{
    if (v.is_number_integer()) {
        return v.get<std::int64_t>();
    }
    if (v.is_string()) {
        return v.get<std::string>();
    }
    throw ConfigError(fmt::format("{} must be an integer or a string", what));
}

Json id_to_json(const VertexId& id)
{
    return std::visit([](const auto& v) { return Json(v); }, id);
}

Json ids_to_json(const WeightedGraph& g)
{
    Json ids = Json::array();
    for (const auto& id : g.ids()) {
        ids.push_back(id_to_json(id));
    }
    return ids;
}

Json vector_to_json(const Vector& v)
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
    }
    return out;
}

std::string method_name(EigenMethod m)
{
    switch (m) {
    case EigenMethod::Auto:
        return "auto";
    case EigenMethod::Dense:
        return "dense";
    case EigenMethod::Lanczos:
        return "lanczos";
    }
    return "auto";
}

}  // namespace

// ---------------------------------------------------------------------------

WeightedGraph graph_from_json(const Json& doc)
{
    allow_keys(doc, {"vertices", "edges"}, "graph");
    const Json& vertices = require(doc, "vertices", "graph");
    if (!vertices.is_array()) {
        throw ConfigError("graph: \"vertices\" must be an array");
    }
    WeightedGraph::Builder builder;
    std::map<VertexId, std::size_t> index;
    std::vector<VertexId> ids;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const Json& v = vertices[i];
        const std::string where = fmt::format("graph.vertices[{}]", i);
        allow_keys(v, {"id", "m", "c", "V"}, where);
        const VertexId id = vertex_id(require(v, "id", where), where + ".id");
        const double m = number(require(v, "m", where), where + ".m");
        if (v.contains("c") && v.contains("V")) {
            throw ConfigError(fmt::format("{}: give either \"c\" or \"V\", not both", where));
        }
        if (index.count(id) != 0) {
            throw ConfigError(fmt::format("{}: duplicate vertex id '{}'", where, to_string(id)));
        }
        std::size_t x = 0;
        if (v.contains("V")) {
            x = builder.add_vertex_with_potential(id, m, number(v["V"], where + ".V"));
        } else {
            const double c = v.contains("c") ? number(v["c"], where + ".c") : 0.0;
            x = builder.add_vertex(id, m, c);
        }
        index.emplace(id, x);
        ids.push_back(id);
    }

    struct Entry {
        std::size_t x;
        std::size_t y;
        double b;
    };
    std::vector<Entry> entries;
    std::set<std::pair<std::size_t, std::size_t>> listed;
    if (doc.contains("edges")) {
        const Json& edges = doc["edges"];
        if (!edges.is_array()) {
            throw ConfigError("graph: \"edges\" must be an array");
        }
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const Json& e = edges[i];
            const std::string where = fmt::format("graph.edges[{}]", i);
            allow_keys(e, {"u", "v", "b"}, where);
            auto lookup = [&](const char* key) {
                const VertexId id = vertex_id(require(e, key, where), fmt::format("{}.{}", where, key));
                const auto it = index.find(id);
                if (it == index.end()) {
                    throw ConfigError(fmt::format("{}: unknown vertex '{}'", where, to_string(id)));
                }
                return it->second;
            };
            const std::size_t x = lookup("u");
            const std::size_t y = lookup("v");
            const double b = number(require(e, "b", where), where + ".b");
            if (!listed.emplace(x, y).second) {
                throw ConfigError(fmt::format("{}: duplicate edge ({}, {})", where, to_string(ids[x]),
                                              to_string(ids[y])));
            }
            entries.push_back({x, y, b});
        }
    }
    for (const auto& e : entries) {
        builder.set_weight(e.x, e.y, e.b);
        if (e.x != e.y && listed.count({e.y, e.x}) == 0) {
            builder.set_weight(e.y, e.x, e.b);
        }
    }
    return builder.build();
}

WeightedGraph parse_graph(const std::string& text, const std::string& origin)
{
    return graph_from_json(parse_json(text, origin));
}

WeightedGraph load_graph(const fs::path& path)
{
    return parse_graph(read_file(path), path.string());
}

Json graph_to_json(const WeightedGraph& g)
{
    Json vertices = Json::array();
    for (std::size_t x = 0; x < g.size(); ++x) {
        vertices.push_back({{"id", id_to_json(g.id(x))}, {"m", g.measure(x)}, {"c", g.killing(x)}});
    }
    auto entry = [&](std::size_t x, std::size_t y) -> const WeightEntry* {
        for (const auto& e : g.neighbors(x)) {
            if (e.to == y) {
                return &e;
            }
        }
        return nullptr;
    };
    Json edges = Json::array();
    for (std::size_t x = 0; x < g.size(); ++x) {
        for (const auto& e : g.neighbors(x)) {
            const std::size_t y = e.to;
            const WeightEntry* back = entry(y, x);
            const bool symmetric = back != nullptr && back->weight == e.weight;
            if (symmetric && y < x) {
                continue;
            }
            edges.push_back({{"u", id_to_json(g.id(x))}, {"v", id_to_json(g.id(y))}, {"b", e.weight}});
            if (back == nullptr && x != y) {
                // An explicit zero keeps the parser from mirroring this entry.
                edges.push_back({{"u", id_to_json(g.id(y))}, {"v", id_to_json(g.id(x))}, {"b", 0.0}});
            }
        }
    }
    return {{"vertices", vertices}, {"edges", edges}};
}

Nonlinearity nonlinearity_from_json(const Json& doc, std::size_t n)
{
    allow_keys(doc, {"type", "p", "g"}, "nonlinearity");
    const Json& type = require(doc, "type", "nonlinearity");
    if (!type.is_string() || type.get<std::string>() != "power") {
        throw ConfigError("nonlinearity.type must be \"power\"");
    }
    const double p = number(require(doc, "p", "nonlinearity"), "nonlinearity.p");
    std::vector<double> g(n, 1.0);
    if (doc.contains("g")) {
        const Json& gj = doc["g"];
        if (gj.is_array()) {
            if (gj.size() != n) {
                throw ConfigError(fmt::format("nonlinearity.g has {} entries for {} vertices", gj.size(), n));
            }
            for (std::size_t i = 0; i < n; ++i) {
                g[i] = number(gj[i], fmt::format("nonlinearity.g[{}]", i));
            }
        } else {
            std::fill(g.begin(), g.end(), number(gj, "nonlinearity.g"));
        }
    }
    try {
        return power_nonlinearity(p, std::move(g));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("nonlinearity: {}", e.what()));
    }
}

// ---------------------------------------------------------------------------

namespace {

GraphSource graph_source(const Json& v, const fs::path& base)
{
    if (v.is_string()) {
        fs::path path = v.get<std::string>();
        if (path.is_relative()) {
            path = base / path;
        }
        return {load_graph(path), path};
    }
    if (v.is_object()) {
        return {graph_from_json(v), std::nullopt};
    }
    throw ConfigError("\"graph\" must be a file path or an inline graph object");
}

int parse_kappa(const Json& v)
{
    if (!v.is_number_integer() || (v.get<std::int64_t>() != 1 && v.get<std::int64_t>() != -1)) {
        throw ConfigError(fmt::format("kappa must be 1 or -1 (got {})", v.dump()));
    }
    return static_cast<int>(v.get<std::int64_t>());
}

int positive_int(const Json& v, const std::string& what)
{
    const auto x = integer(v, what);
    if (x < 1 || x > 1000000000) {
        throw ConfigError(fmt::format("{} must be a positive integer (got {})", what, x));
    }
    return static_cast<int>(x);
}

void apply_solver(const Json& doc, SolverConfig& cfg)
{
    allow_keys(doc, {"tol_grad", "tol_inner", "max_outer_iters", "max_inner_iters", "n_starts", "seed", "threads"},
               "solver");
    if (doc.contains("tol_grad")) {
        cfg.tol_grad = number(doc["tol_grad"], "solver.tol_grad");
    }
    if (doc.contains("tol_inner")) {
        cfg.tol_inner = number(doc["tol_inner"], "solver.tol_inner");
    }
    if (doc.contains("max_outer_iters")) {
        cfg.max_outer_iters = positive_int(doc["max_outer_iters"], "solver.max_outer_iters");
    }
    if (doc.contains("max_inner_iters")) {
        cfg.max_inner_iters = positive_int(doc["max_inner_iters"], "solver.max_inner_iters");
    }
    if (doc.contains("n_starts")) {
        cfg.n_starts = positive_int(doc["n_starts"], "solver.n_starts");
    }
    if (doc.contains("seed")) {
        cfg.seed = non_negative(doc["seed"], "solver.seed");
    }
    if (doc.contains("threads")) {
        cfg.threads = positive_int(doc["threads"], "solver.threads");
    }
}

void apply_spectrum(const Json& doc, EigenOptions& opts)
{
    allow_keys(doc, {"method", "tol", "dense_limit"}, "spectrum");
    if (doc.contains("method")) {
        const Json& m = doc["method"];
        const std::string name = m.is_string() ? m.get<std::string>() : "";
        if (name == "auto") {
            opts.method = EigenMethod::Auto;
        } else if (name == "dense") {
            opts.method = EigenMethod::Dense;
        } else if (name == "lanczos") {
            opts.method = EigenMethod::Lanczos;
        } else {
            throw ConfigError("spectrum.method must be \"auto\", \"dense\" or \"lanczos\"");
        }
    }
    if (doc.contains("tol")) {
        opts.tol = number(doc["tol"], "spectrum.tol");
        if (!(opts.tol > 0.0)) {
            throw ConfigError("spectrum.tol must be positive");
        }
    }
    if (doc.contains("dense_limit")) {
        opts.dense_limit = static_cast<std::size_t>(positive_int(doc["dense_limit"], "spectrum.dense_limit"));
    }
}

void apply_grid(const Json& doc, SweepOptions& opts)
{
    if (!doc.is_object()) {
        throw ConfigError("sweep grid must be an object with start/ratio/count or deltas");
    }
    if (doc.contains("deltas")) {
        allow_keys(doc, {"deltas"}, "grid");
        const Json& d = doc["deltas"];
        if (!d.is_array() || d.empty()) {
            throw ConfigError("grid.deltas must be a non-empty array");
        }
        std::vector<double> deltas;
        for (std::size_t i = 0; i < d.size(); ++i) {
            deltas.push_back(number(d[i], fmt::format("grid.deltas[{}]", i)));
        }
        opts.deltas = std::move(deltas);
        return;
    }
    allow_keys(doc, {"start", "ratio", "count"}, "grid");
    if (doc.contains("start")) {
        opts.start = number(doc["start"], "grid.start");
    }
    if (doc.contains("ratio")) {
        opts.ratio = number(doc["ratio"], "grid.ratio");
    }
    if (doc.contains("count")) {
        opts.count = positive_int(doc["count"], "grid.count");
    }
    if (!(opts.start > 0.0)) {
        throw ConfigError("grid.start must be positive");
    }
    if (!(opts.ratio > 0.0 && opts.ratio < 1.0)) {
        throw ConfigError("grid.ratio must lie in (0, 1)");
    }
}

Json solver_json(const SolverConfig& c)
{
    return {{"kappa", c.kappa},
            {"lambda", c.lambda},
            {"tol_grad", c.tol_grad},
            {"tol_inner", c.tol_inner},
            {"max_outer_iters", c.max_outer_iters},
            {"max_inner_iters", c.max_inner_iters},
            {"n_starts", c.n_starts},
            {"seed", c.seed}};
}

Json eigen_json(const EigenOptions& e)
{
    return {{"method", method_name(e.method)}, {"tol", e.tol}, {"dense_limit", e.dense_limit}};
}

}  // namespace

RunConfig run_config_from_json(const Json& doc, const fs::path& base)
{
    allow_keys(doc, {"graph", "nonlinearity", "kappa", "lambda", "solver", "spectrum"}, "run config");
    RunConfig cfg;
    cfg.solver.kappa = parse_kappa(require(doc, "kappa", "run config"));
    cfg.solver.lambda = number(require(doc, "lambda", "run config"), "lambda");
    if (doc.contains("solver")) {
        apply_solver(doc["solver"], cfg.solver);
    }
    if (doc.contains("spectrum")) {
        apply_spectrum(doc["spectrum"], cfg.eigen);
    }
    cfg.nonlinearity = require(doc, "nonlinearity", "run config");
    cfg.graph = graph_source(require(doc, "graph", "run config"), base);
    nonlinearity_from_json(cfg.nonlinearity, cfg.graph.graph.size());
    cfg.solver.validate();
    return cfg;
}

SweepConfig sweep_config_from_json(const Json& doc, const fs::path& base)
{
    allow_keys(doc,
               {"graph", "nonlinearity", "kappa", "target_k", "side", "grid", "warm_start", "cross_checks", "solver",
                "spectrum"},
               "sweep config");
    SweepConfig cfg;
    cfg.kappa = parse_kappa(require(doc, "kappa", "sweep config"));
    cfg.options.solver.kappa = cfg.kappa;
    if (doc.contains("target_k")) {
        cfg.target_k = static_cast<std::size_t>(positive_int(doc["target_k"], "target_k"));
    }
    if (doc.contains("side")) {
        const Json& s = doc["side"];
        if (!s.is_string()) {
            throw ConfigError("side must be \"below\" or \"above\"");
        }
        cfg.side = parse_side(s.get<std::string>());
    } else {
        cfg.side = cfg.kappa == 1 ? Side::Below : Side::Above;
    }
    if (doc.contains("grid")) {
        apply_grid(doc["grid"], cfg.options);
    }
    if (doc.contains("warm_start")) {
        cfg.options.warm_start = boolean(doc["warm_start"], "warm_start");
    }
    if (doc.contains("cross_checks")) {
        const auto c = integer(doc["cross_checks"], "cross_checks");
        if (c < 0) {
            throw ConfigError("cross_checks must be non-negative");
        }
        cfg.options.cross_checks = static_cast<int>(c);
    }
    if (doc.contains("solver")) {
        apply_solver(doc["solver"], cfg.options.solver);
    }
    if (doc.contains("spectrum")) {
        apply_spectrum(doc["spectrum"], cfg.options.eigen);
    }
    cfg.nonlinearity = require(doc, "nonlinearity", "sweep config");
    cfg.graph = graph_source(require(doc, "graph", "sweep config"), base);
    nonlinearity_from_json(cfg.nonlinearity, cfg.graph.graph.size());
    cfg.options.solver.validate();
    return cfg;
}

Json effective_json(const RunConfig& cfg)
{
    return {{"graph", graph_to_json(cfg.graph.graph)},
            {"nonlinearity", cfg.nonlinearity},
            {"solver", solver_json(cfg.solver)},
            {"spectrum", eigen_json(cfg.eigen)}};
}

Json effective_json(const SweepConfig& cfg)
{
    Json grid;
    if (cfg.options.deltas) {
        grid = {{"deltas", *cfg.options.deltas}};
    } else {
        grid = {{"start", cfg.options.start}, {"ratio", cfg.options.ratio}, {"count", cfg.options.count}};
    }
    return {{"graph", graph_to_json(cfg.graph.graph)},
            {"nonlinearity", cfg.nonlinearity},
            {"kappa", cfg.kappa},
            {"target_k", cfg.target_k},
            {"side", to_string(cfg.side)},
            {"grid", grid},
            {"warm_start", cfg.options.warm_start},
            {"cross_checks", cfg.options.cross_checks},
            {"solver", solver_json(cfg.options.solver)},
            {"spectrum", eigen_json(cfg.options.eigen)}};
}

// ---------------------------------------------------------------------------

Json spectrum_to_json(const SpectralData& spec, const WeightedGraph& g)
{
    Json vectors = Json::array();
    for (std::size_t n = 0; n < spec.count(); ++n) {
        vectors.push_back(vector_to_json(spec.vector(n)));
    }
    return {{"method", method_name(spec.method)},
            {"count", spec.count()},
            {"dimension", spec.dimension()},
            {"vertices", ids_to_json(g)},
            {"eigenvalues", vector_to_json(spec.eigenvalues)},
            {"residuals", spec.residuals},
            {"eigenvectors", vectors}};
}

Json result_to_json(const GroundStateResult& r, const WeightedGraph& g,
                    const std::optional<CriticalValueReport>& bounds)
{
    Json starts = Json::array();
    for (const auto& s : r.starts) {
        starts.push_back({{"index", s.index},
                          {"seed", s.seed},
                          {"status", s.status},
                          {"outer_iterations", s.outer_iterations},
                          {"polish_iterations", s.polish_iterations},
                          {"residual", s.residual},
                          {"level", s.level},
                          {"norm_E", s.norm_E}});
    }
    Json out = {{"status", r.status},
                {"kappa", r.kappa},
                {"lambda", r.lambda},
                {"delta", r.delta},
                {"energy", r.energy},
                {"level", r.level},
                {"residual_grad", r.residual_grad},
                {"residual_grad_E", r.residual_grad_E},
                {"nehari_residuals", {{"ray", r.nehari_ray}, {"F", r.nehari_f}}},
                {"norms", {{"E", r.norm_E}, {"l2", r.norm_l2}, {"lp", r.norm_lp}, {"inf", r.norm_inf}, {"p", r.p}}},
                {"second_order_ok", r.second_order_ok},
                {"minimax_gap", r.minimax_gap},
                {"vertices", ids_to_json(g)},
                {"u", vector_to_json(r.u)},
                {"starts", starts}};
    if (bounds) {
        const auto& b = *bounds;
        out["critical_value_bounds"] = {{"skipped", b.skipped},
                                        {"note", b.note},
                                        {"lp_power", b.lp_power},
                                        {"C1", b.C1},
                                        {"level", b.level},
                                        {"bound_lp_ok", b.bound_lp_ok},
                                        {"delta", b.delta},
                                        {"norm_E_sq", b.norm_E_sq},
                                        {"energy_ratio", b.energy_ratio}};
    }
    return out;
}

Json sweep_to_json(const SweepResult& s)
{
    Json rows = Json::array();
    for (const auto& r : s.rows) {
        rows.push_back({{"lambda", r.lambda},
                        {"delta", r.delta},
                        {"norm_E", r.norm_E},
                        {"norm_lp", r.norm_lp},
                        {"energy", r.energy},
                        {"level", r.level},
                        {"resid", r.residual},
                        {"nehari_ray", r.nehari_ray},
                        {"nehari_F", r.nehari_f},
                        {"bound_lp_ok", r.bound_lp_ok},
                        {"status", r.status}});
    }
    Json checks = Json::array();
    for (const auto& c : s.cross_checks) {
        checks.push_back({{"row", c.row},
                          {"continued_level", c.continued_level},
                          {"cold_level", c.cold_level},
                          {"agree", c.agree}});
    }
    return {{"kappa", s.kappa},
            {"target", {{"k", s.target_k}, {"value", s.target_value}, {"side", to_string(s.side)}}},
            {"gap", s.gap},
            {"p", s.p},
            {"expected_exponent", s.expected_exponent()},
            {"fit",
             {{"slope", s.fit.slope},
              {"intercept", s.fit.intercept},
              {"r_squared", s.fit.r_squared},
              {"points", s.fit.points}}},
            {"scaling_ok", s.scaling_ok},
            {"rows", rows},
            {"cross_checks", checks}};
}

std::string sweep_to_csv(const SweepResult& s)
{
    std::string out = "lambda,delta,norm_E,norm_lp,energy,resid,status\n";
    for (const auto& r : s.rows) {
        out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.lambda, r.delta, r.norm_E,
                           r.norm_lp, r.energy, r.residual, r.status);
    }
    return out;
}

std::string sweep_plot_data(const SweepResult& s)
{
    std::string out = "# delta norm_E\n";
    for (const auto& r : s.rows) {
        if (r.status == "converged") {
            out += fmt::format("{:.17g} {:.17g}\n", r.delta, r.norm_E);
        }
    }
    return out;
}

Json audit_to_json(const AuditReport& report)
{
    Json counts = Json::array();
    for (const auto& c : report.counts) {
        counts.push_back({{"name", c.name}, {"checked", c.checked}, {"passed", c.passed}, {"witness", c.witness}});
    }
    return {{"ok", report.ok()}, {"checks", counts}};
}

std::string dump(const Json& doc)
{
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", md[i]);
    }
    return hex;
}

std::string sha256_file(const fs::path& path)
{
    return sha256_hex(read_file(path));
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::now();
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

Json manifest_to_json(const RunManifest& m)
{
    auto files = [](const std::vector<FileDigest>& list) {
        Json out = Json::array();
        for (const auto& f : list) {
            out.push_back({{"path", f.path}, {"sha256", f.sha256}});
        }
        return out;
    };
    return {{"tool", m.tool},
            {"version", m.version},
            {"command", m.command},
            {"config_hash", m.config_hash},
            {"seed", m.seed},
            {"started", m.started},
            {"finished", m.finished},
            {"inputs", files(m.inputs)},
            {"outputs", files(m.outputs)}};
}

RunManifest manifest_from_json(const Json& doc)
{
    allow_keys(doc, {"tool", "version", "command", "config_hash", "seed", "started", "finished", "inputs", "outputs"},
               "manifest");
    auto text = [&](const char* key) {
        const Json& v = require(doc, key, "manifest");
        if (!v.is_string()) {
            throw ConfigError(fmt::format("manifest.{} must be a string", key));
        }
        return v.get<std::string>();
    };
    auto files = [&](const char* key) {
        const Json& v = require(doc, key, "manifest");
        if (!v.is_array()) {
            throw ConfigError(fmt::format("manifest.{} must be an array", key));
        }
        std::vector<FileDigest> out;
        for (const auto& f : v) {
            allow_keys(f, {"path", "sha256"}, fmt::format("manifest.{}[]", key));
            const Json& p = require(f, "path", "manifest file");
            const Json& h = require(f, "sha256", "manifest file");
            if (!p.is_string() || !h.is_string()) {
                throw ConfigError("manifest file entries need string path and sha256");
            }
            out.push_back({p.get<std::string>(), h.get<std::string>()});
        }
        return out;
    };
    RunManifest m;
    m.tool = text("tool");
    m.version = text("version");
    m.command = text("command");
    m.config_hash = text("config_hash");
    m.seed = non_negative(require(doc, "seed", "manifest"), "manifest.seed");
    m.started = text("started");
    m.finished = text("finished");
    m.inputs = files("inputs");
    m.outputs = files("outputs");
    return m;
}

std::vector<std::string> verify_manifest(const RunManifest& m)
{
    std::vector<std::string> problems;
    for (const auto* list : {&m.inputs, &m.outputs}) {
        for (const auto& f : *list) {
            if (!fs::exists(f.path)) {
                problems.push_back(fmt::format("{}: missing", f.path));
                continue;
            }
            const std::string actual = sha256_file(f.path);
            if (actual != f.sha256) {
                problems.push_back(fmt::format("{}: digest {} does not match recorded {}", f.path, actual, f.sha256));
            }
        }
    }
    return problems;
}

}  // namespace nehari
