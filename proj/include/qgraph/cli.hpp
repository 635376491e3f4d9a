#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qgraph/combolab.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/heatflow.hpp"
#include "qgraph/nodal.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph::cli {

// ---------------------------------------------------------------------------
// Report serialisation. Field order is fixed so output is byte-stable.

inline std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline ordered_json to_json(const ValidationReport& r) {
    return {{"valid", r.valid},           {"connected", r.connected}, {"neumann_present", r.neumann_present},
            {"n_vertices", r.n_vertices}, {"n_edges", r.n_edges},     {"n_boundary", r.n_boundary},
            {"n_inner", r.n_inner},       {"issues", r.issues}};
}

inline ordered_json to_json(const GraphTopology& t) {
    return {{"beta", t.beta},
            {"n_boundary", t.n_boundary},
            {"n_inner", t.n_inner},
            {"inner_degree_excess", t.degree_sum_excess},
            {"boundary_plus_2beta_minus_2", t.excess_identity()},
            {"identity_holds", t.degree_sum_excess == t.excess_identity()}};
}

inline ordered_json to_json(const ConditionResiduals& r) {
    return {{"continuity", r.continuity}, {"kirchhoff", r.kirchhoff}, {"boundary", r.boundary}};
}

inline ordered_json to_json(const Spectrum& s) {
    ordered_json j;
    j["window"] = {s.lambda_start, s.lambda_end};
    j["eigenpairs"] = ordered_json::array();
    for (const auto& p : s.pairs) {
        j["eigenpairs"].push_back({{"index", p.index},
                                   {"lambda", p.lambda},
                                   {"multiplicity", p.multiplicity},
                                   {"residuals", to_json(condition_residuals(*s.graph, p))}});
    }
    return j;
}

inline ordered_json to_json(const GenericityReport& r) {
    ordered_json pairs = ordered_json::array();
    for (const auto& p : r.pairs) {
        ordered_json jp{{"index", p.index}, {"lambda", p.lambda}};
        jp["min_inner_ratio"] = p.min_inner_ratio ? ordered_json(*p.min_inner_ratio) : ordered_json(nullptr);
        jp["gap_next"] = p.gap_next ? ordered_json(*p.gap_next) : ordered_json(nullptr);
        pairs.push_back(std::move(jp));
    }
    ordered_json j{{"generic", r.generic}, {"neumann_present", r.neumann_present}};
    j["min_inner_ratio"] = r.min_inner_ratio ? ordered_json(*r.min_inner_ratio) : ordered_json(nullptr);
    j["min_gap"] = r.min_gap ? ordered_json(*r.min_gap) : ordered_json(nullptr);
    j["tol_ratio"] = r.tol_ratio;
    j["tol_gap"] = r.tol_gap;
    j["pairs"] = std::move(pairs);
    return j;
}

inline ordered_json to_json(const MetricGraph& g, const NodalReport& r) {
    ordered_json loci = ordered_json::array();
    for (const auto& z : r.loci) {
        ordered_json jz;
        if (z.vertex) {
            jz["vertex"] = g.vertices[*z.vertex].id;
        } else {
            jz["edge"] = g.edges[*z.edge].id;
            jz["x"] = z.x;
        }
        jz["kind"] = z.kind == ZeroKind::tangential ? "tangential" : "transversal";
        jz["residual"] = z.residual;
        loci.push_back(std::move(jz));
    }
    ordered_json per_edge = ordered_json::object();
    for (std::size_t e = 0; e < g.edges.size(); ++e) per_edge[g.edges[e].id] = r.per_edge[e];
    return {{"count", r.total},
            {"tangential_present", r.tangential_present},
            {"vertex_zero_present", r.vertex_zero_present},
            {"approximate", r.approximate},
            {"sup_norm", r.sup_norm},
            {"per_edge", std::move(per_edge)},
            {"loci", std::move(loci)},
            {"diagnostics", r.diagnostics}};
}

inline ordered_json combo_json(const std::vector<Term>& terms) {
    ordered_json j = ordered_json::array();
    for (const auto& t : terms) j.push_back({{"index", t.index}, {"coefficient", t.coeff}});
    return j;
}

inline ordered_json to_json(const MetricGraph& g, const BoundCertificate& c) {
    return {{"k1", c.k1},
            {"kM", c.kM},
            {"M", c.M},
            {"n_boundary", c.n_boundary},
            {"beta", c.beta},
            {"lower", c.lower},
            {"upper", c.upper},
            {"measured", c.measured},
            {"within_bounds", c.within},
            {"generic", c.generic},
            {"verdict", to_string(c.verdict)},
            {"genericity", to_json(c.genericity)},
            {"nodal", to_json(g, c.nodal)}};
}

inline ordered_json to_json(const SaturationRun& r) {
    const auto& g = *r.spectrum->graph;
    const auto& s = r.result;
    return {{"s", s.s},
            {"L", s.L},
            {"eps", r.eps},
            {"delta", r.delta},
            {"seed", r.seed},
            {"coefficients", s.coefficients},
            {"measured", s.measured},
            {"target", s.target},
            {"upper_bound", r.bounds.upper},
            {"achieved", s.achieved},
            {"attempts", s.attempts},
            {"designated_edge", g.edges[s.designated_edge].id},
            {"targets", s.targets},
            {"eigenvalues", r.spectrum->eigenvalues()},
            {"genericity", to_json(r.genericity)},
            {"nodal", to_json(g, s.nodal)},
            {"diagnostics", s.diagnostics},
            {"log", r.log},
            {"graph", graph_to_json(g)}};
}

inline ordered_json to_json(const LadderRun& r) {
    const auto& g = *r.selection.spectrum->graph;
    const auto& f = r.result;
    ordered_json table = ordered_json::array();
    for (const auto& c : f.table) table.push_back({c.b, c.count});
    return {{"m", static_cast<long>(g.edges.size()) - 2},
            {"eps", r.selection.eps},
            {"delta", r.selection.delta},
            {"seed", r.selection.seed},
            {"b", f.b},
            {"normalisation", {{"d2", f.d2}, {"d3", f.d3}}},
            {"coefficients", f.coefficients},
            {"n_f2", f.n_f2},
            {"n_f3", f.n_f3},
            {"n_combination", f.n_combo},
            {"eigenvalues", r.selection.spectrum->eigenvalues()},
            {"count_table", std::move(table)},
            {"log", r.log},
            {"graph", graph_to_json(g)}};
}

inline std::string site_name(const MetricGraph& g, const EventSite& s) {
    if (s.vertex) return g.vertices[*s.vertex].id;
    return g.edges[*s.edge].id + "@" + num(s.x);
}

inline ordered_json to_json(const HeatFlowTrace& tr, const HeatFlowAudit& a) {
    const auto& g = *tr.spectrum->graph;
    ordered_json verts = ordered_json::array();
    for (const auto& v : a.vertices) {
        verts.push_back({{"vertex", g.vertices[v.vertex].id},
                         {"degree", v.degree},
                         {"e6_events", v.e6_count},
                         {"max_e6_delta", v.max_e6_delta},
                         {"sign_changes", v.bound.sign_changes},
                         {"gv_zeros", v.bound.zeros},
                         {"polya_szego_ok", v.bound.within_bound}});
    }
    ordered_json events = ordered_json::array();
    for (const auto& e : tr.events) {
        events.push_back({{"y", e.y}, {"kind", to_string(e.kind)}, {"site", site_name(g, e.site)}, {"delta", e.delta}});
    }
    return {{"combination", combo_json(tr.terms)},
            {"y_range", {tr.y_min(), tr.y_max()}},
            {"dy", tr.dy},
            {"slices", tr.slices.size()},
            {"n_low", tr.n_low},
            {"n_high", tr.n_high},
            {"n_at_zero", tr.n_zero},
            {"low_converged", tr.low_converged},
            {"high_converged", tr.high_converged},
            {"ledger", {{"from_low", a.ledger_low}, {"from_high", a.ledger_high}, {"ok", a.ledger_ok}}},
            {"extremes_ok", a.extremes_ok},
            {"e1_e2_events", a.e1e2_events},
            {"unknown_events", a.unknown_events},
            {"increases_only_at_e6", a.increases_at_e6},
            {"e6_budget_ok", a.e6_budget_ok},
            {"e6_matches_gv_zeros", a.e6_matches_gv},
            {"polya_szego_ok", a.polya_szego_ok},
            {"counts_change_only_at_events", a.counts_change_only_at_events},
            {"passed", a.passed()},
            {"vertices", std::move(verts)},
            {"events", std::move(events)},
            {"issues", a.issues}};
}

inline std::string trace_csv(const HeatFlowTrace& tr) {
    const auto& g = *tr.spectrum->graph;
    std::string s = "y,edge_id,x_zero,curve_id\n";
    for (const auto& sl : tr.slices) {
        for (std::size_t i = 0; i < sl.report.loci.size(); ++i) {
            const auto& z = sl.report.loci[i];
            const std::string where = z.vertex ? g.vertices[*z.vertex].id : g.edges[*z.edge].id;
            s += num(sl.y) + "," + where + "," + (z.vertex ? std::string() : num(z.x)) + "," +
                 std::to_string(sl.curve[i]) + "\n";
        }
    }
    return s;
}

inline std::string events_csv(const HeatFlowTrace& tr) {
    const auto& g = *tr.spectrum->graph;
    std::string s = "y,kind,site,delta\n";
    for (const auto& e : tr.events) {
        s += num(e.y) + "," + to_string(e.kind) + "," + site_name(g, e.site) + "," + std::to_string(e.delta) + "\n";
    }
    return s;
}

// ---------------------------------------------------------------------------

/// Writes via a temporary file and a rename so readers never see partial output.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        f << content;
        if (!f) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

inline const char* error_kind(const Error& e) {
    if (dynamic_cast<const InvalidGraph*>(&e)) return "invalid_graph";
    if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid_argument";
    if (dynamic_cast<const SpectralError*>(&e)) return "spectral";
    if (dynamic_cast<const NodalError*>(&e)) return "nodal";
    if (dynamic_cast<const SearchError*>(&e)) return "search";
    return "domain";
}

struct Globals {
    double tol_scale = 1.0;
    std::uint64_t seed = 1;
    std::string out_dir;
    std::string format = "json";
    unsigned threads = 0;

    [[nodiscard]] Tolerances tol() const { return Tolerances{}.scaled(tol_scale); }
    [[nodiscard]] unsigned workers() const {
        return threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    }
};

/// Flat key,value CSV for reports that are not tables.
inline std::string flat_csv(const ordered_json& j) {
    std::string s = "key,value\n";
    for (const auto& [k, v] : j.items()) {
        if (v.is_primitive()) s += k + "," + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
    }
    return s;
}

/// Runs one command line. Exit status: 0 success, 1 domain error, 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"qgraph: spectra and nodal counts of eigenfunction combinations on metric graphs", "qgraph"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals gl;
    app.add_option("--tol-scale", gl.tol_scale, "Multiply every relative tolerance by this factor")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", gl.seed, "Seed for perturbations and jittered targets");
    app.add_option("--out", gl.out_dir, "Directory for written artifacts");
    app.add_option("--format", gl.format, "Report format on standard output")
        ->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--threads", gl.threads, "Worker cap (0 = hardware concurrency)");

    std::string graph_path;
    std::string combo_text;
    std::size_t count = 0;
    std::size_t k = 0;
    std::size_t samples = 9;
    int s_arms = 0;
    std::size_t L = 0;
    int m = 0;
    std::size_t M = 0;
    std::optional<double> eps;
    std::optional<double> delta;
    std::optional<double> y_min;
    std::optional<double> y_max;
    bool adaptive = false;
    double length = 1.0;
    std::string kind;
    std::string prefix = "heatflow";
    std::string output;

    auto* validate_cmd = app.add_subcommand("validate", "Check a graph file");
    validate_cmd->add_option("graph", graph_path, "Graph JSON")->required();

    auto* topology_cmd = app.add_subcommand("topology", "Betti number and the inner-degree identity");
    topology_cmd->add_option("graph", graph_path, "Graph JSON")->required();

    auto* spectrum_cmd = app.add_subcommand("spectrum", "First eigenvalues with vertex-condition residuals");
    spectrum_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    spectrum_cmd->add_option("--count", count, "Number of eigenvalues")->required()->check(CLI::PositiveNumber);

    auto* eigen_cmd = app.add_subcommand("eigenfunction", "Samples of the k-th eigenfunction");
    eigen_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    eigen_cmd->add_option("--k", k, "1-based index")->required()->check(CLI::PositiveNumber);
    eigen_cmd->add_option("--samples", samples, "Samples per edge")->check(CLI::Range(2, 100000));

    auto* nodal_cmd = app.add_subcommand("nodal", "Zeros of a combination");
    nodal_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    nodal_cmd->add_option("--combo", combo_text, "index:coefficient[,index:coefficient...]")->required();

    auto* verify_cmd = app.add_subcommand("verify-bounds", "Certificate for the nodal bounds of a combination");
    verify_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    verify_cmd->add_option("--combo", combo_text, "index:coefficient[,index:coefficient...]")->required();

    auto* saturate_cmd = app.add_subcommand("saturate", "Saturating combination on a perturbed star");
    saturate_cmd->add_option("--s", s_arms, "Number of small edges")->required()->check(CLI::PositiveNumber);
    saturate_cmd->add_option("--L", L, "Number of eigenfunctions")->required()->check(CLI::PositiveNumber);
    saturate_cmd->add_option("--eps", eps, "Small edge length (default: select-eps)");
    saturate_cmd->add_option("--delta", delta, "Length perturbation (default: shrinking search)");

    auto* findb_cmd = app.add_subcommand("find-b", "b with N(f2 + b f3) = 1 on a perturbed ladder");
    findb_cmd->add_option("--m", m, "Number of parallel edges")->required()->check(CLI::Range(2, 64));
    findb_cmd->add_option("--eps", eps, "Parallel edge length (default: dyadic search)");

    auto* heat_cmd = app.add_subcommand("heatflow", "Nodal curves of the heat-flow deformation");
    heat_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    heat_cmd->add_option("--combo", combo_text, "index:coefficient[,index:coefficient...]")->required();
    auto* ymin_opt = heat_cmd->add_option("--y-min", y_min, "Lower end of a fixed range");
    auto* ymax_opt = heat_cmd->add_option("--y-max", y_max, "Upper end of a fixed range");
    auto* adaptive_flag = heat_cmd->add_flag("--adaptive", adaptive, "Extend the range until counts stabilise");
    ymin_opt->needs(ymax_opt);
    ymax_opt->needs(ymin_opt);
    adaptive_flag->excludes(ymin_opt);
    heat_cmd->add_option("--prefix", prefix, "File name prefix for the trace, events and audit");

    auto* construct_cmd = app.add_subcommand("construct", "Write a star, ladder or interval graph");
    construct_cmd->add_option("kind", kind, "star | ladder | interval")
        ->required()
        ->check(CLI::IsMember({"star", "ladder", "interval"}));
    construct_cmd->add_option("--s", s_arms, "Star: number of small edges");
    construct_cmd->add_option("--m", m, "Ladder: number of parallel edges");
    construct_cmd->add_option("--eps", eps, "Small edge length");
    construct_cmd->add_option("--length", length, "Interval length");
    construct_cmd->add_option("--delta", delta, "Perturb short edge lengths by up to delta (uses --seed)");
    construct_cmd->add_option("-o,--output", output, "Output file (default: standard output)");

    auto* generic_cmd = app.add_subcommand("generic-check", "Genericity of the first M eigenpairs");
    generic_cmd->add_option("graph", graph_path, "Graph JSON")->required();
    generic_cmd->add_option("--count", M, "M")->required()->check(CLI::PositiveNumber);

    auto* eps_cmd = app.add_subcommand("select-eps", "Dyadic small-edge length for G(s, eps)");
    eps_cmd->add_option("--s", s_arms, "Number of small edges")->required()->check(CLI::PositiveNumber);
    eps_cmd->add_option("--M", M, "Number of eigenvalues")->required()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return 2;
    }

    const auto tol = gl.tol();
    auto emit = [&](const ordered_json& j, const std::string& csv = {}) {
        if (gl.format == "csv") {
            out << (csv.empty() ? flat_csv(j) : csv);
        } else {
            out << j.dump(2) << "\n";
        }
    };
    auto spectrum_for = [&](const MetricGraph& g, std::size_t n) {
        return std::make_shared<const Spectrum>(scan_spectrum(g, n, tol));
    };

    try {
        if (*validate_cmd) {
            const auto g = load_graph(graph_path);
            const auto r = validate(g);
            emit(to_json(r));
            return r.valid ? 0 : 1;
        }
        if (*topology_cmd) {
            emit(to_json(topology(load_graph(graph_path))));
            return 0;
        }
        if (*spectrum_cmd) {
            const auto spec = spectrum_for(load_graph(graph_path), count);
            const auto gen = genericity_check(*spec, spec->size(), tol);
            auto j = to_json(*spec);
            std::string csv = "index,lambda,multiplicity,min_inner_vertex_ratio\n";
            for (std::size_t i = 0; i < spec->size(); ++i) {
                const auto& p = spec->pairs[i];
                const auto& r = gen.pairs[i].min_inner_ratio;
                j["eigenpairs"][i]["min_inner_vertex_ratio"] = r ? ordered_json(*r) : ordered_json(nullptr);
                csv += std::to_string(p.index) + "," + num(p.lambda) + "," + std::to_string(p.multiplicity) + "," +
                       (r ? num(*r) : std::string()) + "\n";
            }
            emit(j, csv);
            return 0;
        }
        if (*eigen_cmd) {
            const auto g = load_graph(graph_path);
            const auto spec = spectrum_for(g, k);
            const auto& p = spec->at(k);
            ordered_json edges = ordered_json::array();
            std::string csv = "edge_id,x,value,derivative\n";
            for (std::size_t e = 0; e < g.edges.size(); ++e) {
                ordered_json xs = ordered_json::array();
                ordered_json fs = ordered_json::array();
                ordered_json ds = ordered_json::array();
                for (std::size_t i = 0; i < samples; ++i) {
                    const double x = g.edges[e].length * static_cast<double>(i) / static_cast<double>(samples - 1);
                    const double v = p.value(e, x);
                    const double d = p.derivative(e, x);
                    xs.push_back(x);
                    fs.push_back(v);
                    ds.push_back(d);
                    csv += g.edges[e].id + "," + num(x) + "," + num(v) + "," + num(d) + "\n";
                }
                edges.push_back({{"edge", g.edges[e].id},
                                 {"x", std::move(xs)},
                                 {"value", std::move(fs)},
                                 {"derivative", std::move(ds)}});
            }
            emit({{"index", p.index},
                  {"lambda", p.lambda},
                  {"multiplicity", p.multiplicity},
                  {"residuals", to_json(condition_residuals(g, p))},
                  {"edges", std::move(edges)}},
                 csv);
            return 0;
        }
        if (*nodal_cmd || *verify_cmd || *heat_cmd) {
            const auto g = load_graph(graph_path);
            const auto terms = parse_combo(combo_text);
            const auto spec = spectrum_for(g, terms.back().index + 1);
            const FunctionOnGraph F(spec, terms);
            if (*nodal_cmd) {
                const auto r = count_zeros(F, {tol});
                std::string csv = "site,x,kind\n";
                for (const auto& z : r.loci) {
                    csv += (z.vertex ? g.vertices[*z.vertex].id : g.edges[*z.edge].id) + "," +
                           (z.vertex ? std::string() : num(z.x)) + "," +
                           (z.kind == ZeroKind::tangential ? "tangential" : "transversal") + "\n";
                }
                emit({{"combination", combo_json(terms)}, {"nodal", to_json(g, r)}}, csv);
                return 0;
            }
            if (*verify_cmd) {
                const auto c = verify_bounds(F, tol);
                ordered_json j{{"combination", combo_json(terms)}};
                j.update(to_json(g, c));
                emit(j);
                return 0;
            }
            HeatFlowOptions ho;
            ho.tol = tol;
            ho.threads = gl.workers();
            if (!adaptive && y_min && y_max) {
                ho.y_min = y_min;
                ho.y_max = y_max;
            }
            const auto tr = evolve(F, ho);
            const auto audit = audit_trace(tr, tol);
            const auto report = to_json(tr, audit);
            const std::filesystem::path dir = gl.out_dir.empty() ? "." : gl.out_dir;
            const auto trace_path = dir / (prefix + "_trace.csv");
            const auto events_path = dir / (prefix + "_events.csv");
            const auto audit_path = dir / (prefix + "_audit.json");
            const auto trace_text = trace_csv(tr);
            const auto events_text = events_csv(tr);
            write_atomic(trace_path, trace_text);
            write_atomic(events_path, events_text);
            write_atomic(audit_path, report.dump(2) + "\n");
            ordered_json j = report;
            j["artifacts"] = {trace_path.string(), events_path.string(), audit_path.string()};
            emit(j, events_text);
            return 0;
        }
        if (*saturate_cmd) {
            SaturationOptions so;
            so.eps = eps;
            so.delta = delta;
            so.seed = gl.seed;
            so.tol = tol;
            const auto r = saturate(s_arms, L, so);
            const auto j = to_json(r);
            if (!gl.out_dir.empty()) {
                write_atomic(std::filesystem::path(gl.out_dir) / "saturate.json", j.dump(2) + "\n");
            }
            emit(j);
            return r.result.achieved ? 0 : 1;
        }
        if (*findb_cmd) {
            const auto r = ladder_find_b(m, eps, gl.seed, tol);
            const auto j = to_json(r);
            if (!gl.out_dir.empty()) {
                write_atomic(std::filesystem::path(gl.out_dir) / "find_b.json", j.dump(2) + "\n");
            }
            emit(j);
            return 0;
        }
        if (*construct_cmd) {
            MetricGraph g;
            if (kind == "interval") {
                g = build_interval(length);
            } else {
                if (!eps) throw InvalidArgument(kind + " needs --eps");
                if (kind == "star") {
                    if (s_arms < 1) throw InvalidArgument("star needs --s >= 1");
                    g = build_star(s_arms, *eps);
                } else {
                    if (m < 2) throw InvalidArgument("ladder needs --m >= 2");
                    g = build_ladder(m, *eps);
                }
            }
            if (delta) g = perturb_lengths(g, *delta, gl.seed);
            const auto text = serialize_graph(g) + "\n";
            if (!output.empty()) {
                const auto path = gl.out_dir.empty() ? std::filesystem::path(output)
                                                     : std::filesystem::path(gl.out_dir) / output;
                write_atomic(path, text);
                emit({{"written", path.string()}, {"validation", to_json(validate(g))}});
            } else {
                out << text;
            }
            return 0;
        }
        if (*generic_cmd) {
            const auto r = genericity_check(load_graph(graph_path), M, tol);
            emit(to_json(r));
            return r.generic ? 0 : 1;
        }
        if (*eps_cmd) {
            const auto r = select_eps(s_arms, M, tol);
            emit({{"eps", r.eps},
                  {"j", r.j},
                  {"eps_sqrt_lambda_M", r.eps_sqrt_lambda},
                  {"min_gap", r.min_gap},
                  {"eigenvalues", r.eigenvalues}});
            return 0;
        }
    } catch (const Error& e) {
        ordered_json j{{"error", {{"kind", error_kind(e)}, {"message", e.what()}}}};
        out << j.dump(2) << "\n";
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace qgraph::cli
