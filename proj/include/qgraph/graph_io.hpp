#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qgraph/graph.hpp"

namespace qgraph {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::string id_string(const nlohmann::json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number()) {
        std::ostringstream os;
        os << j.get<double>();
        return os.str();
    }
    throw InvalidGraph("vertex/edge id must be a string or a number");
}

}  // namespace detail

/// Reads the graph JSON format:
///   {"vertices":[{"id":..}], "edges":[{"id","from","to","length","potential"}],
///    "boundary":{"<vertex id>":"dirichlet"|"neumann"}}
/// `potential` is a number (constant) or {"samples":[[x,w],...]} with optional
/// "dw0"/"dw1" endpoint derivatives.
inline MetricGraph graph_from_json(const nlohmann::json& j) {
    try {
        MetricGraph g;
        for (const auto& v : j.at("vertices")) g.vertices.push_back({detail::id_string(v.at("id"))});
        std::size_t auto_id = 0;
        for (const auto& je : j.at("edges")) {
            Edge e;
            e.id = je.contains("id") ? detail::id_string(je.at("id")) : "e" + std::to_string(auto_id);
            ++auto_id;
            const auto from = g.vertex_index(detail::id_string(je.at("from")));
            const auto to = g.vertex_index(detail::id_string(je.at("to")));
            if (!from || !to) throw InvalidGraph("edge '" + e.id + "' references an unknown vertex");
            e.from = *from;
            e.to = *to;
            e.length = je.at("length").get<double>();
            if (je.contains("potential")) {
                const auto& p = je.at("potential");
                if (p.is_number()) {
                    e.potential = ConstantPotential{p.get<double>()};
                } else {
                    SampledPotential s;
                    for (const auto& xw : p.at("samples")) {
                        s.x.push_back(xw.at(0).get<double>());
                        s.w.push_back(xw.at(1).get<double>());
                    }
                    if (p.contains("dw0")) s.dw0 = p.at("dw0").get<double>();
                    if (p.contains("dw1")) s.dw1 = p.at("dw1").get<double>();
                    e.potential = std::move(s);
                }
            }
            g.edges.push_back(std::move(e));
        }
        if (j.contains("boundary")) {
            for (const auto& [key, value] : j.at("boundary").items()) {
                const auto v = g.vertex_index(key);
                if (!v) throw InvalidGraph("boundary entry for unknown vertex '" + key + "'");
                const auto kind = value.get<std::string>();
                if (kind == "dirichlet") {
                    g.boundary[*v] = BoundaryCondition::dirichlet;
                } else if (kind == "neumann") {
                    g.boundary[*v] = BoundaryCondition::neumann;
                } else {
                    throw InvalidGraph("unknown boundary condition '" + kind + "'");
                }
            }
        }
        return g;
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidGraph(std::string("malformed graph JSON: ") + ex.what());
    }
}

inline ordered_json graph_to_json(const MetricGraph& g) {
    ordered_json j;
    j["vertices"] = ordered_json::array();
    for (const auto& v : g.vertices) j["vertices"].push_back({{"id", v.id}});
    j["edges"] = ordered_json::array();
    for (const auto& e : g.edges) {
        ordered_json je;
        je["id"] = e.id;
        je["from"] = g.vertices.at(e.from).id;
        je["to"] = g.vertices.at(e.to).id;
        je["length"] = e.length;
        if (const auto* c = std::get_if<ConstantPotential>(&e.potential)) {
            je["potential"] = c->value;
        } else {
            const auto& s = std::get<SampledPotential>(e.potential);
            ordered_json p;
            p["samples"] = ordered_json::array();
            for (std::size_t i = 0; i < s.x.size(); ++i) p["samples"].push_back({s.x[i], s.w[i]});
            if (s.dw0) p["dw0"] = *s.dw0;
            if (s.dw1) p["dw1"] = *s.dw1;
            je["potential"] = std::move(p);
        }
        j["edges"].push_back(std::move(je));
    }
    ordered_json b = ordered_json::object();
    for (const auto& [v, c] : g.boundary) {
        b[g.vertices.at(v).id] = c == BoundaryCondition::neumann ? "neumann" : "dirichlet";
    }
    j["boundary"] = std::move(b);
    return j;
}

inline MetricGraph parse_graph(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidGraph(std::string("malformed graph JSON: ") + ex.what());
    }
    return graph_from_json(j);
}

inline std::string serialize_graph(const MetricGraph& g) { return graph_to_json(g).dump(2); }

inline MetricGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidGraph("cannot open graph file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_graph(ss.str());
}

}  // namespace qgraph
