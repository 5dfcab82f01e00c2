#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "anynet/graph.hpp"
#include "anynet/templates.hpp"

namespace anynet {

inline GraphSpec graph_spec_from_json(const nlohmann::json& j) {
    GraphSpec s;
    if (!j.contains("nodes") || !j.contains("edges") || !j.contains("input") || !j.contains("output"))
        throw GraphError("graph file missing nodes/edges/input/output");
    for (const auto& n : j.at("nodes")) s.nodes.push_back(n.at("id").get<std::string>());
    for (const auto& e : j.at("edges")) {
        EdgeSpec es;
        es.id = e.at("id").get<std::string>();
        es.src = e.at("src").get<std::string>();
        es.dst = e.at("dst").get<std::string>();
        es.kind = edge_kind_from_string(e.at("kind").get<std::string>());
        es.c_in = e.at("c_in").get<int>();
        es.c_out = e.at("c_out").get<int>();
        es.cost = e.value("cost", 0.0);
        es.always_keep = e.value("always_keep", false);
        s.edges.push_back(es);
    }
    s.input = j.at("input").get<std::string>();
    s.output = j.at("output").get<std::string>();
    return s;
}

inline nlohmann::json graph_spec_to_json(const GraphSpec& s) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : s.nodes) j["nodes"].push_back({{"id", n}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : s.edges)
        j["edges"].push_back({{"id", e.id},
                              {"src", e.src},
                              {"dst", e.dst},
                              {"kind", to_string(e.kind)},
                              {"c_in", e.c_in},
                              {"c_out", e.c_out},
                              {"cost", e.cost},
                              {"always_keep", e.always_keep}});
    j["input"] = s.input;
    j["output"] = s.output;
    return j;
}

// Accepts either a JSON file path or a "builtin:<name>" template reference.
inline SupernetGraph load_graph(const std::string& ref) {
    if (ref.rfind("builtin:", 0) == 0)
        return SupernetGraph::build(builtin_graph_spec(ref.substr(8)));
    std::ifstream in(ref);
    if (!in) throw GraphError("cannot open graph file: " + ref);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw GraphError("invalid graph JSON: " + std::string(e.what()));
    }
    try {
        return SupernetGraph::build(graph_spec_from_json(j));
    } catch (const nlohmann::json::exception& e) {
        throw GraphError("invalid graph JSON: " + std::string(e.what()));
    }
}

inline void save_graph(const GraphSpec& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw GraphError("cannot open output file: " + path);
    out << graph_spec_to_json(s).dump(2) << "\n";
}

}  // namespace anynet
