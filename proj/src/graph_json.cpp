#include <nlohmann/json.hpp>

#include "gvdoc/errors.hpp"
#include "gvdoc/graph.hpp"

namespace gvdoc {

using nlohmann::json;

const char* edge_kind_name(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::Beta: return "BETA";
        case EdgeKind::ParaKnn: return "PARA_KNN";
        case EdgeKind::ParaLink: return "PARA_LINK";
        case EdgeKind::Super: return "SUPER";
        case EdgeKind::Self: return "SELF";
    }
    throw InvariantError("unknown edge kind");
}

EdgeKind edge_kind_from_name(const std::string& name) {
    if (name == "BETA") return EdgeKind::Beta;
    if (name == "PARA_KNN") return EdgeKind::ParaKnn;
    if (name == "PARA_LINK") return EdgeKind::ParaLink;
    if (name == "SUPER") return EdgeKind::Super;
    if (name == "SELF") return EdgeKind::Self;
    throw DataError("graph json: unknown edge kind '" + name + "'");
}

const char* graph_mode_name(GraphMode mode) {
    switch (mode) {
        case GraphMode::Beta: return "beta";
        case GraphMode::Paragraph: return "paragraph";
        case GraphMode::Both: return "both";
    }
    throw InvariantError("unknown graph mode");
}

GraphMode graph_mode_from_name(const std::string& name) {
    if (name == "beta") return GraphMode::Beta;
    if (name == "paragraph") return GraphMode::Paragraph;
    if (name == "both") return GraphMode::Both;
    throw DataError("unknown graph mode '" + name + "' (expected beta|paragraph|both)");
}

// Schema:
//   {"doc_id": str, "label": int|null, "seed": uint, "config_hash": str,
//    "nodes": [{"token_id", "bbox", "para_bbox", "read_index", "type_id"}],
//    "edges": [{"src", "dst", "kind", "features": [21 numbers]}]}
std::string serialize_graph_json(const DocumentGraph& graph, const std::string& config_hash) {
    json root;
    root["doc_id"] = graph.doc_id;
    if (graph.label.has_value())
        root["label"] = *graph.label;
    else
        root["label"] = nullptr;
    root["seed"] = graph.seed;
    root["config_hash"] = config_hash;

    json nodes = json::array();
    for (const GraphNode& n : graph.nodes) {
        nodes.push_back({{"token_id", n.token_id},
                         {"bbox", {n.bbox.x1, n.bbox.y1, n.bbox.x2, n.bbox.y2}},
                         {"para_bbox", {n.para_bbox.x1, n.para_bbox.y1, n.para_bbox.x2, n.para_bbox.y2}},
                         {"read_index", n.read_index},
                         {"type_id", n.type_id}});
    }
    root["nodes"] = std::move(nodes);

    json edges = json::array();
    for (const Edge& e : graph.edges) {
        json fe = json::array();
        for (double v : e.features) fe.push_back(v);
        edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", edge_kind_name(e.kind)},
                         {"features", std::move(fe)}});
    }
    root["edges"] = std::move(edges);
    return root.dump(2) + "\n";
}

namespace {

BBox bbox_from(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 4) throw DataError("graph json: " + where + ": expected 4 numbers");
    for (const auto& x : v)
        if (!x.is_number()) throw DataError("graph json: " + where + ": expected 4 numbers");
    return BBox{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
}

}  // namespace

DocumentGraph parse_graph_json(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded()) throw DataError("graph json: not valid JSON");
    if (!root.is_object()) throw DataError("graph json: expected an object");
    for (const char* key : {"doc_id", "label", "seed", "nodes", "edges"})
        if (!root.contains(key)) throw DataError(std::string("graph json: /") + key + ": missing");

    DocumentGraph g;
    g.doc_id = root["doc_id"].get<std::string>();
    if (!root["label"].is_null()) g.label = root["label"].get<int>();
    g.seed = root["seed"].get<uint64_t>();

    for (const auto& nj : root["nodes"]) {
        GraphNode n;
        n.token_id = nj.at("token_id").get<int>();
        n.bbox = bbox_from(nj.at("bbox"), "node bbox");
        n.para_bbox = bbox_from(nj.at("para_bbox"), "node para_bbox");
        n.read_index = nj.at("read_index").get<int>();
        n.type_id = nj.at("type_id").get<int>();
        g.nodes.push_back(n);
    }
    for (const auto& ej : root["edges"]) {
        Edge e;
        e.src = ej.at("src").get<int>();
        e.dst = ej.at("dst").get<int>();
        e.kind = edge_kind_from_name(ej.at("kind").get<std::string>());
        const json& fe = ej.at("features");
        if (!fe.is_array() || fe.size() != kEdgeFeatureDim)
            throw DataError("graph json: edge features must have " + std::to_string(kEdgeFeatureDim) +
                            " entries");
        for (int i = 0; i < kEdgeFeatureDim; ++i) e.features[static_cast<size_t>(i)] = fe[static_cast<size_t>(i)].get<double>();
        g.edges.push_back(e);
    }
    if (g.nodes.empty()) throw DataError("graph json: no nodes");
    return g;
}

}  // namespace gvdoc
