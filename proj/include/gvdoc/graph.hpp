#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gvdoc/document.hpp"
#include "gvdoc/rng.hpp"

namespace gvdoc {

constexpr int kEdgeFeatureDim = 21;

enum class EdgeKind { Beta, ParaKnn, ParaLink, Super, Self };

const char* edge_kind_name(EdgeKind kind);
EdgeKind edge_kind_from_name(const std::string& name);

enum class GraphMode { Beta, Paragraph, Both };

const char* graph_mode_name(GraphMode mode);
GraphMode graph_mode_from_name(const std::string& name);

struct GraphConfig {
    GraphMode mode = GraphMode::Both;
    int max_beta_neighbors = 25;
    int para_k_test = 10;
    int para_k_train_min = 2;
    int para_k_train_max = 10;
    bool add_self_loops = true;

    void validate() const;
};

struct GraphNode {
    int token_id = -1;
    BBox bbox;       // token box; full page for the super node
    BBox para_bbox;  // owning paragraph box; full page for the super node
    int read_index = 0;
    int type_id = 0;  // 0 = token, 1 = super

    bool operator==(const GraphNode&) const = default;
};

struct Edge {
    int src = 0;
    int dst = 0;
    EdgeKind kind = EdgeKind::Beta;
    std::array<double, kEdgeFeatureDim> features{};

    bool operator==(const Edge&) const = default;
};

// Node 0 is the super node; token i of the document is node i+1. Edges are
// directed, symmetric (every (u,v) has a (v,u) with mirrored features), come
// deduplicated per ordered pair, and are sorted by (src, dst).
struct DocumentGraph {
    std::string doc_id;
    std::optional<int> label;
    uint64_t seed = 0;
    std::vector<GraphNode> nodes;
    std::vector<Edge> edges;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int token_count() const { return node_count() - 1; }

    bool operator==(const DocumentGraph&) const = default;
};

// Geometry features for the directed pair (a -> b): 16 corner-to-corner
// distances (TL,TR,BL,BR of a major, same order of b minor), center distance,
// |dcx|, |dcy|, then log height and width ratios clamped to [1e-2, 1e2] and
// scaled by 1/ln(100) into [-1, 1]. Degenerate extents are floored at 1e-6
// before the ratio.
std::array<double, kEdgeFeatureDim> edge_features(const BBox& a, const BBox& b);

// Features of (b -> a) derived from features of (a -> b): corner matrix
// transposed, distances kept, log ratios negated.
std::array<double, kEdgeFeatureDim> reverse_edge_features(
    const std::array<double, kEdgeFeatureDim>& f);

// Ball-of-sight skeleton over boxes. A pair is admitted when no third box
// touches the circle whose diameter is the segment between the two box
// centers. Each box then keeps its max_neighbors nearest admitted partners
// (ties to the lower index); the edge survives only if both endpoints keep
// each other, which caps every degree at max_neighbors. Returns pairs with
// first < second. Grid-accelerated, exact.
std::vector<std::pair<int, int>> beta_skeleton_edges(const std::vector<BBox>& boxes,
                                                     int max_neighbors);

// Same contract, O(n^3) reference implementation kept as a test oracle.
std::vector<std::pair<int, int>> beta_skeleton_edges_brute(const std::vector<BBox>& boxes,
                                                           int max_neighbors);

// Reading-order k-NN inside each paragraph. k_per_token[u] is the neighbor
// budget of token u (distance = |read index delta|, ties to the lower read
// index). Result is symmetrized and returned as token-index pairs (u < v).
std::vector<std::pair<int, int>> paragraph_knn_edges(const Document& doc,
                                                     const std::vector<int>& k_per_token);

// Last token of paragraph p to first token of paragraph p+1, as token pairs.
std::vector<std::pair<int, int>> paragraph_link_edges(const Document& doc);

// Full assembly. doc must be normalized, tokenized and truncated. Beta edges
// appear in modes beta/both, paragraph k-NN edges in modes paragraph/both;
// paragraph links, super-node edges and (optionally) self loops always. In
// train mode every token draws k uniformly from the configured range using
// rng seeded from `seed`; in eval mode k = para_k_test.
DocumentGraph build_graph(const Document& doc, const GraphConfig& cfg, uint64_t seed,
                          bool train_mode = false);

// Graph JSON round-trip (schema documented in serialize_graph_json).
std::string serialize_graph_json(const DocumentGraph& graph, const std::string& config_hash = "");
DocumentGraph parse_graph_json(const std::string& json_text);

}  // namespace gvdoc
