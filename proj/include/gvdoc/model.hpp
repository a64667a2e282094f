#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gvdoc/graph.hpp"
#include "gvdoc/tape.hpp"

namespace gvdoc {

struct ModelConfig {
    int d = 64;
    int fusion_heads = 4;
    bool fusion_softmax = true;  // raw mode (false) uses unnormalized scores
    int gat_layers = 4;
    int gat_heads = 4;
    double leaky_slope = 0.2;
    int vocab_size = 8192;
    int n_classes = 4;
    int cpp_grid = 4;     // K: the position head predicts one of K*K page cells
    int bbox_bins = 1000; // coordinate lookup tables have bbox_bins+1 rows
    int max_pos = 512;
    int max_tokens = 512;

    int fusion_dk() const { return d / fusion_heads; }
    int gat_dk() const { return d / gat_heads; }
    void validate() const;
};

// Coordinate value in [0,1] -> lookup row in [0, bins].
int quantize_coord(double c, int bins);

// Page cell of a box center: row-major index on a grid x K grid.
int page_cell(const BBox& bbox, int grid);

// Named parameter tensors in fixed registration order. Tables (embedding
// lookups) get sparse row gradients on the tape; the rest dense gradients.
struct ParamStore {
    struct Entry {
        std::string name;
        Tensor value;
        bool is_table = false;
    };
    std::vector<Entry> entries;
    std::unordered_map<std::string, int> by_name;

    int add(const std::string& name, Tensor value, bool is_table = false);
    int index_of(const std::string& name) const;  // -1 when absent
    int count() const { return static_cast<int>(entries.size()); }
    Tensor& value(int i) { return entries[static_cast<size_t>(i)].value; }
    const Tensor& value(int i) const { return entries[static_cast<size_t>(i)].value; }
};

// Which outputs to materialize. Row lists hold node indices (0 = super node).
struct HeadSelect {
    bool cls = false;
    std::vector<int> mlm_nodes;
    std::vector<int> mpm_nodes;
    bool cpp_all_tokens = false;

    static HeadSelect classifier() {
        HeadSelect s;
        s.cls = true;
        return s;
    }
    static HeadSelect everything(const DocumentGraph& g);
};

struct ForwardResult {
    Var node_embeddings;  // n_nodes x d, final GAT output
    Var text_embeddings;  // n_nodes x d
    Var layout_embeddings;
    Var fused_embeddings;
    Var class_logits;  // 1 x n_classes (super-node readout)
    Var mlm_logits;    // |mlm_nodes| x vocab_size
    Var mpm_pred;      // |mpm_nodes| x 4
    Var cpp_logits;    // token_count x cpp_grid^2
};

struct ForwardDiag {
    double max_attention_row_sum_err = 0.0;  // max |sum - 1| over softmax rows
};

class GraphModel {
public:
    explicit GraphModel(ModelConfig cfg);  // zero-initialized parameters

    // Xavier-uniform matrices, zero biases, N(0, 0.02) embedding tables.
    static GraphModel random_init(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    ForwardResult forward(Tape& tape, const DocumentGraph& graph, const HeadSelect& select,
                          ForwardDiag* diag = nullptr) const;

private:
    Var embed_text(Tape& tape, const DocumentGraph& graph) const;
    Var embed_layout(Tape& tape, const DocumentGraph& graph) const;

    ModelConfig cfg_;
    ParamStore params_;

    int p_token_, p_type_, p_pos_;
    int p_tbox_[4], p_pbox_[4];
    int p_layout_w_, p_layout_b_;
    std::vector<std::array<int, 6>> p_fusion_;  // per head: tq, tk, tv, lq, lk, lv
    int p_edge_proj_;
    struct GatHead {
        int node_w, edge_w, attn;
    };
    std::vector<std::vector<GatHead>> p_gat_;  // [layer][head]
    int p_cls_w_, p_cls_b_, p_mlm_w_, p_mlm_b_, p_mpm_w_, p_mpm_b_, p_cpp_w_, p_cpp_b_;
};

}  // namespace gvdoc
