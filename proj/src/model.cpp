#include "gvdoc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gvdoc/errors.hpp"
#include "gvdoc/rng.hpp"

namespace gvdoc {

void ModelConfig::validate() const {
    require(d >= 1, "model.d must be >= 1");
    require(fusion_heads >= 1 && d % fusion_heads == 0, "model.fusion_heads must divide model.d");
    require(gat_heads >= 1 && d % gat_heads == 0, "model.gat_heads must divide model.d");
    require(gat_layers >= 1, "model.gat_layers must be >= 1");
    require(vocab_size > Vocab::kReserved, "model.vocab_size must exceed reserved ids");
    require(n_classes >= 2, "model.classes must be >= 2");
    require(cpp_grid >= 1, "model.cpp_grid must be >= 1");
    require(bbox_bins >= 1, "model.bbox_bins must be >= 1");
    require(max_pos >= 1, "model.max_pos must be >= 1");
    require(max_tokens >= 1, "model.max_tokens must be >= 1");
}

int quantize_coord(double c, int bins) {
    int q = static_cast<int>(std::floor(c * bins));
    return std::clamp(q, 0, bins);
}

int page_cell(const BBox& bbox, int grid) {
    int col = std::min(static_cast<int>(bbox.cx() * grid), grid - 1);
    int row = std::min(static_cast<int>(bbox.cy() * grid), grid - 1);
    return row * grid + col;
}

int ParamStore::add(const std::string& name, Tensor value, bool is_table) {
    require(by_name.find(name) == by_name.end(), "duplicate parameter name " + name);
    int id = count();
    entries.push_back(Entry{name, std::move(value), is_table});
    by_name.emplace(name, id);
    return id;
}

int ParamStore::index_of(const std::string& name) const {
    auto it = by_name.find(name);
    return it == by_name.end() ? -1 : it->second;
}

HeadSelect HeadSelect::everything(const DocumentGraph& g) {
    HeadSelect s;
    s.cls = true;
    s.cpp_all_tokens = true;
    for (int i = 1; i < g.node_count(); ++i) {
        s.mlm_nodes.push_back(i);
        s.mpm_nodes.push_back(i);
    }
    return s;
}

GraphModel::GraphModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int d = cfg_.d;
    const int fdk = cfg_.fusion_dk();
    const int gdk = cfg_.gat_dk();

    p_token_ = params_.add("embed.token", Tensor(cfg_.vocab_size, d), true);
    p_type_ = params_.add("embed.type", Tensor(2, d), true);
    p_pos_ = params_.add("embed.pos", Tensor(cfg_.max_pos + 1, d), true);
    const char* axes[4] = {"x1", "y1", "x2", "y2"};
    for (int a = 0; a < 4; ++a)
        p_tbox_[a] = params_.add(std::string("embed.tbox_") + axes[a],
                                 Tensor(cfg_.bbox_bins + 1, d), true);
    for (int a = 0; a < 4; ++a)
        p_pbox_[a] = params_.add(std::string("embed.pbox_") + axes[a],
                                 Tensor(cfg_.bbox_bins + 1, d), true);
    p_layout_w_ = params_.add("embed.layout_w", Tensor(2 * d, d));
    p_layout_b_ = params_.add("embed.layout_b", Tensor(1, d));

    for (int h = 0; h < cfg_.fusion_heads; ++h) {
        std::string base = "fusion.h" + std::to_string(h) + ".";
        p_fusion_.push_back({params_.add(base + "tq", Tensor(d, fdk)),
                             params_.add(base + "tk", Tensor(d, fdk)),
                             params_.add(base + "tv", Tensor(d, fdk)),
                             params_.add(base + "lq", Tensor(d, fdk)),
                             params_.add(base + "lk", Tensor(d, fdk)),
                             params_.add(base + "lv", Tensor(d, fdk))});
    }

    p_edge_proj_ = params_.add("gat.edge_proj", Tensor(kEdgeFeatureDim, d));
    for (int l = 0; l < cfg_.gat_layers; ++l) {
        std::vector<GatHead> heads;
        for (int h = 0; h < cfg_.gat_heads; ++h) {
            std::string base = "gat.l" + std::to_string(l) + ".h" + std::to_string(h) + ".";
            heads.push_back(GatHead{params_.add(base + "node_w", Tensor(d, gdk)),
                                    params_.add(base + "edge_w", Tensor(d, gdk)),
                                    params_.add(base + "attn", Tensor(3 * gdk, 1))});
        }
        p_gat_.push_back(std::move(heads));
    }

    p_cls_w_ = params_.add("head.class_w", Tensor(d, cfg_.n_classes));
    p_cls_b_ = params_.add("head.class_b", Tensor(1, cfg_.n_classes));
    p_mlm_w_ = params_.add("head.mlm_w", Tensor(d, cfg_.vocab_size));
    p_mlm_b_ = params_.add("head.mlm_b", Tensor(1, cfg_.vocab_size));
    p_mpm_w_ = params_.add("head.mpm_w", Tensor(d, 4));
    p_mpm_b_ = params_.add("head.mpm_b", Tensor(1, 4));
    p_cpp_w_ = params_.add("head.cpp_w", Tensor(d, cfg_.cpp_grid * cfg_.cpp_grid));
    p_cpp_b_ = params_.add("head.cpp_b", Tensor(1, cfg_.cpp_grid * cfg_.cpp_grid));
}

GraphModel GraphModel::random_init(ModelConfig cfg, uint64_t seed) {
    GraphModel m(std::move(cfg));
    Rng rng(seed);
    for (auto& e : m.params_.entries) {
        bool is_bias = e.value.n_rows == 1;
        if (e.is_table) {
            for (double& v : e.value.data) v = rng.normal(0.0, 0.02);
        } else if (is_bias) {
            // zeros
        } else {
            double limit = std::sqrt(6.0 / static_cast<double>(e.value.n_rows + e.value.n_cols));
            for (double& v : e.value.data) v = rng.uniform(-limit, limit);
        }
    }
    return m;
}

namespace {

// Message-passing index: edges regrouped by destination (CSR), plus the
// fusion neighborhoods (unique undirected adjacency with self always present).
struct GraphIndex {
    std::vector<int> e_src, e_dst;  // dst-major order
    Tensor feats;                   // E x 21 in the same order
    std::shared_ptr<std::vector<int>> e_off;
    std::vector<int> f_src, f_dst;
    std::shared_ptr<std::vector<int>> f_off;
};

GraphIndex build_index(const DocumentGraph& g) {
    GraphIndex ix;
    const int n = g.node_count();

    std::vector<int> order(g.edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const Edge& ea = g.edges[static_cast<size_t>(a)];
        const Edge& eb = g.edges[static_cast<size_t>(b)];
        return std::tie(ea.dst, ea.src) < std::tie(eb.dst, eb.src);
    });

    const int m = static_cast<int>(order.size());
    ix.e_src.reserve(static_cast<size_t>(m));
    ix.e_dst.reserve(static_cast<size_t>(m));
    ix.feats = Tensor(m, kEdgeFeatureDim);
    for (int r = 0; r < m; ++r) {
        const Edge& e = g.edges[static_cast<size_t>(order[static_cast<size_t>(r)])];
        require(e.src >= 0 && e.src < n && e.dst >= 0 && e.dst < n, "edge endpoint out of range");
        ix.e_src.push_back(e.src);
        ix.e_dst.push_back(e.dst);
        std::copy(e.features.begin(), e.features.end(), ix.feats.row(r));
    }
    ix.e_off = std::make_shared<std::vector<int>>(static_cast<size_t>(n) + 1, 0);
    for (int r = 0; r < m; ++r) ++(*ix.e_off)[static_cast<size_t>(ix.e_dst[static_cast<size_t>(r)]) + 1];
    for (int i = 0; i < n; ++i) (*ix.e_off)[static_cast<size_t>(i) + 1] += (*ix.e_off)[static_cast<size_t>(i)];

    // Fusion neighborhoods: graph neighbors of i plus i itself.
    std::vector<std::vector<int>> nbr(static_cast<size_t>(n));
    for (const Edge& e : g.edges) nbr[static_cast<size_t>(e.dst)].push_back(e.src);
    for (int i = 0; i < n; ++i) nbr[static_cast<size_t>(i)].push_back(i);
    ix.f_off = std::make_shared<std::vector<int>>();
    ix.f_off->push_back(0);
    for (int i = 0; i < n; ++i) {
        auto& v = nbr[static_cast<size_t>(i)];
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        for (int j : v) {
            ix.f_dst.push_back(i);
            ix.f_src.push_back(j);
        }
        ix.f_off->push_back(static_cast<int>(ix.f_dst.size()));
    }
    return ix;
}

void note_row_sums(const Tensor& probs, const std::vector<int>& offsets, ForwardDiag* diag) {
    if (diag == nullptr) return;
    for (size_t s = 0; s + 1 < offsets.size(); ++s) {
        if (offsets[s] == offsets[s + 1]) continue;
        double sum = 0.0;
        for (int i = offsets[s]; i < offsets[s + 1]; ++i) sum += probs.data[static_cast<size_t>(i)];
        diag->max_attention_row_sum_err =
            std::max(diag->max_attention_row_sum_err, std::fabs(sum - 1.0));
    }
}

}  // namespace

Var GraphModel::embed_text(Tape& tape, const DocumentGraph& graph) const {
    tape.set_context("text embedding");
    std::vector<int> ids, types, pos;
    for (const GraphNode& n : graph.nodes) {
        require(n.token_id >= 0 && n.token_id < cfg_.vocab_size,
                "token id out of vocabulary range");
        ids.push_back(n.token_id);
        types.push_back(n.type_id == 1 ? 1 : 0);
        pos.push_back(n.type_id == 1 ? 0 : std::min(n.read_index + 1, cfg_.max_pos));
    }
    Var tok = tape.gather_rows(tape.table_param(params_.value(p_token_), p_token_), ids);
    Var typ = tape.gather_rows(tape.table_param(params_.value(p_type_), p_type_), types);
    Var pe = tape.gather_rows(tape.table_param(params_.value(p_pos_), p_pos_), pos);
    return tape.add(tape.add(tok, typ), pe);
}

Var GraphModel::embed_layout(Tape& tape, const DocumentGraph& graph) const {
    tape.set_context("layout embedding");
    auto coord_sum = [&](const int pids[4], auto box_of) {
        Var acc;
        for (int a = 0; a < 4; ++a) {
            std::vector<int> q;
            q.reserve(graph.nodes.size());
            for (const GraphNode& n : graph.nodes) {
                const BBox& b = box_of(n);
                double c = a == 0 ? b.x1 : a == 1 ? b.y1 : a == 2 ? b.x2 : b.y2;
                q.push_back(quantize_coord(c, cfg_.bbox_bins));
            }
            Var part = tape.gather_rows(tape.table_param(params_.value(pids[a]), pids[a]), q);
            acc = a == 0 ? part : tape.add(acc, part);
        }
        return acc;
    };
    Var token_part = coord_sum(p_tbox_, [](const GraphNode& n) -> const BBox& { return n.bbox; });
    Var para_part = coord_sum(p_pbox_, [](const GraphNode& n) -> const BBox& { return n.para_bbox; });
    Var cat = tape.concat_cols({token_part, para_part});
    Var w = tape.param(params_.value(p_layout_w_), p_layout_w_);
    Var b = tape.param(params_.value(p_layout_b_), p_layout_b_);
    return tape.add_rowvec(tape.matmul(cat, w), b);
}

ForwardResult GraphModel::forward(Tape& tape, const DocumentGraph& graph,
                                  const HeadSelect& select, ForwardDiag* diag) const {
    require(graph.node_count() >= 1, "forward: empty graph");
    GraphIndex ix = build_index(graph);

    ForwardResult out;
    out.text_embeddings = embed_text(tape, graph);
    out.layout_embeddings = embed_layout(tape, graph);

    // Cross-modal fusion: per head, text queries attend over layout keys to
    // gather layout values, and vice versa, within the graph neighborhood.
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.fusion_dk()));
    std::vector<Var> head_outs;
    for (int h = 0; h < cfg_.fusion_heads; ++h) {
        tape.set_context("fusion head " + std::to_string(h));
        const auto& pf = p_fusion_[static_cast<size_t>(h)];
        auto proj = [&](Var x, int pid) { return tape.matmul(x, tape.param(params_.value(pid), pid)); };
        Var qt = proj(out.text_embeddings, pf[0]);
        Var kt = proj(out.text_embeddings, pf[1]);
        Var vt = proj(out.text_embeddings, pf[2]);
        Var ql = proj(out.layout_embeddings, pf[3]);
        Var kl = proj(out.layout_embeddings, pf[4]);
        Var vl = proj(out.layout_embeddings, pf[5]);

        Var at = tape.scale(tape.row_dot(tape.gather_rows(qt, ix.f_dst), tape.gather_rows(kl, ix.f_src)),
                            inv_sqrt_dk);
        Var al = tape.scale(tape.row_dot(tape.gather_rows(ql, ix.f_dst), tape.gather_rows(kt, ix.f_src)),
                            inv_sqrt_dk);
        if (cfg_.fusion_softmax) {
            at = tape.segment_softmax(at, ix.f_off);
            al = tape.segment_softmax(al, ix.f_off);
            note_row_sums(tape.value(at), *ix.f_off, diag);
            note_row_sums(tape.value(al), *ix.f_off, diag);
        }
        Var msg = tape.add(tape.scale_rows(tape.gather_rows(vl, ix.f_src), at),
                           tape.scale_rows(tape.gather_rows(vt, ix.f_src), al));
        head_outs.push_back(tape.segment_sum_rows(msg, ix.f_off));
    }
    out.fused_embeddings =
        head_outs.size() == 1 ? head_outs.front() : tape.concat_cols(head_outs);

    // GAT stack over the fused embeddings with per-edge geometry features.
    tape.set_context("gat edge projection");
    Var efeat = tape.constant(ix.feats);
    Var eproj = tape.matmul(efeat, tape.param(params_.value(p_edge_proj_), p_edge_proj_));

    Var h_cur = out.fused_embeddings;
    for (int l = 0; l < cfg_.gat_layers; ++l) {
        std::vector<Var> gat_outs;
        for (int h = 0; h < cfg_.gat_heads; ++h) {
            tape.set_context("gat layer " + std::to_string(l) + " head " + std::to_string(h));
            const GatHead& ph = p_gat_[static_cast<size_t>(l)][static_cast<size_t>(h)];
            Var wh = tape.matmul(h_cur, tape.param(params_.value(ph.node_w), ph.node_w));
            Var eh = tape.matmul(eproj, tape.param(params_.value(ph.edge_w), ph.edge_w));
            Var wh_dst = tape.gather_rows(wh, ix.e_dst);
            Var wh_src = tape.gather_rows(wh, ix.e_src);
            Var cat = tape.concat_cols({wh_dst, wh_src, eh});
            Var logit = tape.leaky_relu(
                tape.matmul(cat, tape.param(params_.value(ph.attn), ph.attn)), cfg_.leaky_slope);
            Var attn = tape.segment_softmax(logit, ix.e_off);
            note_row_sums(tape.value(attn), *ix.e_off, diag);
            Var msg = tape.scale_rows(tape.add(wh_src, eh), attn);
            gat_outs.push_back(tape.segment_sum_rows(msg, ix.e_off));
        }
        Var agg = gat_outs.size() == 1 ? gat_outs.front() : tape.concat_cols(gat_outs);
        if (l + 1 < cfg_.gat_layers) agg = tape.elu(agg);
        h_cur = tape.add(h_cur, agg);  // residual
    }
    out.node_embeddings = h_cur;

    auto linear_head = [&](const std::vector<int>& rows, int wid, int bid, const char* what) {
        tape.set_context(what);
        Var x = tape.gather_rows(h_cur, rows);
        return tape.add_rowvec(tape.matmul(x, tape.param(params_.value(wid), wid)),
                               tape.param(params_.value(bid), bid));
    };

    if (select.cls) out.class_logits = linear_head({0}, p_cls_w_, p_cls_b_, "classification head");
    if (!select.mlm_nodes.empty())
        out.mlm_logits = linear_head(select.mlm_nodes, p_mlm_w_, p_mlm_b_, "token head");
    if (!select.mpm_nodes.empty())
        out.mpm_pred = linear_head(select.mpm_nodes, p_mpm_w_, p_mpm_b_, "box head");
    if (select.cpp_all_tokens) {
        std::vector<int> all_tokens;
        for (int i = 1; i < graph.node_count(); ++i) all_tokens.push_back(i);
        require(!all_tokens.empty(), "forward: graph has no token nodes");
        out.cpp_logits = linear_head(all_tokens, p_cpp_w_, p_cpp_b_, "cell head");
    }
    return out;
}

}  // namespace gvdoc
