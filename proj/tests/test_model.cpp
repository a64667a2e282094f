#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gvdoc/document.hpp"
#include "gvdoc/errors.hpp"
#include "gvdoc/graph.hpp"
#include "gvdoc/model.hpp"
#include "gvdoc/rng.hpp"
#include "gvdoc/tape.hpp"

using namespace gvdoc;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.d = 8;
    cfg.fusion_heads = 2;
    cfg.gat_layers = 2;
    cfg.gat_heads = 2;
    cfg.vocab_size = 32;
    cfg.n_classes = 3;
    cfg.cpp_grid = 2;
    cfg.bbox_bins = 10;
    cfg.max_pos = 4;
    cfg.max_tokens = 64;
    return cfg;
}

Document make_doc(const std::vector<std::vector<BBox>>& paras) {
    Document doc;
    doc.id = "hand";
    doc.page_width = 1.0;
    doc.page_height = 1.0;
    int read = 0;
    for (size_t p = 0; p < paras.size(); ++p) {
        Paragraph par;
        par.first_token = read;
        BBox u = paras[p].front();
        for (const BBox& b : paras[p]) {
            Token t;
            t.text = "w" + std::to_string(read);
            t.bbox = b;
            t.read_index = read;
            t.para_index = static_cast<int>(p);
            t.token_id = Vocab::kReserved + (read % 20);
            doc.tokens.push_back(t);
            u = u.united(b);
            ++read;
        }
        par.last_token = read - 1;
        par.bbox = u;
        doc.paragraphs.push_back(par);
    }
    doc.validate();
    return doc;
}

Document random_doc(Rng& rng, int max_tokens_per_para = 3) {
    int n_paras = rng.range_int(1, 2);
    std::vector<std::vector<BBox>> paras;
    for (int p = 0; p < n_paras; ++p) {
        int n = rng.range_int(1, max_tokens_per_para);
        std::vector<BBox> boxes;
        for (int i = 0; i < n; ++i) {
            double x = rng.uniform(0.0, 0.8), y = 0.1 + 0.4 * p + rng.uniform(0.0, 0.2);
            boxes.push_back(BBox{x, y, x + rng.uniform(0.02, 0.15), y + rng.uniform(0.01, 0.05)});
        }
        paras.push_back(boxes);
    }
    return make_doc(paras);
}

// Plain-loop matrix product of value rows against a parameter, for expected
// values computed outside the tape.
std::vector<double> matvec_row(const Tensor& m, const double* x, int64_t dim_in) {
    std::vector<double> out(static_cast<size_t>(m.n_cols), 0.0);
    for (int64_t i = 0; i < dim_in; ++i)
        for (int64_t j = 0; j < m.n_cols; ++j)
            out[static_cast<size_t>(j)] += x[i] * m.at(i, j);
    return out;
}

const Tensor& param_named(const GraphModel& m, const std::string& name) {
    int i = m.params().index_of(name);
    REQUIRE(i >= 0);
    return m.params().value(i);
}

Tensor& param_named(GraphModel& m, const std::string& name) {
    int i = m.params().index_of(name);
    REQUIRE(i >= 0);
    return m.params().value(i);
}

// Undirected neighborhoods including self, matching the fusion contract.
std::vector<std::vector<int>> neighborhoods(const DocumentGraph& g) {
    std::vector<std::set<int>> nbr(static_cast<size_t>(g.node_count()));
    for (const Edge& e : g.edges) nbr[static_cast<size_t>(e.dst)].insert(e.src);
    for (int i = 0; i < g.node_count(); ++i) nbr[static_cast<size_t>(i)].insert(i);
    std::vector<std::vector<int>> out;
    for (auto& s : nbr) out.emplace_back(s.begin(), s.end());
    return out;
}

}  // namespace

TEST_CASE("quantize_coord maps [0,1] onto bins+1 lookup rows") {
    CHECK(quantize_coord(0.0, 1000) == 0);
    CHECK(quantize_coord(0.1234, 1000) == 123);
    CHECK(quantize_coord(0.9999, 1000) == 999);
    CHECK(quantize_coord(1.0, 1000) == 1000);
    CHECK(quantize_coord(-0.5, 1000) == 0);   // clamped
    CHECK(quantize_coord(1.5, 1000) == 1000); // clamped
    CHECK(quantize_coord(0.5, 10) == 5);
}

TEST_CASE("page_cell is the row-major grid cell of the box center") {
    auto at = [](double cx, double cy) {
        return BBox{cx - 0.01, cy - 0.01, cx + 0.01, cy + 0.01};
    };
    CHECK(page_cell(at(0.6, 0.1), 4) == 2);
    CHECK(page_cell(at(0.1, 0.6), 4) == 8);
    CHECK(page_cell(BBox{0.98, 0.98, 1.0, 1.0}, 4) == 15);  // clamped to the last cell
    CHECK(page_cell(BBox{0.0, 0.0, 0.01, 0.01}, 4) == 0);
    CHECK(page_cell(at(0.5, 0.5), 1) == 0);
}

TEST_CASE("config validation rejects head counts that do not divide d") {
    ModelConfig cfg = tiny_config();
    cfg.fusion_heads = 3;
    CHECK_THROWS_AS(GraphModel{cfg}, InvariantError);
    cfg = tiny_config();
    cfg.gat_heads = 5;
    CHECK_THROWS_AS(GraphModel{cfg}, InvariantError);
    cfg = tiny_config();
    cfg.n_classes = 1;
    CHECK_THROWS_AS(GraphModel{cfg}, InvariantError);
}

TEST_CASE("text embedding sums token, type, and clamped position rows") {
    ModelConfig cfg = tiny_config();
    GraphModel model(cfg);  // all zeros

    // Distinct per-row, per-column fill so any index mixup shows up.
    auto fill = [&](const std::string& name, double base) {
        Tensor& t = param_named(model, name);
        for (int64_t r = 0; r < t.n_rows; ++r)
            for (int64_t c = 0; c < t.n_cols; ++c) t.at(r, c) = base + static_cast<double>(r) + 0.5 * static_cast<double>(c);
    };
    fill("embed.token", 0.0);
    fill("embed.type", 100.0);
    fill("embed.pos", 200.0);

    // Six tokens in one paragraph: reads 3..5 clamp to max_pos = 4.
    std::vector<BBox> boxes;
    for (int i = 0; i < 6; ++i) boxes.push_back(BBox{0.02 + 0.15 * i, 0.4, 0.1 + 0.15 * i, 0.45});
    Document doc = make_doc({boxes});
    DocumentGraph g = build_graph(doc, GraphConfig{}, 0);

    Tape tape(false);
    auto out = model.forward(tape, g, HeadSelect{});
    const Tensor& te = tape.value(out.text_embeddings);
    REQUIRE(te.n_rows == 7);
    REQUIRE(te.n_cols == cfg.d);

    auto row_of = [&](int token_id, int type, int pos, int col) {
        return (token_id + 0.5 * col) + (100.0 + type + 0.5 * col) + (200.0 + pos + 0.5 * col);
    };
    for (int c = 0; c < cfg.d; ++c) {
        CHECK(te.at(0, c) == row_of(Vocab::kSup, 1, 0, c));  // super node
        for (int i = 0; i < 6; ++i) {
            int pos = std::min(i + 1, cfg.max_pos);
            CHECK(te.at(i + 1, c) == row_of(doc.tokens[static_cast<size_t>(i)].token_id, 0, pos, c));
        }
    }
}

TEST_CASE("layout embedding sums quantized coordinate rows through the projection") {
    ModelConfig cfg = tiny_config();
    GraphModel model(cfg);

    // Token tables: row q contributes q in every column. Paragraph tables:
    // row q contributes 1000*q. Projection = [I; I] so the output is the
    // sum of both parts; bias adds 0.25 per column index.
    for (const char* axis : {"x1", "y1", "x2", "y2"}) {
        Tensor& tb = param_named(model, std::string("embed.tbox_") + axis);
        Tensor& pb = param_named(model, std::string("embed.pbox_") + axis);
        for (int64_t r = 0; r < tb.n_rows; ++r)
            for (int64_t c = 0; c < tb.n_cols; ++c) {
                tb.at(r, c) = static_cast<double>(r);
                pb.at(r, c) = 1000.0 * static_cast<double>(r);
            }
    }
    Tensor& w = param_named(model, "embed.layout_w");
    for (int i = 0; i < cfg.d; ++i) {
        w.at(i, i) = 1.0;
        w.at(cfg.d + i, i) = 1.0;
    }
    Tensor& b = param_named(model, "embed.layout_b");
    for (int c = 0; c < cfg.d; ++c) b.at(0, c) = 0.25 * c;

    // One token at (0.1, 0.2, 0.3, 0.4) in a paragraph of the same box.
    Document doc = make_doc({{BBox{0.1, 0.2, 0.3, 0.4}}});
    DocumentGraph g = build_graph(doc, GraphConfig{}, 0);

    Tape tape(false);
    auto out = model.forward(tape, g, HeadSelect{});
    const Tensor& le = tape.value(out.layout_embeddings);
    REQUIRE(le.n_rows == 2);

    // bins = 10: token rows 1+2+3+4 = 10, paragraph identical; super node is
    // the page box, rows 0+0+10+10 = 20 on both tables.
    for (int c = 0; c < cfg.d; ++c) {
        CHECK(le.at(0, c) == doctest::Approx(20.0 + 20000.0 + 0.25 * c).epsilon(1e-12));
        CHECK(le.at(1, c) == doctest::Approx(10.0 + 10000.0 + 0.25 * c).epsilon(1e-12));
    }
}

TEST_CASE("fusion matches a plain-loop evaluation of the attention equations") {
    for (bool softmax_mode : {true, false}) {
        CAPTURE(softmax_mode);
        Rng rng(softmax_mode ? 0xF051u : 0xF052u);
        for (int trial = 0; trial < 20; ++trial) {
            ModelConfig cfg = tiny_config();
            cfg.fusion_softmax = softmax_mode;
            GraphModel model = GraphModel::random_init(cfg, 1000 + static_cast<uint64_t>(trial));
            Document doc = random_doc(rng);
            DocumentGraph g = build_graph(doc, GraphConfig{}, 0);
            REQUIRE(g.node_count() <= 7);

            Tape tape(false);
            auto out = model.forward(tape, g, HeadSelect{});
            const Tensor& text = tape.value(out.text_embeddings);
            const Tensor& lay = tape.value(out.layout_embeddings);
            const Tensor& fused = tape.value(out.fused_embeddings);

            const int dk = cfg.fusion_dk();
            const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
            auto nbrs = neighborhoods(g);

            for (int i = 0; i < g.node_count(); ++i) {
                std::vector<double> want;
                for (int h = 0; h < cfg.fusion_heads; ++h) {
                    std::string base = "fusion.h" + std::to_string(h) + ".";
                    auto proj = [&](const Tensor& src, int row, const char* name) {
                        return matvec_row(param_named(model, base + name), src.row(row), cfg.d);
                    };
                    auto qt = proj(text, i, "tq");
                    auto ql = proj(lay, i, "lq");

                    const auto& ns = nbrs[static_cast<size_t>(i)];
                    std::vector<double> at, al;
                    for (int j : ns) {
                        auto kl = proj(lay, j, "lk");
                        auto kt = proj(text, j, "tk");
                        double st = 0.0, sl = 0.0;
                        for (int c = 0; c < dk; ++c) {
                            st += qt[static_cast<size_t>(c)] * kl[static_cast<size_t>(c)];
                            sl += ql[static_cast<size_t>(c)] * kt[static_cast<size_t>(c)];
                        }
                        at.push_back(st * inv_sqrt);
                        al.push_back(sl * inv_sqrt);
                    }
                    if (softmax_mode) {
                        auto softmax = [](std::vector<double>& v) {
                            double mx = *std::max_element(v.begin(), v.end());
                            double z = 0.0;
                            for (double& x : v) z += (x = std::exp(x - mx));
                            for (double& x : v) x /= z;
                        };
                        softmax(at);
                        softmax(al);
                    }
                    std::vector<double> head(static_cast<size_t>(dk), 0.0);
                    for (size_t jj = 0; jj < ns.size(); ++jj) {
                        auto vl = proj(lay, ns[jj], "lv");
                        auto vt = proj(text, ns[jj], "tv");
                        for (int c = 0; c < dk; ++c)
                            head[static_cast<size_t>(c)] +=
                                at[jj] * vl[static_cast<size_t>(c)] + al[jj] * vt[static_cast<size_t>(c)];
                    }
                    want.insert(want.end(), head.begin(), head.end());
                }
                for (int c = 0; c < cfg.d; ++c)
                    CHECK(std::fabs(fused.at(i, c) - want[static_cast<size_t>(c)]) < 1e-10);
            }
        }
    }
}

TEST_CASE("fusion with zero projections is exactly zero") {
    ModelConfig cfg = tiny_config();
    GraphModel model(cfg);
    // Give the embeddings nonzero content; fusion weights stay zero.
    Tensor& tok = param_named(model, "embed.token");
    for (double& v : tok.data) v = 0.5;

    Document doc = make_doc({{BBox{0.1, 0.1, 0.2, 0.2}, BBox{0.3, 0.1, 0.4, 0.2}}});
    DocumentGraph g = build_graph(doc, GraphConfig{}, 0);
    Tape tape(false);
    auto out = model.forward(tape, g, HeadSelect::classifier());
    for (double v : tape.value(out.fused_embeddings).data) CHECK(v == 0.0);
    for (double v : tape.value(out.class_logits).data) CHECK(v == 0.0);
}

TEST_CASE("gat on a single self-looped node reduces to one closed-form step") {
    ModelConfig cfg = tiny_config();
    cfg.gat_layers = 1;
    GraphModel model = GraphModel::random_init(cfg, 99);

    DocumentGraph g;
    g.doc_id = "solo";
    const BBox page{0, 0, 1, 1};
    g.nodes.push_back(GraphNode{Vocab::kSup, page, page, 0, 1});
    Edge self;
    self.src = 0;
    self.dst = 0;
    self.kind = EdgeKind::Self;
    self.features = edge_features(page, page);
    g.edges.push_back(self);

    Tape tape(false);
    auto out = model.forward(tape, g, HeadSelect{});
    const Tensor& fused = tape.value(out.fused_embeddings);
    const Tensor& final = tape.value(out.node_embeddings);

    // Sole neighbor -> attention weight exactly 1, so the update is
    // h + concat_heads(W_h h + W_e (edge_proj f)).
    Tensor feats(1, kEdgeFeatureDim);
    std::copy(self.features.begin(), self.features.end(), feats.row(0));
    auto eproj = matvec_row(param_named(model, "gat.edge_proj"), feats.row(0), kEdgeFeatureDim);

    std::vector<double> want;
    for (int h = 0; h < cfg.gat_heads; ++h) {
        std::string base = "gat.l0.h" + std::to_string(h) + ".";
        auto wh = matvec_row(param_named(model, base + "node_w"), fused.row(0), cfg.d);
        auto eh = matvec_row(param_named(model, base + "edge_w"), eproj.data(), cfg.d);
        for (int c = 0; c < cfg.gat_dk(); ++c)
            want.push_back(wh[static_cast<size_t>(c)] + eh[static_cast<size_t>(c)]);
    }
    for (int c = 0; c < cfg.d; ++c)
        CHECK(std::fabs(final.at(0, c) - (fused.at(0, c) + want[static_cast<size_t>(c)])) < 1e-12);
}

TEST_CASE("attention rows sum to one across layers and heads") {
    Rng rng(0xA77);
    for (int trial = 0; trial < 5; ++trial) {
        GraphModel model = GraphModel::random_init(tiny_config(), 7 + static_cast<uint64_t>(trial));
        Document doc = random_doc(rng, 5);
        DocumentGraph g = build_graph(doc, GraphConfig{}, 0);
        Tape tape(false);
        ForwardDiag diag;
        model.forward(tape, g, HeadSelect::classifier(), &diag);
        CHECK(diag.max_attention_row_sum_err <= 1e-9);
    }
}

TEST_CASE("a node wired only to itself ignores edits elsewhere") {
    ModelConfig cfg = tiny_config();
    GraphModel model = GraphModel::random_init(cfg, 123);

    Document doc = make_doc({{BBox{0.1, 0.1, 0.2, 0.15}, BBox{0.3, 0.1, 0.4, 0.15},
                              BBox{0.5, 0.1, 0.6, 0.15}}});
    DocumentGraph g = build_graph(doc, GraphConfig{}, 0);

    // Strip node 2 down to its self loop; the rest of the graph keeps its
    // wiring. The model never rechecks connectivity.
    DocumentGraph cut = g;
    cut.edges.clear();
    for (const Edge& e : g.edges)
        if ((e.src != 2 && e.dst != 2) || (e.src == 2 && e.dst == 2)) cut.edges.push_back(e);

    Tape t1(false);
    auto r1 = model.forward(t1, cut, HeadSelect{});
    Tensor before_iso(1, cfg.d), before_other(1, cfg.d);
    for (int c = 0; c < cfg.d; ++c) {
        before_iso.at(0, c) = t1.value(r1.node_embeddings).at(2, c);
        before_other.at(0, c) = t1.value(r1.node_embeddings).at(1, c);
    }

    DocumentGraph edited = cut;
    edited.nodes[1].token_id = Vocab::kReserved + 19;  // different word elsewhere
    edited.nodes[3].token_id = Vocab::kReserved + 18;
    Tape t2(false);
    auto r2 = model.forward(t2, edited, HeadSelect{});

    bool other_changed = false;
    for (int c = 0; c < cfg.d; ++c) {
        CHECK(t2.value(r2.node_embeddings).at(2, c) == before_iso.at(0, c));  // bitwise
        if (t2.value(r2.node_embeddings).at(1, c) != before_other.at(0, c)) other_changed = true;
    }
    CHECK(other_changed);
}

TEST_CASE("head selection controls which logits are materialized") {
    ModelConfig cfg = tiny_config();
    GraphModel model = GraphModel::random_init(cfg, 5);
    Document doc = make_doc({{BBox{0.1, 0.1, 0.2, 0.15}, BBox{0.3, 0.1, 0.4, 0.15}}});
    DocumentGraph g = build_graph(doc, GraphConfig{}, 0);

    Tape tape(false);
    auto all = model.forward(tape, g, HeadSelect::everything(g));
    CHECK(tape.value(all.class_logits).n_rows == 1);
    CHECK(tape.value(all.class_logits).n_cols == cfg.n_classes);
    CHECK(tape.value(all.mlm_logits).n_rows == 2);
    CHECK(tape.value(all.mlm_logits).n_cols == cfg.vocab_size);
    CHECK(tape.value(all.mpm_pred).n_rows == 2);
    CHECK(tape.value(all.mpm_pred).n_cols == 4);
    CHECK(tape.value(all.cpp_logits).n_rows == 2);
    CHECK(tape.value(all.cpp_logits).n_cols == cfg.cpp_grid * cfg.cpp_grid);

    // The class readout is the super-node row through the linear head.
    const Tensor& h = tape.value(all.node_embeddings);
    auto want = matvec_row(param_named(model, "head.class_w"), h.row(0), cfg.d);
    const Tensor& bias = param_named(model, "head.class_b");
    for (int c = 0; c < cfg.n_classes; ++c)
        CHECK(std::fabs(tape.value(all.class_logits).at(0, c) -
                        (want[static_cast<size_t>(c)] + bias.at(0, c))) < 1e-12);

    Tape bare_tape;
    auto bare = model.forward(bare_tape, g, HeadSelect{});
    CHECK(!bare.class_logits.valid());
    CHECK(!bare.mlm_logits.valid());
    CHECK(!bare.mpm_pred.valid());
    CHECK(!bare.cpp_logits.valid());
}

TEST_CASE("forward is bitwise deterministic") {
    GraphModel model = GraphModel::random_init(tiny_config(), 77);
    Rng rng(0xDE7);
    Document doc = random_doc(rng, 4);
    DocumentGraph g = build_graph(doc, GraphConfig{}, 3);

    Tape t1(false), t2(false);
    auto r1 = model.forward(t1, g, HeadSelect::everything(g));
    auto r2 = model.forward(t2, g, HeadSelect::everything(g));
    CHECK(t1.value(r1.node_embeddings) == t2.value(r2.node_embeddings));
    CHECK(t1.value(r1.class_logits) == t2.value(r2.class_logits));
    CHECK(t1.value(r1.mlm_logits) == t2.value(r2.mlm_logits));
}

TEST_CASE("out-of-range token ids are rejected at the embedding boundary") {
    GraphModel model(tiny_config());
    Document doc = make_doc({{BBox{0.1, 0.1, 0.2, 0.15}}});
    DocumentGraph g = build_graph(doc, GraphConfig{}, 0);
    g.nodes[1].token_id = 32;  // == vocab_size
    Tape tape(false);
    CHECK_THROWS_AS(model.forward(tape, g, HeadSelect{}), InvariantError);
}
