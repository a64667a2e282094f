#include <algorithm>
#include <map>
#include <set>

#include "gvdoc/errors.hpp"
#include "gvdoc/graph.hpp"

namespace gvdoc {
namespace {

// Blocker test for the candidate circle of boxes i, j: diameter is the
// segment joining the two centers; any third box touching the circle blocks
// the pair.
bool pair_admitted_scan(const std::vector<BBox>& boxes, int i, int j,
                        const std::vector<int>& candidates) {
    const BBox& a = boxes[static_cast<size_t>(i)];
    const BBox& b = boxes[static_cast<size_t>(j)];
    double cx = 0.5 * (a.cx() + b.cx());
    double cy = 0.5 * (a.cy() + b.cy());
    double r = 0.5 * center_distance(a, b);
    for (int k : candidates) {
        if (k == i || k == j) continue;
        if (box_intersects_circle(boxes[static_cast<size_t>(k)], cx, cy, r)) return false;
    }
    return true;
}

// Mutual top-k cap: every box ranks its admitted partners by center distance
// (ties to the lower index) and keeps max_neighbors of them; an edge survives
// only when both sides keep it.
std::vector<std::pair<int, int>> cap_and_symmetrize(
    int n, int max_neighbors, const std::vector<std::vector<int>>& admitted,
    const std::vector<BBox>& boxes) {
    std::vector<std::set<int>> kept(static_cast<size_t>(n));
    for (int u = 0; u < n; ++u) {
        std::vector<int> partners = admitted[static_cast<size_t>(u)];
        std::sort(partners.begin(), partners.end(), [&](int a, int b) {
            double da = center_distance(boxes[static_cast<size_t>(u)], boxes[static_cast<size_t>(a)]);
            double db = center_distance(boxes[static_cast<size_t>(u)], boxes[static_cast<size_t>(b)]);
            if (da != db) return da < db;
            return a < b;
        });
        if (static_cast<int>(partners.size()) > max_neighbors)
            partners.resize(static_cast<size_t>(max_neighbors));
        kept[static_cast<size_t>(u)].insert(partners.begin(), partners.end());
    }
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < n; ++u)
        for (int v : kept[static_cast<size_t>(u)])
            if (u < v && kept[static_cast<size_t>(v)].count(u)) out.emplace_back(u, v);
    std::sort(out.begin(), out.end());
    return out;
}

struct BlockerGrid {
    double x0 = 0, y0 = 0, cell = 1;
    int nx = 1, ny = 1;
    std::vector<std::vector<int>> bins;

    explicit BlockerGrid(const std::vector<BBox>& boxes) {
        BBox extent = boxes.front();
        std::vector<double> diags;
        diags.reserve(boxes.size());
        for (const BBox& b : boxes) {
            extent = extent.united(b);
            diags.push_back(b.diagonal());
        }
        std::nth_element(diags.begin(), diags.begin() + static_cast<long>(diags.size() / 2),
                         diags.end());
        double median = diags[diags.size() / 2];
        double span = std::max({extent.width(), extent.height(), 1e-9});
        cell = std::max(median, span / 256.0);  // floor keeps the grid bounded
        x0 = extent.x1;
        y0 = extent.y1;
        nx = std::max(1, static_cast<int>(extent.width() / cell) + 1);
        ny = std::max(1, static_cast<int>(extent.height() / cell) + 1);
        bins.resize(static_cast<size_t>(nx) * static_cast<size_t>(ny));
        for (int i = 0; i < static_cast<int>(boxes.size()); ++i) insert(i, boxes[static_cast<size_t>(i)]);
    }

    int clamp_x(double x) const {
        return std::clamp(static_cast<int>((x - x0) / cell), 0, nx - 1);
    }
    int clamp_y(double y) const {
        return std::clamp(static_cast<int>((y - y0) / cell), 0, ny - 1);
    }

    void insert(int idx, const BBox& b) {
        int cx1 = clamp_x(b.x1), cx2 = clamp_x(b.x2);
        int cy1 = clamp_y(b.y1), cy2 = clamp_y(b.y2);
        for (int gy = cy1; gy <= cy2; ++gy)
            for (int gx = cx1; gx <= cx2; ++gx)
                bins[static_cast<size_t>(gy) * static_cast<size_t>(nx) + static_cast<size_t>(gx)]
                    .push_back(idx);
    }

    // Every box overlapping the query rectangle is in some visited bin, so the
    // circle test stays exact. Dedup via stamp array.
    void collect(const BBox& q, std::vector<int>& out, std::vector<int>& stamp,
                 int generation) const {
        out.clear();
        int cx1 = clamp_x(q.x1), cx2 = clamp_x(q.x2);
        int cy1 = clamp_y(q.y1), cy2 = clamp_y(q.y2);
        for (int gy = cy1; gy <= cy2; ++gy)
            for (int gx = cx1; gx <= cx2; ++gx)
                for (int idx : bins[static_cast<size_t>(gy) * static_cast<size_t>(nx) +
                                    static_cast<size_t>(gx)]) {
                    if (stamp[static_cast<size_t>(idx)] == generation) continue;
                    stamp[static_cast<size_t>(idx)] = generation;
                    out.push_back(idx);
                }
    }
};

}  // namespace

std::vector<std::pair<int, int>> beta_skeleton_edges_brute(const std::vector<BBox>& boxes,
                                                           int max_neighbors) {
    require(max_neighbors >= 0, "max_neighbors must be non-negative");
    int n = static_cast<int>(boxes.size());
    std::vector<std::vector<int>> admitted(static_cast<size_t>(n));
    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (pair_admitted_scan(boxes, i, j, all)) {
                admitted[static_cast<size_t>(i)].push_back(j);
                admitted[static_cast<size_t>(j)].push_back(i);
            }
    return cap_and_symmetrize(n, max_neighbors, admitted, boxes);
}

std::vector<std::pair<int, int>> beta_skeleton_edges(const std::vector<BBox>& boxes,
                                                     int max_neighbors) {
    require(max_neighbors >= 0, "max_neighbors must be non-negative");
    int n = static_cast<int>(boxes.size());
    if (n < 2) return {};

    BlockerGrid grid(boxes);
    std::vector<std::vector<int>> admitted(static_cast<size_t>(n));
    std::vector<int> candidates;
    std::vector<int> stamp(static_cast<size_t>(n), -1);
    int generation = 0;
    for (int i = 0; i < n; ++i) {
        const BBox& a = boxes[static_cast<size_t>(i)];
        for (int j = i + 1; j < n; ++j) {
            const BBox& b = boxes[static_cast<size_t>(j)];
            double cx = 0.5 * (a.cx() + b.cx());
            double cy = 0.5 * (a.cy() + b.cy());
            double r = 0.5 * center_distance(a, b);
            grid.collect(BBox{cx - r, cy - r, cx + r, cy + r}, candidates, stamp, ++generation);
            if (pair_admitted_scan(boxes, i, j, candidates)) {
                admitted[static_cast<size_t>(i)].push_back(j);
                admitted[static_cast<size_t>(j)].push_back(i);
            }
        }
    }
    return cap_and_symmetrize(n, max_neighbors, admitted, boxes);
}

std::vector<std::pair<int, int>> paragraph_knn_edges(const Document& doc,
                                                     const std::vector<int>& k_per_token) {
    require(k_per_token.size() == doc.tokens.size(), "k_per_token size mismatch");
    std::set<std::pair<int, int>> pairs;
    for (const Paragraph& p : doc.paragraphs) {
        for (int u = p.first_token; u <= p.last_token; ++u) {
            int k = k_per_token[static_cast<size_t>(u)];
            require(k >= 1, "paragraph k must be >= 1");
            std::vector<int> others;
            for (int v = p.first_token; v <= p.last_token; ++v)
                if (v != u) others.push_back(v);
            std::sort(others.begin(), others.end(), [&](int a, int b) {
                int da = std::abs(a - u), db = std::abs(b - u);
                if (da != db) return da < db;
                return a < b;
            });
            if (static_cast<int>(others.size()) > k) others.resize(static_cast<size_t>(k));
            for (int v : others) pairs.emplace(std::min(u, v), std::max(u, v));
        }
    }
    return {pairs.begin(), pairs.end()};
}

std::vector<std::pair<int, int>> paragraph_link_edges(const Document& doc) {
    std::vector<std::pair<int, int>> out;
    for (size_t p = 0; p + 1 < doc.paragraphs.size(); ++p) {
        int u = doc.paragraphs[p].last_token;
        int v = doc.paragraphs[p + 1].first_token;
        out.emplace_back(std::min(u, v), std::max(u, v));
    }
    return out;
}

void GraphConfig::validate() const {
    require(max_beta_neighbors >= 1, "graph.max_beta_neighbors must be >= 1");
    require(para_k_test >= 1, "graph.para_k must be >= 1");
    require(para_k_train_min >= 1, "graph.para_k_train_min must be >= 1");
    require(para_k_train_min <= para_k_train_max,
            "graph.para_k_train_min must not exceed graph.para_k_train_max");
}

DocumentGraph build_graph(const Document& doc, const GraphConfig& cfg, uint64_t seed,
                          bool train_mode) {
    cfg.validate();
    doc.validate();
    require(doc.normalized(), "build_graph: document must be normalized first");
    for (const Token& t : doc.tokens)
        require(t.token_id >= 0, "build_graph: document must be tokenized first");

    DocumentGraph g;
    g.doc_id = doc.id;
    g.label = doc.label;
    g.seed = seed;

    const BBox page{0.0, 0.0, 1.0, 1.0};
    g.nodes.push_back(GraphNode{Vocab::kSup, page, page, 0, 1});
    for (const Token& t : doc.tokens) {
        const Paragraph& p = doc.paragraphs[static_cast<size_t>(t.para_index)];
        g.nodes.push_back(GraphNode{t.token_id, t.bbox, p.bbox, t.read_index, 0});
    }

    // Token pair -> kind, best (lowest-ranked) source wins: Beta < ParaKnn <
    // ParaLink. Keys are token indices; +1 shifts to node ids at emit time.
    std::map<std::pair<int, int>, EdgeKind> pair_kind;
    auto offer = [&](std::pair<int, int> pr, EdgeKind kind) {
        auto it = pair_kind.find(pr);
        if (it == pair_kind.end())
            pair_kind.emplace(pr, kind);
        else if (static_cast<int>(kind) < static_cast<int>(it->second))
            it->second = kind;
    };

    if (cfg.mode == GraphMode::Beta || cfg.mode == GraphMode::Both) {
        std::vector<BBox> boxes;
        boxes.reserve(doc.tokens.size());
        for (const Token& t : doc.tokens) boxes.push_back(t.bbox);
        for (auto pr : beta_skeleton_edges(boxes, cfg.max_beta_neighbors)) offer(pr, EdgeKind::Beta);
    }
    if (cfg.mode == GraphMode::Paragraph || cfg.mode == GraphMode::Both) {
        std::vector<int> k(doc.tokens.size(), cfg.para_k_test);
        if (train_mode) {
            Rng rng(seed);
            for (int& ku : k) ku = rng.range_int(cfg.para_k_train_min, cfg.para_k_train_max);
        }
        for (auto pr : paragraph_knn_edges(doc, k)) offer(pr, EdgeKind::ParaKnn);
    }
    for (auto pr : paragraph_link_edges(doc)) offer(pr, EdgeKind::ParaLink);

    auto emit_both = [&](int u, int v, EdgeKind kind) {
        Edge e;
        e.src = u;
        e.dst = v;
        e.kind = kind;
        e.features = edge_features(g.nodes[static_cast<size_t>(u)].bbox,
                                   g.nodes[static_cast<size_t>(v)].bbox);
        Edge back;
        back.src = v;
        back.dst = u;
        back.kind = kind;
        back.features = reverse_edge_features(e.features);
        g.edges.push_back(e);
        g.edges.push_back(back);
    };

    for (const auto& [pr, kind] : pair_kind) emit_both(pr.first + 1, pr.second + 1, kind);

    std::set<int> super_targets;
    for (const Paragraph& p : doc.paragraphs) {
        super_targets.insert(p.first_token + 1);
        super_targets.insert(p.last_token + 1);
    }
    for (int t : super_targets) emit_both(0, t, EdgeKind::Super);

    if (cfg.add_self_loops) {
        for (int u = 0; u < g.node_count(); ++u) {
            Edge e;
            e.src = u;
            e.dst = u;
            e.kind = EdgeKind::Self;
            e.features = edge_features(g.nodes[static_cast<size_t>(u)].bbox,
                                       g.nodes[static_cast<size_t>(u)].bbox);
            g.edges.push_back(e);
        }
    }

    std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
    });
    return g;
}

}  // namespace gvdoc
