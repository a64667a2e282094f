#include "gvdoc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "gvdoc/errors.hpp"
#include "gvdoc/eval.hpp"
#include "gvdoc/hashing.hpp"
#include "gvdoc/parallel.hpp"

namespace gvdoc {

int mask_count(int n_tokens, double rate) {
    require(n_tokens >= 0 && rate >= 0.0 && rate <= 1.0, "mask_count: bad arguments");
    if (rate == 0.0) return 0;
    int c = static_cast<int>(std::lround(rate * n_tokens));
    return std::max(1, std::min(c, n_tokens));
}

std::vector<MaskedToken> apply_mlm_mask(DocumentGraph& graph, double rate, Rng& rng) {
    int n = graph.token_count();
    int count = mask_count(n, rate);
    std::vector<MaskedToken> out;
    out.reserve(static_cast<size_t>(count));
    for (int pick : rng.sample_without_replacement(n, count)) {
        int node = 1 + pick;  // node 0 is the super node
        out.push_back({node, graph.nodes[static_cast<size_t>(node)].token_id});
        graph.nodes[static_cast<size_t>(node)].token_id = Vocab::kMask;
    }
    return out;
}

std::vector<MaskedBox> apply_mpm_mask(DocumentGraph& graph, double rate, Rng& rng,
                                      const std::vector<int>& excluded_nodes) {
    int n = graph.token_count();
    std::set<int> excluded(excluded_nodes.begin(), excluded_nodes.end());
    std::vector<int> pool;
    pool.reserve(static_cast<size_t>(n));
    for (int node = 1; node <= n; ++node) {
        if (!excluded.count(node)) pool.push_back(node);
    }
    int count = std::min(mask_count(n, rate), static_cast<int>(pool.size()));
    std::vector<MaskedBox> out;
    out.reserve(static_cast<size_t>(count));
    for (int pick : rng.sample_without_replacement(static_cast<int>(pool.size()), count)) {
        int node = pool[static_cast<size_t>(pick)];
        auto& gn = graph.nodes[static_cast<size_t>(node)];
        out.push_back({node, gn.bbox});
        gn.bbox = BBox{0.0, 0.0, 0.0, 0.0};  // para_bbox stays intact
    }
    return out;
}

std::vector<int> cell_labels(const DocumentGraph& graph, int grid) {
    std::vector<int> cells;
    cells.reserve(static_cast<size_t>(graph.token_count()));
    for (int node = 1; node < graph.node_count(); ++node) {
        cells.push_back(page_cell(graph.nodes[static_cast<size_t>(node)].bbox, grid));
    }
    return cells;
}

AdamWState AdamWState::init(const ParamStore& params) {
    AdamWState st;
    st.m.reserve(static_cast<size_t>(params.count()));
    st.v.reserve(static_cast<size_t>(params.count()));
    for (const auto& e : params.entries) {
        st.m.emplace_back(e.value.n_rows, e.value.n_cols);
        st.v.emplace_back(e.value.n_rows, e.value.n_cols);
    }
    return st;
}

void adamw_step(ParamStore& params, AdamWState& state, const std::vector<Tensor>& grads,
                const TrainConfig& cfg) {
    require(static_cast<int>(grads.size()) == params.count() &&
                static_cast<int>(state.m.size()) == params.count(),
            "adamw_step: gradient/state size mismatch");
    state.step += 1;
    double t = static_cast<double>(state.step);
    double bc1 = 1.0 - std::pow(cfg.beta1, t);
    double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (int p = 0; p < params.count(); ++p) {
        Tensor& theta = params.value(p);
        const Tensor& g = grads[static_cast<size_t>(p)];
        require(g.same_shape(theta), "adamw_step: gradient shape mismatch");
        Tensor& m = state.m[static_cast<size_t>(p)];
        Tensor& v = state.v[static_cast<size_t>(p)];
        for (size_t i = 0; i < theta.data.size(); ++i) {
            double gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            theta.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) +
                             cfg.lr * cfg.weight_decay * theta.data[i];
        }
        ensure_finite(theta, "adamw_step: " + params.entries[static_cast<size_t>(p)].name);
    }
}

namespace {

std::vector<Tensor> zero_grads(const ParamStore& params) {
    std::vector<Tensor> g;
    g.reserve(static_cast<size_t>(params.count()));
    for (const auto& e : params.entries) g.emplace_back(e.value.n_rows, e.value.n_cols);
    return g;
}

void accumulate_sample(std::vector<Tensor>& grads, std::vector<std::pair<int, Tensor>>& dense,
                       std::vector<RowGrad>& rows) {
    for (auto& [pid, t] : dense) {
        Tensor& acc = grads[static_cast<size_t>(pid)];
        require(t.same_shape(acc), "gradient shape mismatch");
        for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += t.data[i];
    }
    for (auto& rg : rows) {
        double* dst = grads[static_cast<size_t>(rg.param)].row(rg.row);
        for (size_t c = 0; c < rg.grad.size(); ++c) dst[c] += rg.grad[c];
    }
}

struct SampleGrad {
    std::vector<std::pair<int, Tensor>> dense;
    std::vector<RowGrad> rows;
    double mlm = 0.0, mpm = 0.0, cpp = 0.0, total = 0.0;
    bool has_mlm = false, has_mpm = false, has_cpp = false;
};

}  // namespace

PretrainStepStats pretrain_step(GraphModel& model, const std::vector<DocumentGraph>& batch,
                                const TrainConfig& cfg, AdamWState& state) {
    require(!batch.empty(), "pretrain_step: empty batch");
    int bsz = static_cast<int>(batch.size());
    auto grads = zero_grads(model.params());
    PretrainStepStats stats;

    parallel_for_ordered<SampleGrad>(
        bsz,
        [&](int i) {
            SampleGrad out;
            DocumentGraph g = batch[static_cast<size_t>(i)];
            Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(state.step),
                             static_cast<uint64_t>(i)));
            auto cells = cell_labels(g, model.config().cpp_grid);  // pre-mask boxes
            auto mlm = apply_mlm_mask(g, cfg.mask_rate, rng);
            std::vector<int> mlm_nodes;
            for (const auto& m : mlm) mlm_nodes.push_back(m.node);
            auto mpm = apply_mpm_mask(g, cfg.mask_rate, rng, mlm_nodes);

            HeadSelect sel;
            std::vector<int> mlm_targets;
            if (cfg.w_mlm != 0.0 && !mlm.empty()) {
                sel.mlm_nodes = mlm_nodes;
                for (const auto& m : mlm) mlm_targets.push_back(m.original_id);
            }
            Tensor mpm_targets(static_cast<int>(mpm.size()), 4);
            if (cfg.w_mpm != 0.0 && !mpm.empty()) {
                for (size_t r = 0; r < mpm.size(); ++r) {
                    sel.mpm_nodes.push_back(mpm[r].node);
                    const BBox& b = mpm[r].original;
                    double* row = mpm_targets.row(static_cast<int>(r));
                    row[0] = b.x1, row[1] = b.y1, row[2] = b.x2, row[3] = b.y2;
                }
            }
            sel.cpp_all_tokens = cfg.w_cpp != 0.0;

            Tape tape;
            auto fw = model.forward(tape, g, sel);
            Var loss;
            auto add_term = [&](Var term, double w) {
                loss = loss.valid() ? tape.add_scaled(loss, term, w) : tape.scale(term, w);
            };
            if (!sel.mlm_nodes.empty()) {
                Var l = tape.cross_entropy_mean(fw.mlm_logits, mlm_targets);
                out.mlm = tape.value(l).item();
                out.has_mlm = true;
                add_term(l, cfg.w_mlm);
            }
            if (!sel.mpm_nodes.empty()) {
                Var l = tape.mse_mean(fw.mpm_pred, mpm_targets);
                out.mpm = tape.value(l).item();
                out.has_mpm = true;
                add_term(l, cfg.w_mpm);
            }
            if (sel.cpp_all_tokens) {
                Var l = tape.cross_entropy_mean(fw.cpp_logits, cells);
                out.cpp = tape.value(l).item();
                out.has_cpp = true;
                add_term(l, cfg.w_cpp);
            }
            if (loss.valid()) {
                out.total = tape.value(loss).item();
                tape.backward(loss, 1.0 / bsz);
                out.dense = tape.take_dense_param_grads();
                out.rows = tape.take_row_grads();
            }
            return out;
        },
        [&](int, SampleGrad out) {
            accumulate_sample(grads, out.dense, out.rows);
            stats.total += out.total / bsz;
            if (out.has_mlm) stats.mlm += out.mlm, stats.mlm_terms += 1;
            if (out.has_mpm) stats.mpm += out.mpm, stats.mpm_terms += 1;
            if (out.has_cpp) stats.cpp += out.cpp, stats.cpp_terms += 1;
        });

    if (stats.mlm_terms > 0) stats.mlm /= stats.mlm_terms;
    if (stats.mpm_terms > 0) stats.mpm /= stats.mpm_terms;
    if (stats.cpp_terms > 0) stats.cpp /= stats.cpp_terms;
    adamw_step(model.params(), state, grads, cfg);
    return stats;
}

double finetune_step(GraphModel& model, const std::vector<const DocumentGraph*>& batch,
                     const TrainConfig& cfg, AdamWState& state) {
    require(!batch.empty(), "finetune_step: empty batch");
    int bsz = static_cast<int>(batch.size());
    auto grads = zero_grads(model.params());
    double loss_sum = 0.0;

    parallel_for_ordered<SampleGrad>(
        bsz,
        [&](int i) {
            const DocumentGraph& g = *batch[static_cast<size_t>(i)];
            require(g.label.has_value() && *g.label >= 0 && *g.label < model.config().n_classes,
                    "finetune_step: graph " + g.doc_id + " lacks a valid label");
            SampleGrad out;
            Tape tape;
            auto fw = model.forward(tape, g, HeadSelect::classifier());
            Var loss = tape.cross_entropy_mean(fw.class_logits, {*g.label});
            out.total = tape.value(loss).item();
            tape.backward(loss, 1.0 / bsz);
            out.dense = tape.take_dense_param_grads();
            out.rows = tape.take_row_grads();
            return out;
        },
        [&](int, SampleGrad out) {
            accumulate_sample(grads, out.dense, out.rows);
            loss_sum += out.total;
        });

    adamw_step(model.params(), state, grads, cfg);
    return loss_sum / bsz;
}

Document prepare_document(Document doc, const Vocab& vocab, int max_tokens) {
    truncate_document(doc, max_tokens);
    normalize_document(doc);
    tokenize(doc, vocab);
    return doc;
}

std::vector<DocumentGraph> build_eval_graphs(const std::vector<Document>& docs,
                                             const GraphConfig& cfg, uint64_t seed) {
    std::vector<DocumentGraph> graphs(docs.size());
    parallel_for_ordered<DocumentGraph>(
        static_cast<int>(docs.size()),
        [&](int i) {
            return build_graph(docs[static_cast<size_t>(i)], cfg,
                               mix_seed(seed, static_cast<uint64_t>(i), 0), false);
        },
        [&](int i, DocumentGraph g) { graphs[static_cast<size_t>(i)] = std::move(g); });
    return graphs;
}

namespace {

// Indices shuffled per epoch, then consumed in batch_size chunks.
std::vector<std::vector<int>> epoch_batches(int n, int batch_size, uint64_t seed, int epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0x45504f43u, static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n; start += batch_size) {
        int end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

double classify_accuracy(const GraphModel& model, const std::vector<DocumentGraph>& graphs) {
    auto logits = batch_class_logits(model, graphs);
    std::vector<int> preds, labels;
    for (size_t i = 0; i < graphs.size(); ++i) {
        const auto& row = logits[i];
        preds.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        require(graphs[i].label.has_value(), "eval graph " + graphs[i].doc_id + " lacks a label");
        labels.push_back(*graphs[i].label);
    }
    return accuracy(preds, labels).micro;
}

}  // namespace

PretrainRun pretrain(GraphModel& model, AdamWState& opt, const std::vector<Document>& docs,
                     const RunConfig& cfg) {
    require(!docs.empty(), "pretrain: no documents");
    PretrainRun run;
    int n = static_cast<int>(docs.size());
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (const auto& batch_ids : epoch_batches(n, cfg.train.batch_size, cfg.train.seed, epoch)) {
            std::vector<DocumentGraph> batch;
            batch.reserve(batch_ids.size());
            for (int idx : batch_ids) {
                batch.push_back(build_graph(
                    docs[static_cast<size_t>(idx)], cfg.graph,
                    mix_seed(cfg.train.seed, static_cast<uint64_t>(epoch),
                             static_cast<uint64_t>(idx)),
                    true));
            }
            auto stats = pretrain_step(model, batch, cfg.train, opt);
            run.log.push_back({opt.step, epoch, stats.mlm, stats.mpm, stats.cpp, stats.total});
            epoch_loss += stats.total;
            n_batches += 1;
        }
        std::fprintf(stderr, "[pretrain] epoch %d/%d loss %.6f\n", epoch + 1, cfg.train.epochs,
                     epoch_loss / std::max(1, n_batches));
    }
    return run;
}

FinetuneRun finetune(GraphModel& model, AdamWState& opt, const std::vector<Document>& train_docs,
                     const std::vector<Document>& eval_docs, const RunConfig& cfg) {
    require(!train_docs.empty(), "finetune: no documents");
    FinetuneRun run;
    std::vector<DocumentGraph> eval_graphs;
    if (!eval_docs.empty()) {
        eval_graphs = build_eval_graphs(eval_docs, cfg.graph, mix_seed(cfg.train.seed, 0xEA1u, 0));
    }
    int n = static_cast<int>(train_docs.size());
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (const auto& batch_ids : epoch_batches(n, cfg.train.batch_size, cfg.train.seed, epoch)) {
            std::vector<DocumentGraph> storage;
            storage.reserve(batch_ids.size());
            for (int idx : batch_ids) {
                storage.push_back(build_graph(
                    train_docs[static_cast<size_t>(idx)], cfg.graph,
                    mix_seed(cfg.train.seed, static_cast<uint64_t>(epoch),
                             static_cast<uint64_t>(idx)),
                    true));
            }
            std::vector<const DocumentGraph*> batch;
            for (const auto& g : storage) batch.push_back(&g);
            double loss = finetune_step(model, batch, cfg.train, opt);
            run.log.push_back({opt.step, epoch, 0.0, 0.0, 0.0, loss});
            epoch_loss += loss;
            n_batches += 1;
        }
        run.epochs_run = epoch + 1;
        double acc = -1.0;
        if (!eval_graphs.empty()) {
            acc = classify_accuracy(model, eval_graphs);
            run.eval_accuracy = acc;
        }
        std::fprintf(stderr, "[finetune] epoch %d/%d loss %.6f eval_acc %.4f\n", epoch + 1,
                     cfg.train.epochs, epoch_loss / std::max(1, n_batches), acc);
        if (acc >= 0.0 && cfg.train.early_stop_accuracy > 0.0 &&
            acc >= cfg.train.early_stop_accuracy) {
            break;
        }
    }
    return run;
}

std::string loss_log_csv(const std::vector<LossRow>& log) {
    std::string out = "step,epoch,mlm,mpm,cpp,total\n";
    char buf[192];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%lld,%d,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(r.step), r.epoch, r.mlm, r.mpm, r.cpp, r.total);
        out += buf;
    }
    return out;
}

}  // namespace gvdoc
