#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gvdoc/config.hpp"
#include "gvdoc/document.hpp"
#include "gvdoc/graph.hpp"
#include "gvdoc/model.hpp"
#include "gvdoc/rng.hpp"

namespace gvdoc {

// Number of nodes selected by a masking pass over n_tokens tokens.
int mask_count(int n_tokens, double rate);

struct MaskedToken {
    int node = 0;         // graph node index
    int original_id = 0;  // token id before replacement with MASK
};

struct MaskedBox {
    int node = 0;
    BBox original;  // token bbox before zeroing; paragraph bbox is untouched
};

// Replaces the token id of mask_count() token nodes with the MASK id. The
// super node is never selected. Selection order comes from rng.
std::vector<MaskedToken> apply_mlm_mask(DocumentGraph& graph, double rate, Rng& rng);

// Zeroes the token bbox of mask_count() token nodes drawn from the tokens not
// in `excluded_nodes` (pass the MLM selection to keep the sets disjoint).
// Takes whatever remains when fewer are available.
std::vector<MaskedBox> apply_mpm_mask(DocumentGraph& graph, double rate, Rng& rng,
                                      const std::vector<int>& excluded_nodes = {});

// Page-cell targets for every token node, from the current (unmasked) boxes.
std::vector<int> cell_labels(const DocumentGraph& graph, int grid);

struct AdamWState {
    int64_t step = 0;
    std::vector<Tensor> m, v;  // aligned with ParamStore entries

    static AdamWState init(const ParamStore& params);
};

// One decoupled-weight-decay Adam update over every parameter:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
//   theta <- theta - lr*mhat/(sqrt(vhat)+eps) - lr*wd*theta.
// Unused parameters (zero gradient) still decay.
void adamw_step(ParamStore& params, AdamWState& state, const std::vector<Tensor>& grads,
                const TrainConfig& cfg);

struct PretrainStepStats {
    double mlm = 0.0, mpm = 0.0, cpp = 0.0, total = 0.0;  // batch means
    int mlm_terms = 0, mpm_terms = 0, cpp_terms = 0;      // samples contributing
};

// Joint masked-token / masked-box / page-cell step on a batch of graphs.
// Masks are drawn fresh per (seed, step, sample); the batch loss is the mean
// of per-sample losses; gradients reduce in sample order.
PretrainStepStats pretrain_step(GraphModel& model, const std::vector<DocumentGraph>& batch,
                                const TrainConfig& cfg, AdamWState& state);

// Supervised step: mean cross-entropy of the super-node class logits against
// graph labels. Returns the batch loss.
double finetune_step(GraphModel& model, const std::vector<const DocumentGraph*>& batch,
                     const TrainConfig& cfg, AdamWState& state);

struct LossRow {
    int64_t step = 0;
    int epoch = 0;
    double mlm = 0.0, mpm = 0.0, cpp = 0.0, total = 0.0;
};

// Documents must already be prepared (truncated, normalized, tokenized).
Document prepare_document(Document doc, const Vocab& vocab, int max_tokens);

std::vector<DocumentGraph> build_eval_graphs(const std::vector<Document>& docs,
                                             const GraphConfig& cfg, uint64_t seed);

struct PretrainRun {
    std::vector<LossRow> log;
};

PretrainRun pretrain(GraphModel& model, AdamWState& opt, const std::vector<Document>& docs,
                     const RunConfig& cfg);

struct FinetuneRun {
    std::vector<LossRow> log;  // mlm/mpm/cpp stay 0; total = batch loss
    int epochs_run = 0;
    double eval_accuracy = -1.0;  // last measured; -1 when never evaluated
};

// Trains the classifier; when eval_docs is non-empty the eval split accuracy
// is measured each epoch and training stops early once it reaches
// cfg.train.early_stop_accuracy (if set).
FinetuneRun finetune(GraphModel& model, AdamWState& opt, const std::vector<Document>& train_docs,
                     const std::vector<Document>& eval_docs, const RunConfig& cfg);

std::string loss_log_csv(const std::vector<LossRow>& log);

// Checkpoint container: "GVDK" magic, format version, JSON header (config +
// train state), tensor manifest (name, dtype, shape, offset), little-endian
// row-major payload. Lossless for f64; f32 storage truncates.
void save_checkpoint(const std::string& path, const GraphModel& model, const AdamWState& opt,
                     const RunConfig& cfg, const std::vector<LossRow>& history);

struct LoadedCheckpoint {
    RunConfig config;
    GraphModel model;
    AdamWState opt;
    std::vector<LossRow> history;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace gvdoc
