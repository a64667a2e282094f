#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gvdoc/graph.hpp"
#include "gvdoc/metrics.hpp"
#include "gvdoc/model.hpp"

namespace gvdoc {

// Class logits of each graph, grad-free forward, input order.
std::vector<std::vector<double>> batch_class_logits(const GraphModel& model,
                                                    const std::vector<DocumentGraph>& graphs);

struct OodStats {
    double auroc_micro = 0.0;
    double auroc_macro = 0.0;  // mean over in-domain classes with test samples
    double fpr95_micro = 0.0;
    double fpr95_macro = 0.0;
};

struct EvalResult {
    AccuracyReport acc;
    int n_in = 0, n_ood = 0;
    std::vector<int> labels, predictions;              // in-domain split
    std::vector<double> msp_in, msp_ood;               // max softmax probability
    std::vector<double> energy_in, energy_ood;         // negative energy score
    OodStats msp_stats, energy_stats;
};

// Classification accuracy on in_test plus in-vs-OOD separation of two
// confidence scores (higher = more in-domain). Classes without test samples
// are skipped in the macro averages with a warning on stderr.
EvalResult evaluate(const GraphModel& model, const std::vector<DocumentGraph>& in_test,
                    const std::vector<DocumentGraph>& ood, double temperature = 1.0);

std::string eval_report_json(const EvalResult& r, const std::string& cfg_hash, uint64_t seed);

// split,confidence_type,bin_left,bin_right,count over uniform bins spanning
// the pooled in+OOD range of each confidence type.
std::string confidence_histogram_csv(const EvalResult& r, int bins = 50);

// confidence_type,fpr,tpr rows of the in-vs-OOD ROC sweep.
std::string roc_csv(const EvalResult& r);

}  // namespace gvdoc
