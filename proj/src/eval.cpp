#include "gvdoc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "gvdoc/errors.hpp"
#include "gvdoc/parallel.hpp"
#include "gvdoc/tape.hpp"

namespace gvdoc {

std::vector<std::vector<double>> batch_class_logits(const GraphModel& model,
                                                    const std::vector<DocumentGraph>& graphs) {
    std::vector<std::vector<double>> out(graphs.size());
    parallel_for_ordered<std::vector<double>>(
        static_cast<int>(graphs.size()),
        [&](int i) {
            Tape tape(false);
            auto fw = model.forward(tape, graphs[static_cast<size_t>(i)],
                                    HeadSelect::classifier());
            const Tensor& z = tape.value(fw.class_logits);
            return std::vector<double>(z.data.begin(), z.data.end());
        },
        [&](int i, std::vector<double> z) { out[static_cast<size_t>(i)] = std::move(z); });
    return out;
}

namespace {

OodStats separation(const std::vector<double>& conf_in, const std::vector<double>& conf_ood,
                    const std::vector<int>& labels, int n_classes, const char* score_name) {
    OodStats s;
    s.auroc_micro = auroc(conf_in, conf_ood);
    s.fpr95_micro = fpr_at_tpr(conf_in, conf_ood, 0.95);
    double auroc_sum = 0.0, fpr_sum = 0.0;
    int present = 0;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<double> cls;
        for (size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) cls.push_back(conf_in[i]);
        }
        if (cls.empty()) {
            std::fprintf(stderr, "[eval] class %d has no test samples; skipping it in macro %s\n",
                         c, score_name);
            continue;
        }
        auroc_sum += auroc(cls, conf_ood);
        fpr_sum += fpr_at_tpr(cls, conf_ood, 0.95);
        present += 1;
    }
    require(present > 0, "evaluate: no in-domain class has test samples");
    s.auroc_macro = auroc_sum / present;
    s.fpr95_macro = fpr_sum / present;
    return s;
}

}  // namespace

EvalResult evaluate(const GraphModel& model, const std::vector<DocumentGraph>& in_test,
                    const std::vector<DocumentGraph>& ood, double temperature) {
    require(!in_test.empty() && !ood.empty(), "evaluate: both splits must be non-empty");
    EvalResult r;
    r.n_in = static_cast<int>(in_test.size());
    r.n_ood = static_cast<int>(ood.size());

    auto logits_in = batch_class_logits(model, in_test);
    auto logits_ood = batch_class_logits(model, ood);

    for (size_t i = 0; i < logits_in.size(); ++i) {
        const auto& z = logits_in[i];
        r.predictions.push_back(
            static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()));
        require(in_test[i].label.has_value(),
                "evaluate: test graph " + in_test[i].doc_id + " lacks a label");
        r.labels.push_back(*in_test[i].label);
        r.msp_in.push_back(msp(z));
        r.energy_in.push_back(-energy_score(z, temperature));
    }
    for (const auto& z : logits_ood) {
        r.msp_ood.push_back(msp(z));
        r.energy_ood.push_back(-energy_score(z, temperature));
    }

    r.acc = accuracy(r.predictions, r.labels);
    int n_classes = model.config().n_classes;
    r.msp_stats = separation(r.msp_in, r.msp_ood, r.labels, n_classes, "MSP");
    r.energy_stats = separation(r.energy_in, r.energy_ood, r.labels, n_classes, "energy");
    return r;
}

std::string eval_report_json(const EvalResult& r, const std::string& cfg_hash, uint64_t seed) {
    using nlohmann::json;
    json per_class = json::object();
    for (const auto& [cls, recall] : r.acc.per_class) {
        per_class[std::to_string(cls)] = recall;
    }
    json report = {
        {"accuracy", {{"micro", r.acc.micro}, {"macro", r.acc.macro}, {"per_class", per_class}}},
        {"auroc",
         {{"msp", {{"micro", r.msp_stats.auroc_micro}, {"macro", r.msp_stats.auroc_macro}}},
          {"energy",
           {{"micro", r.energy_stats.auroc_micro}, {"macro", r.energy_stats.auroc_macro}}}}},
        {"fpr95",
         {{"msp", {{"micro", r.msp_stats.fpr95_micro}, {"macro", r.msp_stats.fpr95_macro}}},
          {"energy",
           {{"micro", r.energy_stats.fpr95_micro}, {"macro", r.energy_stats.fpr95_macro}}}}},
        {"n_in", r.n_in},
        {"n_ood", r.n_ood},
        {"config_hash", cfg_hash},
        {"seed", seed}};
    return report.dump(2) + "\n";
}

namespace {

void histogram_rows(std::string& out, const char* score, const std::vector<double>& in_conf,
                    const std::vector<double>& ood_conf, int bins) {
    double lo = in_conf[0], hi = in_conf[0];
    for (double v : in_conf) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : ood_conf) lo = std::min(lo, v), hi = std::max(hi, v);
    double width = (hi - lo > 0.0) ? (hi - lo) / bins : 1.0;
    auto emit = [&](const char* split, const std::vector<double>& conf) {
        std::vector<int> counts(static_cast<size_t>(bins), 0);
        for (double v : conf) {
            int b = std::min(bins - 1, std::max(0, static_cast<int>((v - lo) / width)));
            counts[static_cast<size_t>(b)] += 1;
        }
        char buf[160];
        for (int b = 0; b < bins; ++b) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%.9g,%d\n", split, score,
                          lo + b * width, lo + (b + 1) * width, counts[static_cast<size_t>(b)]);
            out += buf;
        }
    };
    emit("in", in_conf);
    emit("ood", ood_conf);
}

void roc_rows(std::string& out, const char* score, const std::vector<double>& pos,
              const std::vector<double>& neg) {
    // Threshold sweep over pooled scores, descending: one (fpr, tpr) point per
    // distinct threshold plus the (0,0) origin.
    std::vector<double> thresholds;
    thresholds.reserve(pos.size() + neg.size());
    thresholds.insert(thresholds.end(), pos.begin(), pos.end());
    thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<double> ps = pos, ns = neg;
    std::sort(ps.begin(), ps.end(), std::greater<>());
    std::sort(ns.begin(), ns.end(), std::greater<>());
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s,0,0\n", score);
    out += buf;
    size_t pi = 0, ni = 0;
    for (double t : thresholds) {
        while (pi < ps.size() && ps[pi] >= t) ++pi;
        while (ni < ns.size() && ns[ni] >= t) ++ni;
        std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g\n", score,
                      static_cast<double>(ni) / static_cast<double>(ns.size()),
                      static_cast<double>(pi) / static_cast<double>(ps.size()));
        out += buf;
    }
}

}  // namespace

std::string confidence_histogram_csv(const EvalResult& r, int bins) {
    require(bins > 0, "confidence_histogram_csv: bins must be positive");
    std::string out = "split,confidence_type,bin_left,bin_right,count\n";
    histogram_rows(out, "msp", r.msp_in, r.msp_ood, bins);
    histogram_rows(out, "energy", r.energy_in, r.energy_ood, bins);
    return out;
}

std::string roc_csv(const EvalResult& r) {
    std::string out = "confidence_type,fpr,tpr\n";
    roc_rows(out, "msp", r.msp_in, r.msp_ood);
    roc_rows(out, "energy", r.energy_in, r.energy_ood);
    return out;
}

}  // namespace gvdoc
