#include "gvdoc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gvdoc/errors.hpp"

namespace gvdoc {

double msp(const std::vector<double>& logits) {
    require(!logits.empty(), "msp: empty logits");
    double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    return 1.0 / z;  // exp(max - max) / sum
}

double energy_score(const std::vector<double>& logits, double temperature) {
    require(!logits.empty(), "energy_score: empty logits");
    require(temperature > 0.0, "energy_score: temperature must be positive");
    double m = logits.front() / temperature;
    for (double v : logits) m = std::max(m, v / temperature);
    double z = 0.0;
    for (double v : logits) z += std::exp(v / temperature - m);
    return -temperature * (m + std::log(z));
}

AccuracyReport accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    require(predictions.size() == labels.size(), "accuracy: size mismatch");
    require(!labels.empty(), "accuracy: no samples");
    AccuracyReport rep;
    std::map<int, std::pair<int, int>> per;  // label -> (correct, total)
    int correct = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        auto& [c, t] = per[labels[i]];
        ++t;
        if (predictions[i] == labels[i]) {
            ++c;
            ++correct;
        }
    }
    rep.micro = static_cast<double>(correct) / static_cast<double>(labels.size());
    double macro_sum = 0.0;
    for (const auto& [label, ct] : per) {
        double r = static_cast<double>(ct.first) / static_cast<double>(ct.second);
        rep.per_class[label] = r;
        macro_sum += r;
    }
    rep.macro = macro_sum / static_cast<double>(per.size());
    return rep;
}

double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
    require(!pos.empty() && !neg.empty(), "auroc: both score sets must be non-empty");
    std::vector<double> sorted_neg = neg;
    std::sort(sorted_neg.begin(), sorted_neg.end());
    // Integer win/tie counts keep the sorted path bit-identical to the
    // pairwise definition.
    long long wins = 0, ties = 0;
    for (double p : pos) {
        auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), p);
        auto hi = std::upper_bound(lo, sorted_neg.end(), p);
        wins += lo - sorted_neg.begin();
        ties += hi - lo;
    }
    double numer = static_cast<double>(wins) + 0.5 * static_cast<double>(ties);
    return numer / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double fpr_at_tpr(const std::vector<double>& pos, const std::vector<double>& neg,
                  double min_tpr) {
    require(!pos.empty() && !neg.empty(), "fpr_at_tpr: both score sets must be non-empty");
    require(min_tpr > 0.0 && min_tpr <= 1.0, "fpr_at_tpr: min_tpr must be in (0, 1]");
    const int p = static_cast<int>(pos.size());

    // Smallest count c with c/p >= min_tpr, computed with the same double
    // comparisons a threshold sweep would use.
    int c = static_cast<int>(std::ceil(min_tpr * p));
    c = std::clamp(c, 1, p);
    while (c > 1 && static_cast<double>(c - 1) / p >= min_tpr) --c;
    while (static_cast<double>(c) / p < min_tpr && c < p) ++c;

    std::vector<double> sorted_pos = pos;
    std::sort(sorted_pos.begin(), sorted_pos.end(), std::greater<>());
    double threshold = sorted_pos[static_cast<size_t>(c - 1)];  // c-th largest

    int fp = 0;
    for (double n : neg)
        if (n >= threshold) ++fp;
    return static_cast<double>(fp) / static_cast<double>(neg.size());
}

}  // namespace gvdoc
