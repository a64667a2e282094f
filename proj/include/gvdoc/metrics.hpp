#pragma once

#include <map>
#include <vector>

namespace gvdoc {

// Maximum softmax probability of a logit vector (max-subtracted for
// stability, so shifting all logits by a constant leaves it unchanged).
double msp(const std::vector<double>& logits);

// Energy score E(z, T) = -T * logsumexp(z / T). Lower energy = more
// confident; rank by -E when a confidence is needed.
double energy_score(const std::vector<double>& logits, double temperature = 1.0);

struct AccuracyReport {
    double micro = 0.0;                // correct / total
    double macro = 0.0;                // mean of per-class recall, present classes only
    std::map<int, double> per_class;   // label -> recall
};

AccuracyReport accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// Probability a random positive outranks a random negative, ties at half
// weight. Sort-based; exactly equal to the O(|P|*|N|) pairwise count.
double auroc(const std::vector<double>& pos, const std::vector<double>& neg);

// False-positive rate at the largest threshold t whose true-positive rate
// |{p >= t}| / |P| still reaches min_tpr.
double fpr_at_tpr(const std::vector<double>& pos, const std::vector<double>& neg,
                  double min_tpr = 0.95);

}  // namespace gvdoc
