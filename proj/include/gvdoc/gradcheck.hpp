#pragma once

#include <string>
#include <vector>

#include "gvdoc/graph.hpp"
#include "gvdoc/model.hpp"

namespace gvdoc {

// A fixed training example exercising every head: deterministic token and box
// masks with their restoration targets, page-cell labels, and a class label.
struct CheckProblem {
    DocumentGraph graph;
    std::vector<int> mlm_nodes, mlm_targets;
    std::vector<int> mpm_nodes;
    Tensor mpm_targets{0, 4};
    std::vector<int> cells;
    int label = 0;

    static CheckProblem make(const DocumentGraph& graph, int cpp_grid);
};

// Combined loss (sum of all four head losses) at the current parameters.
double problem_loss(const GraphModel& model, const CheckProblem& prob);

// Reverse-mode gradients of problem_loss for every parameter.
std::vector<Tensor> analytic_gradients(const GraphModel& model, const CheckProblem& prob);

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> params;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// Central-difference comparison of `analytic` against (f(x+h)-f(x-h))/2h.
// Absolute differences under 1e-8 count as agreement; larger ones are scored
// relative to the bigger gradient. elements_per_param caps how many entries
// of each tensor are probed (0 = all), sampled deterministically.
GradCheckReport compare_gradients(GraphModel& model, const CheckProblem& prob,
                                  const std::vector<Tensor>& analytic, double tolerance,
                                  double h, int elements_per_param);

GradCheckReport finite_diff_check(GraphModel& model, const DocumentGraph& graph,
                                  double tolerance = 1e-4, double h = 1e-5,
                                  int elements_per_param = 0);

std::string gradcheck_report_text(const GradCheckReport& report);

}  // namespace gvdoc
