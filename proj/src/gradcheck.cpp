#include "gvdoc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gvdoc/errors.hpp"
#include "gvdoc/hashing.hpp"
#include "gvdoc/rng.hpp"
#include "gvdoc/tape.hpp"
#include "gvdoc/trainer.hpp"

namespace gvdoc {

CheckProblem CheckProblem::make(const DocumentGraph& graph, int cpp_grid) {
    CheckProblem prob;
    prob.graph = graph;
    prob.label = graph.label.value_or(0);
    Rng rng(0xC0FFEE);
    prob.cells = cell_labels(prob.graph, cpp_grid);
    auto mlm = apply_mlm_mask(prob.graph, 0.15, rng);
    for (const auto& m : mlm) {
        prob.mlm_nodes.push_back(m.node);
        prob.mlm_targets.push_back(m.original_id);
    }
    auto mpm = apply_mpm_mask(prob.graph, 0.15, rng, prob.mlm_nodes);
    prob.mpm_targets = Tensor(static_cast<int>(mpm.size()), 4);
    for (size_t r = 0; r < mpm.size(); ++r) {
        prob.mpm_nodes.push_back(mpm[r].node);
        const BBox& b = mpm[r].original;
        double* row = prob.mpm_targets.row(static_cast<int>(r));
        row[0] = b.x1, row[1] = b.y1, row[2] = b.x2, row[3] = b.y2;
    }
    return prob;
}

namespace {

Var problem_loss_var(Tape& tape, const GraphModel& model, const CheckProblem& prob) {
    HeadSelect sel;
    sel.cls = true;
    sel.mlm_nodes = prob.mlm_nodes;
    sel.mpm_nodes = prob.mpm_nodes;
    sel.cpp_all_tokens = true;
    auto fw = model.forward(tape, prob.graph, sel);
    Var loss = tape.cross_entropy_mean(fw.class_logits, {prob.label});
    if (!prob.mlm_nodes.empty()) {
        loss = tape.add(loss, tape.cross_entropy_mean(fw.mlm_logits, prob.mlm_targets));
    }
    if (!prob.mpm_nodes.empty()) {
        loss = tape.add(loss, tape.mse_mean(fw.mpm_pred, prob.mpm_targets));
    }
    loss = tape.add(loss, tape.cross_entropy_mean(fw.cpp_logits, prob.cells));
    return loss;
}

}  // namespace

double problem_loss(const GraphModel& model, const CheckProblem& prob) {
    Tape tape(false);
    return tape.value(problem_loss_var(tape, model, prob)).item();
}

std::vector<Tensor> analytic_gradients(const GraphModel& model, const CheckProblem& prob) {
    Tape tape;
    Var loss = problem_loss_var(tape, model, prob);
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (const auto& e : model.params().entries) grads.emplace_back(e.value.n_rows, e.value.n_cols);
    tape.accumulate_param_grads(grads);
    return grads;
}

constexpr double kAbsFloor = 1e-8;

GradCheckReport compare_gradients(GraphModel& model, const CheckProblem& prob,
                                  const std::vector<Tensor>& analytic, double tolerance,
                                  double h, int elements_per_param) {
    require(h > 0.0 && tolerance > 0.0, "compare_gradients: bad tolerance or step");
    GradCheckReport report;
    report.tolerance = tolerance;
    ParamStore& params = model.params();
    require(analytic.size() == static_cast<size_t>(params.count()),
            "compare_gradients: gradient count mismatch");

    for (int p = 0; p < params.count(); ++p) {
        Tensor& theta = params.value(p);
        const Tensor& a = analytic[static_cast<size_t>(p)];
        int n = static_cast<int>(theta.data.size());

        std::vector<int> probe;
        if (elements_per_param <= 0 || elements_per_param >= n) {
            probe.resize(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) probe[static_cast<size_t>(i)] = i;
        } else {
            Rng rng(fnv1a64(params.entries[static_cast<size_t>(p)].name));
            probe = rng.sample_without_replacement(n, elements_per_param);
        }

        GradCheckEntry entry;
        entry.name = params.entries[static_cast<size_t>(p)].name;
        entry.checked = static_cast<int>(probe.size());
        for (int i : probe) {
            double saved = theta.data[static_cast<size_t>(i)];
            theta.data[static_cast<size_t>(i)] = saved + h;
            double up = problem_loss(model, prob);
            theta.data[static_cast<size_t>(i)] = saved - h;
            double down = problem_loss(model, prob);
            theta.data[static_cast<size_t>(i)] = saved;
            double numeric = (up - down) / (2.0 * h);
            double analytic_g = a.data[static_cast<size_t>(i)];
            double diff = std::fabs(analytic_g - numeric);
            // Differences inside the absolute floor count as agreement; they
            // are indistinguishable from f64 cancellation noise in the loss.
            double rel = diff < kAbsFloor
                             ? 0.0
                             : diff / std::max({std::fabs(analytic_g), std::fabs(numeric), 1e-12});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.params.push_back(std::move(entry));
    }
    report.passed = report.max_rel_err < tolerance;
    return report;
}

GradCheckReport finite_diff_check(GraphModel& model, const DocumentGraph& graph, double tolerance,
                                  double h, int elements_per_param) {
    auto prob = CheckProblem::make(graph, model.config().cpp_grid);
    auto grads = analytic_gradients(model, prob);
    return compare_gradients(model, prob, grads, tolerance, h, elements_per_param);
}

std::string gradcheck_report_text(const GradCheckReport& report) {
    std::string out;
    char buf[160];
    for (const auto& e : report.params) {
        std::snprintf(buf, sizeof buf, "%-24s checked %5d  max_rel_err %.3e\n", e.name.c_str(),
                      e.checked, e.max_rel_err);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "overall max_rel_err %.3e tolerance %.1e: %s\n",
                  report.max_rel_err, report.tolerance, report.passed ? "PASS" : "FAIL");
    out += buf;
    return out;
}

}  // namespace gvdoc
