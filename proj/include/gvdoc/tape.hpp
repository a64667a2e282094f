#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gvdoc/tensor.hpp"

namespace gvdoc {

class Tape;

// Handle to a tape slot. Default-constructed handles are empty.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Scatter record produced when backpropagating through a row gather on a
// table leaf: `row` of parameter `param` receives `grad` (width = table cols).
struct RowGrad {
    int param = 0;
    int row = 0;
    std::vector<double> grad;
};

// Reverse-mode tape over 2-D tensors. Leaves either own dense gradients
// (weights) or log per-row gradients (embedding tables, which are only ever
// read through gather_rows). Every op output is checked for finiteness; the
// current context string is included in the error.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;             // recorded closures capture `this`
    Tape& operator=(const Tape&) = delete;

    // Leaves. External tensors must outlive the tape.
    Var param(const Tensor& value, int param_id);        // dense gradient
    Var table_param(const Tensor& value, int param_id);  // sparse row gradients
    Var constant(Tensor value);                          // no gradient
    Var constant_ref(const Tensor& value);               // no gradient, no copy

    // Ops.
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var add_rowvec(Var a, Var bias);  // bias is 1 x cols
    Var scale(Var a, double c);
    Var scale_rows(Var a, Var s);  // s is rows x 1
    Var concat_cols(const std::vector<Var>& parts);
    Var gather_rows(Var table, std::vector<int> rows);
    Var row_dot(Var a, Var b);  // rows x 1
    Var leaky_relu(Var a, double slope);
    Var elu(Var a);
    // Per-segment softmax over a column vector; segments are CSR offsets
    // (size = n_segments + 1) into the rows. Empty segments are allowed.
    Var segment_softmax(Var logits, std::shared_ptr<const std::vector<int>> offsets);
    // Sums rows within each segment -> n_segments x cols.
    Var segment_sum_rows(Var a, std::shared_ptr<const std::vector<int>> offsets);
    // Mean softmax cross-entropy of logit rows against integer targets -> 1x1.
    Var cross_entropy_mean(Var logits, std::vector<int> targets);
    // Mean squared error against a constant target of the same shape -> 1x1.
    Var mse_mean(Var pred, Tensor target);
    Var add_scaled(Var acc, Var x, double w);  // acc + w*x, any matching shape

    void backward(Var loss, double seed = 1.0);

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;  // zeros when the node never got gradient
    const std::vector<RowGrad>& row_grads() const { return row_grads_; }

    // Accumulates every dense parameter-leaf gradient and every table row
    // gradient into acc (indexed by param id, shaped like the parameters).
    // Tape order, so repeated calls are deterministic.
    void accumulate_param_grads(std::vector<Tensor>& acc) const;

    // Moves the per-parameter gradients out of the tape: dense leaves as
    // (param id, tensor) pairs, tables as row records.
    std::vector<std::pair<int, Tensor>> take_dense_param_grads();
    std::vector<RowGrad> take_row_grads() { return std::move(row_grads_); }

    // Stamped into nodes created from now on; reported by finiteness errors.
    void set_context(std::string ctx) { context_ = std::move(ctx); }

    bool grad_enabled() const { return grad_enabled_; }

private:
    // Nodes live in a deque so `value` pointers into sibling nodes stay valid
    // as the tape grows.
    struct Node {
        Tensor owned;                // storage for op results / constants
        const Tensor* value = nullptr;
        Tensor grad;                 // lazily sized
        std::function<void()> back;  // empty for leaves/constants
        bool needs_grad = false;
        bool is_table = false;
        int param_id = -1;
        std::string context;
    };

    Var push(Node node);
    Node& node(Var v);
    const Node& node(Var v) const;
    Tensor& grad_buf(int id);
    void check_same_tape(Var v) const;

    std::deque<Node> nodes_;
    std::vector<RowGrad> row_grads_;
    std::string context_;
    bool grad_enabled_ = true;
};

}  // namespace gvdoc
