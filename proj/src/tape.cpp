#include "gvdoc/tape.hpp"

#include <cmath>

#include "gvdoc/errors.hpp"

namespace gvdoc {

void ensure_finite(const Tensor& t, const std::string& context) {
    for (double v : t.data)
        if (!std::isfinite(v))
            throw InvariantError("non-finite value in " + (context.empty() ? "tensor" : context));
}

Var Tape::push(Node n) {
    if (n.context.empty()) n.context = context_;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
const Tape::Node& Tape::node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }

void Tape::check_same_tape(Var v) const {
    require(v.valid() && v.tape == this && v.id < static_cast<int>(nodes_.size()),
            "tape: var does not belong to this tape");
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() == 0) n.grad = Tensor(n.value->n_rows, n.value->n_cols);
    return n.grad;
}

const Tensor& Tape::value(Var v) const {
    check_same_tape(v);
    return *node(v).value;
}

const Tensor& Tape::grad(Var v) const {
    check_same_tape(v);
    const Node& n = node(v);
    require(!n.is_table, "tape: table leaves expose gradients via row_grads()");
    static const Tensor empty;
    if (n.grad.numel() == 0) {
        // Never touched by backward; report a zero tensor of the right shape.
        const_cast<Node&>(n).grad = Tensor(n.value->n_rows, n.value->n_cols);
    }
    return n.grad;
}

Var Tape::param(const Tensor& value, int param_id) {
    Node n;
    n.value = &value;
    n.needs_grad = grad_enabled_;
    n.param_id = param_id;
    return push(std::move(n));
}

Var Tape::table_param(const Tensor& value, int param_id) {
    Node n;
    n.value = &value;
    n.needs_grad = grad_enabled_;
    n.is_table = true;
    n.param_id = param_id;
    return push(std::move(n));
}

Var Tape::constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    Var v = push(std::move(n));
    node(v).value = &node(v).owned;
    return v;
}

Var Tape::constant_ref(const Tensor& value) {
    Node n;
    n.value = &value;
    return push(std::move(n));
}

namespace {
bool want_grad(const Tape& t, std::initializer_list<bool> parents) {
    if (!t.grad_enabled()) return false;
    for (bool p : parents)
        if (p) return true;
    return false;
}
}  // namespace

Var Tape::matmul(Var a, Var b) {
    check_same_tape(a);
    check_same_tape(b);
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.n_cols == B.n_rows, "matmul: inner dimensions differ");
    Tensor C(A.n_rows, B.n_cols);
    for (int64_t i = 0; i < A.n_rows; ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        for (int64_t k = 0; k < A.n_cols; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = B.row(k);
            for (int64_t j = 0; j < B.n_cols; ++j) crow[j] += aik * brow[j];
        }
    }
    ensure_finite(C, "matmul (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad, node(b).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, bid = b.id, oid = out.id;
        on.back = [this, aid, bid, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            const Tensor& A = *nodes_[static_cast<size_t>(aid)].value;
            const Tensor& B = *nodes_[static_cast<size_t>(bid)].value;
            if (nodes_[static_cast<size_t>(aid)].needs_grad) {
                Tensor& dA = grad_buf(aid);  // dA += G * B^T
                for (int64_t i = 0; i < A.n_rows; ++i) {
                    const double* grow = G.row(i);
                    double* darow = dA.row(i);
                    for (int64_t k = 0; k < A.n_cols; ++k) {
                        const double* brow = B.row(k);
                        double s = 0.0;
                        for (int64_t j = 0; j < B.n_cols; ++j) s += grow[j] * brow[j];
                        darow[k] += s;
                    }
                }
            }
            if (nodes_[static_cast<size_t>(bid)].needs_grad) {
                Tensor& dB = grad_buf(bid);  // dB += A^T * G
                for (int64_t i = 0; i < A.n_rows; ++i) {
                    const double* arow = A.row(i);
                    const double* grow = G.row(i);
                    for (int64_t k = 0; k < A.n_cols; ++k) {
                        double aik = arow[k];
                        if (aik == 0.0) continue;
                        double* dbrow = dB.row(k);
                        for (int64_t j = 0; j < B.n_cols; ++j) dbrow[j] += aik * grow[j];
                    }
                }
            }
        };
    }
    return out;
}

Var Tape::add(Var a, Var b) {
    check_same_tape(a);
    check_same_tape(b);
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "add: shape mismatch");
    Tensor C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] += B.data[i];
    ensure_finite(C, "add (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad, node(b).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, bid = b.id, oid = out.id;
        on.back = [this, aid, bid, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            for (int pid : {aid, bid}) {
                if (!nodes_[static_cast<size_t>(pid)].needs_grad) continue;
                Tensor& D = grad_buf(pid);
                for (size_t i = 0; i < D.data.size(); ++i) D.data[i] += G.data[i];
            }
        };
    }
    return out;
}

Var Tape::sub(Var a, Var b) {
    check_same_tape(a);
    check_same_tape(b);
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "sub: shape mismatch");
    Tensor C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] -= B.data[i];
    ensure_finite(C, "sub (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad, node(b).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, bid = b.id, oid = out.id;
        on.back = [this, aid, bid, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            if (nodes_[static_cast<size_t>(aid)].needs_grad) {
                Tensor& D = grad_buf(aid);
                for (size_t i = 0; i < D.data.size(); ++i) D.data[i] += G.data[i];
            }
            if (nodes_[static_cast<size_t>(bid)].needs_grad) {
                Tensor& D = grad_buf(bid);
                for (size_t i = 0; i < D.data.size(); ++i) D.data[i] -= G.data[i];
            }
        };
    }
    return out;
}

Var Tape::add_rowvec(Var a, Var bias) {
    check_same_tape(a);
    check_same_tape(bias);
    const Tensor& A = value(a);
    const Tensor& B = value(bias);
    require(B.n_rows == 1 && B.n_cols == A.n_cols, "add_rowvec: bias must be 1 x cols");
    Tensor C = A;
    for (int64_t i = 0; i < C.n_rows; ++i) {
        double* crow = C.row(i);
        for (int64_t j = 0; j < C.n_cols; ++j) crow[j] += B.data[static_cast<size_t>(j)];
    }
    ensure_finite(C, "add_rowvec (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad, node(bias).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, bid = bias.id, oid = out.id;
        on.back = [this, aid, bid, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            if (nodes_[static_cast<size_t>(aid)].needs_grad) {
                Tensor& D = grad_buf(aid);
                for (size_t i = 0; i < D.data.size(); ++i) D.data[i] += G.data[i];
            }
            if (nodes_[static_cast<size_t>(bid)].needs_grad) {
                Tensor& D = grad_buf(bid);
                for (int64_t i = 0; i < G.n_rows; ++i) {
                    const double* grow = G.row(i);
                    for (int64_t j = 0; j < G.n_cols; ++j) D.data[static_cast<size_t>(j)] += grow[j];
                }
            }
        };
    }
    return out;
}

Var Tape::scale(Var a, double c) {
    check_same_tape(a);
    Tensor C = value(a);
    for (double& v : C.data) v *= c;
    ensure_finite(C, "scale (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, oid = out.id;
        on.back = [this, aid, oid, c]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            Tensor& D = grad_buf(aid);
            for (size_t i = 0; i < D.data.size(); ++i) D.data[i] += c * G.data[i];
        };
    }
    return out;
}

Var Tape::scale_rows(Var a, Var s) {
    check_same_tape(a);
    check_same_tape(s);
    const Tensor& A = value(a);
    const Tensor& S = value(s);
    require(S.n_rows == A.n_rows && S.n_cols == 1, "scale_rows: scale must be rows x 1");
    Tensor C = A;
    for (int64_t i = 0; i < C.n_rows; ++i) {
        double si = S.data[static_cast<size_t>(i)];
        double* crow = C.row(i);
        for (int64_t j = 0; j < C.n_cols; ++j) crow[j] *= si;
    }
    ensure_finite(C, "scale_rows (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad, node(s).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, sid = s.id, oid = out.id;
        on.back = [this, aid, sid, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            const Tensor& A = *nodes_[static_cast<size_t>(aid)].value;
            const Tensor& S = *nodes_[static_cast<size_t>(sid)].value;
            if (nodes_[static_cast<size_t>(aid)].needs_grad) {
                Tensor& D = grad_buf(aid);
                for (int64_t i = 0; i < A.n_rows; ++i) {
                    double si = S.data[static_cast<size_t>(i)];
                    const double* grow = G.row(i);
                    double* drow = D.row(i);
                    for (int64_t j = 0; j < A.n_cols; ++j) drow[j] += si * grow[j];
                }
            }
            if (nodes_[static_cast<size_t>(sid)].needs_grad) {
                Tensor& D = grad_buf(sid);
                for (int64_t i = 0; i < A.n_rows; ++i) {
                    const double* arow = A.row(i);
                    const double* grow = G.row(i);
                    double s = 0.0;
                    for (int64_t j = 0; j < A.n_cols; ++j) s += arow[j] * grow[j];
                    D.data[static_cast<size_t>(i)] += s;
                }
            }
        };
    }
    return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: no parts");
    int64_t rows = value(parts.front()).n_rows;
    int64_t cols = 0;
    bool ng = false;
    for (Var p : parts) {
        check_same_tape(p);
        require(value(p).n_rows == rows, "concat_cols: row mismatch");
        cols += value(p).n_cols;
        ng = ng || node(p).needs_grad;
    }
    Tensor C(rows, cols);
    int64_t off = 0;
    for (Var p : parts) {
        const Tensor& P = value(p);
        for (int64_t i = 0; i < rows; ++i)
            std::copy(P.row(i), P.row(i) + P.n_cols, C.row(i) + off);
        off += P.n_cols;
    }

    Node n;
    n.owned = std::move(C);
    n.needs_grad = grad_enabled_ && ng;
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        std::vector<int> pids;
        for (Var p : parts) pids.push_back(p.id);
        int oid = out.id;
        on.back = [this, pids, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            int64_t off = 0;
            for (int pid : pids) {
                const Tensor& P = *nodes_[static_cast<size_t>(pid)].value;
                if (nodes_[static_cast<size_t>(pid)].needs_grad) {
                    Tensor& D = grad_buf(pid);
                    for (int64_t i = 0; i < G.n_rows; ++i) {
                        const double* grow = G.row(i) + off;
                        double* drow = D.row(i);
                        for (int64_t j = 0; j < P.n_cols; ++j) drow[j] += grow[j];
                    }
                }
                off += P.n_cols;
            }
        };
    }
    return out;
}

Var Tape::gather_rows(Var table, std::vector<int> rows) {
    check_same_tape(table);
    const Tensor& T = value(table);
    for (int r : rows)
        require(r >= 0 && r < T.n_rows, "gather_rows: row index out of range");
    Tensor C(static_cast<int64_t>(rows.size()), T.n_cols);
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(T.row(rows[i]), T.row(rows[i]) + T.n_cols, C.row(static_cast<int64_t>(i)));

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(table).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int tid = table.id, oid = out.id;
        auto idx = std::make_shared<std::vector<int>>(std::move(rows));
        on.back = [this, tid, oid, idx]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            Node& tn = nodes_[static_cast<size_t>(tid)];
            if (tn.is_table) {
                for (size_t i = 0; i < idx->size(); ++i) {
                    RowGrad rg;
                    rg.param = tn.param_id;
                    rg.row = (*idx)[i];
                    rg.grad.assign(G.row(static_cast<int64_t>(i)),
                                   G.row(static_cast<int64_t>(i)) + G.n_cols);
                    row_grads_.push_back(std::move(rg));
                }
            } else {
                Tensor& D = grad_buf(tid);
                for (size_t i = 0; i < idx->size(); ++i) {
                    const double* grow = G.row(static_cast<int64_t>(i));
                    double* drow = D.row((*idx)[i]);
                    for (int64_t j = 0; j < G.n_cols; ++j) drow[j] += grow[j];
                }
            }
        };
    }
    return out;
}

Var Tape::row_dot(Var a, Var b) {
    check_same_tape(a);
    check_same_tape(b);
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "row_dot: shape mismatch");
    Tensor C(A.n_rows, 1);
    for (int64_t i = 0; i < A.n_rows; ++i) {
        const double* arow = A.row(i);
        const double* brow = B.row(i);
        double s = 0.0;
        for (int64_t j = 0; j < A.n_cols; ++j) s += arow[j] * brow[j];
        C.data[static_cast<size_t>(i)] = s;
    }
    ensure_finite(C, "row_dot (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad, node(b).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, bid = b.id, oid = out.id;
        on.back = [this, aid, bid, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            const Tensor& A = *nodes_[static_cast<size_t>(aid)].value;
            const Tensor& B = *nodes_[static_cast<size_t>(bid)].value;
            if (nodes_[static_cast<size_t>(aid)].needs_grad) {
                Tensor& D = grad_buf(aid);
                for (int64_t i = 0; i < A.n_rows; ++i) {
                    double g = G.data[static_cast<size_t>(i)];
                    const double* brow = B.row(i);
                    double* drow = D.row(i);
                    for (int64_t j = 0; j < A.n_cols; ++j) drow[j] += g * brow[j];
                }
            }
            if (nodes_[static_cast<size_t>(bid)].needs_grad) {
                Tensor& D = grad_buf(bid);
                for (int64_t i = 0; i < A.n_rows; ++i) {
                    double g = G.data[static_cast<size_t>(i)];
                    const double* arow = A.row(i);
                    double* drow = D.row(i);
                    for (int64_t j = 0; j < A.n_cols; ++j) drow[j] += g * arow[j];
                }
            }
        };
    }
    return out;
}

Var Tape::leaky_relu(Var a, double slope) {
    check_same_tape(a);
    Tensor C = value(a);
    for (double& v : C.data) v = v > 0.0 ? v : slope * v;
    ensure_finite(C, "leaky_relu (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, oid = out.id;
        on.back = [this, aid, oid, slope]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            const Tensor& A = *nodes_[static_cast<size_t>(aid)].value;
            Tensor& D = grad_buf(aid);
            for (size_t i = 0; i < D.data.size(); ++i)
                D.data[i] += (A.data[i] > 0.0 ? 1.0 : slope) * G.data[i];
        };
    }
    return out;
}

Var Tape::elu(Var a) {
    check_same_tape(a);
    Tensor C = value(a);
    for (double& v : C.data) v = v > 0.0 ? v : std::expm1(v);
    ensure_finite(C, "elu (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, oid = out.id;
        on.back = [this, aid, oid]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            const Tensor& A = *nodes_[static_cast<size_t>(aid)].value;
            const Tensor& C = nodes_[static_cast<size_t>(oid)].owned;
            Tensor& D = grad_buf(aid);
            // d/dx elu = 1 for x > 0, exp(x) = elu(x) + 1 otherwise.
            for (size_t i = 0; i < D.data.size(); ++i)
                D.data[i] += (A.data[i] > 0.0 ? 1.0 : C.data[i] + 1.0) * G.data[i];
        };
    }
    return out;
}

Var Tape::segment_softmax(Var logits, std::shared_ptr<const std::vector<int>> offsets) {
    check_same_tape(logits);
    const Tensor& L = value(logits);
    require(L.n_cols == 1, "segment_softmax: logits must be rows x 1");
    require(!offsets->empty() && offsets->back() == L.n_rows,
            "segment_softmax: offsets do not cover rows");
    Tensor P(L.n_rows, 1);
    for (size_t s = 0; s + 1 < offsets->size(); ++s) {
        int b = (*offsets)[s], e = (*offsets)[s + 1];
        if (b == e) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (int i = b; i < e; ++i) m = std::max(m, L.data[static_cast<size_t>(i)]);
        double z = 0.0;
        for (int i = b; i < e; ++i) {
            double ev = std::exp(L.data[static_cast<size_t>(i)] - m);
            P.data[static_cast<size_t>(i)] = ev;
            z += ev;
        }
        for (int i = b; i < e; ++i) P.data[static_cast<size_t>(i)] /= z;
    }
    ensure_finite(P, "segment_softmax (" + context_ + ")");

    Node n;
    n.owned = std::move(P);
    n.needs_grad = want_grad(*this, {node(logits).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int lid = logits.id, oid = out.id;
        on.back = [this, lid, oid, offsets]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            const Tensor& P = nodes_[static_cast<size_t>(oid)].owned;
            Tensor& D = grad_buf(lid);
            for (size_t s = 0; s + 1 < offsets->size(); ++s) {
                int b = (*offsets)[s], e = (*offsets)[s + 1];
                double dot = 0.0;
                for (int i = b; i < e; ++i)
                    dot += P.data[static_cast<size_t>(i)] * G.data[static_cast<size_t>(i)];
                for (int i = b; i < e; ++i)
                    D.data[static_cast<size_t>(i)] +=
                        P.data[static_cast<size_t>(i)] * (G.data[static_cast<size_t>(i)] - dot);
            }
        };
    }
    return out;
}

Var Tape::segment_sum_rows(Var a, std::shared_ptr<const std::vector<int>> offsets) {
    check_same_tape(a);
    const Tensor& A = value(a);
    require(!offsets->empty() && offsets->back() == A.n_rows,
            "segment_sum_rows: offsets do not cover rows");
    int64_t n_seg = static_cast<int64_t>(offsets->size()) - 1;
    Tensor C(n_seg, A.n_cols);
    for (int64_t s = 0; s < n_seg; ++s) {
        double* crow = C.row(s);
        for (int i = (*offsets)[static_cast<size_t>(s)]; i < (*offsets)[static_cast<size_t>(s) + 1]; ++i) {
            const double* arow = A.row(i);
            for (int64_t j = 0; j < A.n_cols; ++j) crow[j] += arow[j];
        }
    }
    ensure_finite(C, "segment_sum_rows (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(a).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = a.id, oid = out.id;
        on.back = [this, aid, oid, offsets]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            Tensor& D = grad_buf(aid);
            for (int64_t s = 0; s + 1 < static_cast<int64_t>(offsets->size()); ++s) {
                const double* grow = G.row(s);
                for (int i = (*offsets)[static_cast<size_t>(s)];
                     i < (*offsets)[static_cast<size_t>(s) + 1]; ++i) {
                    double* drow = D.row(i);
                    for (int64_t j = 0; j < G.n_cols; ++j) drow[j] += grow[j];
                }
            }
        };
    }
    return out;
}

Var Tape::cross_entropy_mean(Var logits, std::vector<int> targets) {
    check_same_tape(logits);
    const Tensor& L = value(logits);
    require(static_cast<int64_t>(targets.size()) == L.n_rows, "cross_entropy_mean: target count mismatch");
    require(L.n_rows > 0, "cross_entropy_mean: no rows");
    for (int t : targets)
        require(t >= 0 && t < L.n_cols, "cross_entropy_mean: target class out of range");

    auto probs = std::make_shared<Tensor>(L.n_rows, L.n_cols);
    double loss = 0.0;
    for (int64_t i = 0; i < L.n_rows; ++i) {
        const double* lrow = L.row(i);
        double m = lrow[0];
        for (int64_t j = 1; j < L.n_cols; ++j) m = std::max(m, lrow[j]);
        double z = 0.0;
        double* prow = probs->row(i);
        for (int64_t j = 0; j < L.n_cols; ++j) {
            prow[j] = std::exp(lrow[j] - m);
            z += prow[j];
        }
        for (int64_t j = 0; j < L.n_cols; ++j) prow[j] /= z;
        loss += m + std::log(z) - lrow[targets[static_cast<size_t>(i)]];
    }
    loss /= static_cast<double>(L.n_rows);

    Node n;
    n.owned = Tensor::scalar(loss);
    ensure_finite(n.owned, "cross_entropy_mean (" + context_ + ")");
    n.needs_grad = want_grad(*this, {node(logits).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int lid = logits.id, oid = out.id;
        auto tgt = std::make_shared<std::vector<int>>(std::move(targets));
        on.back = [this, lid, oid, probs, tgt]() {
            double g = nodes_[static_cast<size_t>(oid)].grad.data[0] /
                       static_cast<double>(probs->n_rows);
            Tensor& D = grad_buf(lid);
            for (int64_t i = 0; i < probs->n_rows; ++i) {
                const double* prow = probs->row(i);
                double* drow = D.row(i);
                for (int64_t j = 0; j < probs->n_cols; ++j) drow[j] += g * prow[j];
                drow[(*tgt)[static_cast<size_t>(i)]] -= g;
            }
        };
    }
    return out;
}

Var Tape::mse_mean(Var pred, Tensor target) {
    check_same_tape(pred);
    const Tensor& P = value(pred);
    require(P.same_shape(target), "mse_mean: shape mismatch");
    require(P.numel() > 0, "mse_mean: empty tensor");
    double loss = 0.0;
    for (size_t i = 0; i < P.data.size(); ++i) {
        double d = P.data[i] - target.data[i];
        loss += d * d;
    }
    loss /= static_cast<double>(P.numel());

    Node n;
    n.owned = Tensor::scalar(loss);
    ensure_finite(n.owned, "mse_mean (" + context_ + ")");
    n.needs_grad = want_grad(*this, {node(pred).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int pid = pred.id, oid = out.id;
        auto tgt = std::make_shared<Tensor>(std::move(target));
        on.back = [this, pid, oid, tgt]() {
            double g = 2.0 * nodes_[static_cast<size_t>(oid)].grad.data[0] /
                       static_cast<double>(tgt->numel());
            const Tensor& P = *nodes_[static_cast<size_t>(pid)].value;
            Tensor& D = grad_buf(pid);
            for (size_t i = 0; i < D.data.size(); ++i)
                D.data[i] += g * (P.data[i] - tgt->data[i]);
        };
    }
    return out;
}

Var Tape::add_scaled(Var acc, Var x, double w) {
    check_same_tape(acc);
    check_same_tape(x);
    const Tensor& A = value(acc);
    const Tensor& X = value(x);
    require(A.same_shape(X), "add_scaled: shape mismatch");
    Tensor C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] += w * X.data[i];
    ensure_finite(C, "add_scaled (" + context_ + ")");

    Node n;
    n.owned = std::move(C);
    n.needs_grad = want_grad(*this, {node(acc).needs_grad, node(x).needs_grad});
    Var out = push(std::move(n));
    Node& on = node(out);
    on.value = &on.owned;
    if (on.needs_grad) {
        int aid = acc.id, xid = x.id, oid = out.id;
        on.back = [this, aid, xid, oid, w]() {
            const Tensor& G = nodes_[static_cast<size_t>(oid)].grad;
            if (nodes_[static_cast<size_t>(aid)].needs_grad) {
                Tensor& D = grad_buf(aid);
                for (size_t i = 0; i < D.data.size(); ++i) D.data[i] += G.data[i];
            }
            if (nodes_[static_cast<size_t>(xid)].needs_grad) {
                Tensor& D = grad_buf(xid);
                for (size_t i = 0; i < D.data.size(); ++i) D.data[i] += w * G.data[i];
            }
        };
    }
    return out;
}

void Tape::accumulate_param_grads(std::vector<Tensor>& acc) const {
    for (const Node& n : nodes_) {
        if (n.param_id < 0 || n.is_table || n.grad.numel() == 0) continue;
        Tensor& dst = acc[static_cast<size_t>(n.param_id)];
        require(dst.same_shape(n.grad), "accumulate_param_grads: shape mismatch");
        for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += n.grad.data[i];
    }
    for (const RowGrad& rg : row_grads_) {
        Tensor& dst = acc[static_cast<size_t>(rg.param)];
        double* drow = dst.row(rg.row);
        for (size_t j = 0; j < rg.grad.size(); ++j) drow[j] += rg.grad[j];
    }
}

std::vector<std::pair<int, Tensor>> Tape::take_dense_param_grads() {
    std::vector<std::pair<int, Tensor>> out;
    for (Node& n : nodes_) {
        if (n.param_id < 0 || n.is_table || n.grad.numel() == 0) continue;
        out.emplace_back(n.param_id, std::move(n.grad));
    }
    return out;
}

void Tape::backward(Var loss, double seed) {
    check_same_tape(loss);
    require(grad_enabled_, "tape: gradients disabled");
    const Tensor& L = value(loss);
    require(L.numel() == 1, "backward: loss must be scalar");
    grad_buf(loss.id).data[0] += seed;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.back && n.grad.numel() != 0) n.back();
    }
}

}  // namespace gvdoc
