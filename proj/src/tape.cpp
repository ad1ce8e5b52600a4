#include "breathnet/tape.hpp"

#include <algorithm>
#include <cmath>

#include "breathnet/errors.hpp"
#include "breathnet/events.hpp"

namespace breathnet {

namespace {

constexpr double kSeluAlpha = 1.6732632423543772;
constexpr double kSeluScale = 1.0507009873554805;
constexpr double kPi = 3.14159265358979323846;

}  // namespace

Var Tape::input(Tensor value, bool requires_grad) {
    if (value.empty()) throw config_error("tape input must be non-empty");
    return make_node(std::move(value), requires_grad, "input");
}

const Tensor& Tape::val(Var v) const {
    check_var(v, "val");
    return nodes_[static_cast<std::size_t>(v.id)].value;
}

Tensor Tape::grad(Var v) const {
    check_var(v, "grad");
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.empty()) return Tensor(n.value.shape());
    return n.grad;
}

bool Tape::needs_grad(Var v) const {
    check_var(v, "needs_grad");
    return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
}

void Tape::backward(Var scalar_loss) {
    check_var(scalar_loss, "backward");
    if (backward_done_) throw numeric_error("backward() called twice on the same tape");
    const Tensor& out = value_of(scalar_loss.id);
    if (out.size() != 1) {
        throw config_error("backward() requires a scalar loss, got shape " + out.shape_str());
    }
    backward_done_ = true;
    grad_mut(scalar_loss.id)[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        it->fn(*this);
    }
}

Var Tape::make_node(Tensor value, bool requires_grad, const char* kernel) {
    if (check_finite_ && !value.all_finite()) {
        throw numeric_error(std::string("non-finite output from kernel '") + kernel + "'");
    }
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_mut(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::check_var(Var v, const char* kernel) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        throw config_error(std::string("invalid Var passed to '") + kernel + "'");
    }
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
    check_var(a, "matmul");
    check_var(b, "matmul");
    const Tensor& A = value_of(a.id);
    const Tensor& B = value_of(b.id);
    const int m = A.rows(), k = A.cols(), k2 = B.rows(), n = B.cols();
    if (k != k2) {
        throw config_error("matmul inner dimensions disagree: " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor Y(m, n);
    {
        const double* ap = A.data().data();
        const double* bp = B.data().data();
        double* yp = Y.data().data();
        for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p) {
                const double av = ap[static_cast<std::size_t>(i) * k + p];
                if (av == 0.0) continue;
                const double* brow = bp + static_cast<std::size_t>(p) * n;
                double* yrow = yp + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) yrow[j] += av * brow[j];
            }
        }
    }
    const bool needs = rg(a.id) || rg(b.id);
    Var out = make_node(std::move(Y), needs, "matmul");
    if (needs) {
        record("matmul", [a, b, out, m, k, n](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const double* gp = t.grad_mut(out.id).data().data();
            const double* ap = t.value_of(a.id).data().data();
            const double* bp = t.value_of(b.id).data().data();
            if (t.rg(a.id)) {
                double* dap = t.grad_mut(a.id).data().data();
                // dA = G · Bᵀ
                for (int i = 0; i < m; ++i) {
                    const double* grow = gp + static_cast<std::size_t>(i) * n;
                    double* darow = dap + static_cast<std::size_t>(i) * k;
                    for (int p = 0; p < k; ++p) {
                        const double* brow = bp + static_cast<std::size_t>(p) * n;
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        darow[p] += acc;
                    }
                }
            }
            if (t.rg(b.id)) {
                double* dbp = t.grad_mut(b.id).data().data();
                // dB = Aᵀ · G
                for (int i = 0; i < m; ++i) {
                    const double* grow = gp + static_cast<std::size_t>(i) * n;
                    const double* arow = ap + static_cast<std::size_t>(i) * k;
                    for (int p = 0; p < k; ++p) {
                        const double av = arow[p];
                        if (av == 0.0) continue;
                        double* dbrow = dbp + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

Var Tape::matmul_nt(Var a, Var b) {
    check_var(a, "matmul_nt");
    check_var(b, "matmul_nt");
    const Tensor& A = value_of(a.id);
    const Tensor& B = value_of(b.id);
    const int m = A.rows(), k = A.cols(), n = B.rows();
    if (k != B.cols()) {
        throw config_error("matmul_nt inner dimensions disagree: " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor Y(m, n);
    {
        const double* ap = A.data().data();
        const double* bp = B.data().data();
        double* yp = Y.data().data();
        for (int i = 0; i < m; ++i) {
            const double* arow = ap + static_cast<std::size_t>(i) * k;
            double* yrow = yp + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const double* brow = bp + static_cast<std::size_t>(j) * k;
                double acc = 0.0;
                for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
                yrow[j] = acc;
            }
        }
    }
    const bool needs = rg(a.id) || rg(b.id);
    Var out = make_node(std::move(Y), needs, "matmul_nt");
    if (needs) {
        record("matmul_nt", [a, b, out, m, k, n](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const double* gp = t.grad_mut(out.id).data().data();
            const double* ap = t.value_of(a.id).data().data();
            const double* bp = t.value_of(b.id).data().data();
            if (t.rg(a.id)) {
                double* dap = t.grad_mut(a.id).data().data();
                // dA = G · B
                for (int i = 0; i < m; ++i) {
                    const double* grow = gp + static_cast<std::size_t>(i) * n;
                    double* darow = dap + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double g = grow[j];
                        if (g == 0.0) continue;
                        const double* brow = bp + static_cast<std::size_t>(j) * k;
                        for (int p = 0; p < k; ++p) darow[p] += g * brow[p];
                    }
                }
            }
            if (t.rg(b.id)) {
                double* dbp = t.grad_mut(b.id).data().data();
                // dB = Gᵀ · A
                for (int i = 0; i < m; ++i) {
                    const double* grow = gp + static_cast<std::size_t>(i) * n;
                    const double* arow = ap + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double g = grow[j];
                        if (g == 0.0) continue;
                        double* dbrow = dbp + static_cast<std::size_t>(j) * k;
                        for (int p = 0; p < k; ++p) dbrow[p] += g * arow[p];
                    }
                }
            }
        });
    }
    return out;
}

Var Tape::affine(Var x, Var w) {
    check_var(x, "affine");
    check_var(w, "affine");
    const Tensor& X = value_of(x.id);
    const Tensor& W = value_of(w.id);
    if (X.cols() != W.rows()) {
        throw config_error("affine: input " + X.shape_str() + " incompatible with weights " + W.shape_str());
    }
    return matmul(x, w);
}

Var Tape::affine(Var x, Var w, Var bias) {
    Var y = affine(x, w);
    return add_rowvec(y, bias);
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
    check_var(a, "add");
    check_var(b, "add");
    const Tensor& A = value_of(a.id);
    const Tensor& B = value_of(b.id);
    if (!A.same_shape(B)) {
        throw config_error("add shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor Y = A;
    for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] += B[i];
    const bool needs = rg(a.id) || rg(b.id);
    Var out = make_node(std::move(Y), needs, "add");
    if (needs) {
        record("add", [a, b, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            if (t.rg(a.id)) {
                Tensor& dA = t.grad_mut(a.id);
                for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += G[i];
            }
            if (t.rg(b.id)) {
                Tensor& dB = t.grad_mut(b.id);
                for (std::int64_t i = 0; i < G.size(); ++i) dB[i] += G[i];
            }
        });
    }
    return out;
}

Var Tape::sub(Var a, Var b) {
    return add(a, scale(b, -1.0));
}

Var Tape::mul(Var a, Var b) {
    check_var(a, "mul");
    check_var(b, "mul");
    const Tensor& A = value_of(a.id);
    const Tensor& B = value_of(b.id);
    if (!A.same_shape(B)) {
        throw config_error("mul shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor Y = A;
    for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] *= B[i];
    const bool needs = rg(a.id) || rg(b.id);
    Var out = make_node(std::move(Y), needs, "mul");
    if (needs) {
        record("mul", [a, b, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Av = t.value_of(a.id);
            const Tensor& Bv = t.value_of(b.id);
            if (t.rg(a.id)) {
                Tensor& dA = t.grad_mut(a.id);
                for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += G[i] * Bv[i];
            }
            if (t.rg(b.id)) {
                Tensor& dB = t.grad_mut(b.id);
                for (std::int64_t i = 0; i < G.size(); ++i) dB[i] += G[i] * Av[i];
            }
        });
    }
    return out;
}

Var Tape::add_rowvec(Var a, Var b) {
    check_var(a, "add_rowvec");
    check_var(b, "add_rowvec");
    const Tensor& A = value_of(a.id);
    const Tensor& B = value_of(b.id);
    if (B.rows() != 1 || B.cols() != A.cols()) {
        throw config_error("add_rowvec: bias " + B.shape_str() + " does not broadcast over " + A.shape_str());
    }
    const int rows = A.rows(), cols = A.cols();
    Tensor Y = A;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) Y.at(r, c) += B.at(0, c);
    const bool needs = rg(a.id) || rg(b.id);
    Var out = make_node(std::move(Y), needs, "add_rowvec");
    if (needs) {
        record("add_rowvec", [a, b, out, rows, cols](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            if (t.rg(a.id)) {
                Tensor& dA = t.grad_mut(a.id);
                for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += G[i];
            }
            if (t.rg(b.id)) {
                Tensor& dB = t.grad_mut(b.id);
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c) dB.at(0, c) += G.at(r, c);
            }
        });
    }
    return out;
}

Var Tape::scale(Var a, double c) {
    check_var(a, "scale");
    Tensor Y = value_of(a.id);
    for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] *= c;
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "scale");
    if (needs) {
        record("scale", [a, out, c](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += c * G[i];
        });
    }
    return out;
}

Var Tape::add_const(Var a, double c) {
    check_var(a, "add_const");
    Tensor Y = value_of(a.id);
    for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] += c;
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "add_const");
    if (needs) {
        record("add_const", [a, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += G[i];
        });
    }
    return out;
}

Var Tape::scalar_mul(Var x, Var s) {
    check_var(x, "scalar_mul");
    check_var(s, "scalar_mul");
    const Tensor& X = value_of(x.id);
    const Tensor& S = value_of(s.id);
    if (S.size() != 1) throw config_error("scalar_mul: multiplier must be [1x1], got " + S.shape_str());
    const double sv = S[0];
    Tensor Y = X;
    for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] *= sv;
    const bool needs = rg(x.id) || rg(s.id);
    Var out = make_node(std::move(Y), needs, "scalar_mul");
    if (needs) {
        record("scalar_mul", [x, s, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Xv = t.value_of(x.id);
            const double sval = t.value_of(s.id)[0];
            if (t.rg(x.id)) {
                Tensor& dX = t.grad_mut(x.id);
                for (std::int64_t i = 0; i < G.size(); ++i) dX[i] += sval * G[i];
            }
            if (t.rg(s.id)) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < G.size(); ++i) acc += G[i] * Xv[i];
                t.grad_mut(s.id)[0] += acc;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

Var Tape::sigmoid(Var a) {
    check_var(a, "sigmoid");
    Tensor Y = value_of(a.id);
    for (std::int64_t i = 0; i < Y.size(); ++i) {
        const double x = Y[i];
        Y[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "sigmoid");
    if (needs) {
        record("sigmoid", [a, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Yv = t.value_of(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += G[i] * Yv[i] * (1.0 - Yv[i]);
        });
    }
    return out;
}

Var Tape::relu(Var a) {
    check_var(a, "relu");
    Tensor Y = value_of(a.id);
    for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] = Y[i] > 0.0 ? Y[i] : 0.0;
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "relu");
    if (needs) {
        record("relu", [a, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Xv = t.value_of(a.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += Xv[i] > 0.0 ? G[i] : 0.0;
        });
    }
    return out;
}

Var Tape::selu(Var a) {
    check_var(a, "selu");
    Tensor Y = value_of(a.id);
    for (std::int64_t i = 0; i < Y.size(); ++i) {
        const double x = Y[i];
        Y[i] = kSeluScale * (x > 0.0 ? x : kSeluAlpha * (std::exp(x) - 1.0));
    }
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "selu");
    if (needs) {
        record("selu", [a, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Xv = t.value_of(a.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) {
                const double x = Xv[i];
                const double d = x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
                dA[i] += G[i] * d;
            }
        });
    }
    return out;
}

Var Tape::tanh_act(Var a) {
    check_var(a, "tanh");
    Tensor Y = value_of(a.id);
    for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] = std::tanh(Y[i]);
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "tanh");
    if (needs) {
        record("tanh", [a, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Yv = t.value_of(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) dA[i] += G[i] * (1.0 - Yv[i] * Yv[i]);
        });
    }
    return out;
}

Var Tape::softplus(Var a) {
    check_var(a, "softplus");
    Tensor Y = value_of(a.id);
    for (std::int64_t i = 0; i < Y.size(); ++i) {
        const double x = Y[i];
        Y[i] = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "softplus");
    if (needs) {
        record("softplus", [a, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Xv = t.value_of(a.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) {
                const double x = Xv[i];
                const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                dA[i] += G[i] * s;
            }
        });
    }
    return out;
}

Var Tape::log_clamped(Var a, double floor) {
    check_var(a, "log_clamped");
    const Tensor& X = value_of(a.id);
    Tensor Y = X;
    long clamped = 0;
    for (std::int64_t i = 0; i < Y.size(); ++i) {
        if (Y[i] < floor) {
            Y[i] = floor;
            ++clamped;
        }
        Y[i] = std::log(Y[i]);
    }
    if (clamped > 0) EventLog::instance().bump("log_clamp", clamped);
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "log_clamped");
    if (needs) {
        record("log_clamped", [a, out, floor](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Xv = t.value_of(a.id);
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < G.size(); ++i) {
                if (Xv[i] > floor) dA[i] += G[i] / Xv[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row reductions / softmax
// ---------------------------------------------------------------------------

Var Tape::rowwise_softmax(Var a, double scl) {
    check_var(a, "rowwise_softmax");
    const Tensor& X = value_of(a.id);
    const int R = X.rows(), C = X.cols();
    if (C < 1) throw config_error("rowwise_softmax: empty rows");
    Tensor Y(R, C);
    for (int r = 0; r < R; ++r) {
        double mx = -1e308;
        for (int c = 0; c < C; ++c) mx = std::max(mx, scl * X.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < C; ++c) {
            const double e = std::exp(scl * X.at(r, c) - mx);
            Y.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < C; ++c) Y.at(r, c) /= sum;
    }
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "rowwise_softmax");
    if (needs) {
        record("rowwise_softmax", [a, out, scl, R, C](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Yv = t.value_of(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = 0; r < R; ++r) {
                double dot = 0.0;
                for (int c = 0; c < C; ++c) dot += G.at(r, c) * Yv.at(r, c);
                for (int c = 0; c < C; ++c) dA.at(r, c) += scl * Yv.at(r, c) * (G.at(r, c) - dot);
            }
        });
    }
    return out;
}

Var Tape::rowwise_logsumexp(Var a) {
    check_var(a, "rowwise_logsumexp");
    const Tensor& X = value_of(a.id);
    const int R = X.rows(), C = X.cols();
    Tensor Y(R, 1);
    for (int r = 0; r < R; ++r) {
        double mx = -1e308;
        for (int c = 0; c < C; ++c) mx = std::max(mx, X.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(X.at(r, c) - mx);
        Y.at(r, 0) = mx + std::log(sum);
    }
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "rowwise_logsumexp");
    if (needs) {
        record("rowwise_logsumexp", [a, out, R, C](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Xv = t.value_of(a.id);
            const Tensor& Yv = t.value_of(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = 0; r < R; ++r) {
                const double g = G.at(r, 0);
                if (g == 0.0) continue;
                for (int c = 0; c < C; ++c) dA.at(r, c) += g * std::exp(Xv.at(r, c) - Yv.at(r, 0));
            }
        });
    }
    return out;
}

Var Tape::mean_rows(Var a) {
    check_var(a, "mean_rows");
    const Tensor& X = value_of(a.id);
    const int R = X.rows(), C = X.cols();
    Tensor Y(1, C);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) Y.at(0, c) += X.at(r, c);
    for (int c = 0; c < C; ++c) Y.at(0, c) /= R;
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "mean_rows");
    if (needs) {
        record("mean_rows", [a, out, R, C](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = 0; r < R; ++r)
                for (int c = 0; c < C; ++c) dA.at(r, c) += G.at(0, c) / R;
        });
    }
    return out;
}

Var Tape::mean_all(Var a) {
    check_var(a, "mean_all");
    const Tensor& X = value_of(a.id);
    double acc = 0.0;
    for (std::int64_t i = 0; i < X.size(); ++i) acc += X[i];
    const double n = static_cast<double>(X.size());
    const bool needs = rg(a.id);
    Var out = make_node(Tensor::scalar(acc / n), needs, "mean_all");
    if (needs) {
        record("mean_all", [a, out, n](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const double g = t.grad_mut(out.id)[0] / n;
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < dA.size(); ++i) dA[i] += g;
        });
    }
    return out;
}

Var Tape::sum_all(Var a) {
    check_var(a, "sum_all");
    const Tensor& X = value_of(a.id);
    double acc = 0.0;
    for (std::int64_t i = 0; i < X.size(); ++i) acc += X[i];
    const bool needs = rg(a.id);
    Var out = make_node(Tensor::scalar(acc), needs, "sum_all");
    if (needs) {
        record("sum_all", [a, out](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const double g = t.grad_mut(out.id)[0];
            Tensor& dA = t.grad_mut(a.id);
            for (std::int64_t i = 0; i < dA.size(); ++i) dA[i] += g;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

Var Tape::transpose(Var a) {
    check_var(a, "transpose");
    const Tensor& X = value_of(a.id);
    const int R = X.rows(), C = X.cols();
    Tensor Y(C, R);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) Y.at(c, r) = X.at(r, c);
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "transpose");
    if (needs) {
        record("transpose", [a, out, R, C](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = 0; r < R; ++r)
                for (int c = 0; c < C; ++c) dA.at(r, c) += G.at(c, r);
        });
    }
    return out;
}

Var Tape::slice_rows(Var a, int r0, int r1) {
    check_var(a, "slice_rows");
    const Tensor& X = value_of(a.id);
    if (r0 < 0 || r1 > X.rows() || r0 >= r1) {
        throw config_error("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) + ") out of range for " + X.shape_str());
    }
    const int C = X.cols();
    Tensor Y(r1 - r0, C);
    for (int r = r0; r < r1; ++r)
        for (int c = 0; c < C; ++c) Y.at(r - r0, c) = X.at(r, c);
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "slice_rows");
    if (needs) {
        record("slice_rows", [a, out, r0, r1, C](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = r0; r < r1; ++r)
                for (int c = 0; c < C; ++c) dA.at(r, c) += G.at(r - r0, c);
        });
    }
    return out;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
    check_var(a, "slice_cols");
    const Tensor& X = value_of(a.id);
    if (c0 < 0 || c1 > X.cols() || c0 >= c1) {
        throw config_error("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) + ") out of range for " + X.shape_str());
    }
    const int R = X.rows();
    Tensor Y(R, c1 - c0);
    for (int r = 0; r < R; ++r)
        for (int c = c0; c < c1; ++c) Y.at(r, c - c0) = X.at(r, c);
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "slice_cols");
    if (needs) {
        record("slice_cols", [a, out, c0, c1, R](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = 0; r < R; ++r)
                for (int c = c0; c < c1; ++c) dA.at(r, c) += G.at(r, c - c0);
        });
    }
    return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw config_error("concat_rows: no parts");
    int rows = 0;
    const int C = value_of(parts[0].id).cols();
    bool needs = false;
    for (Var p : parts) {
        check_var(p, "concat_rows");
        const Tensor& P = value_of(p.id);
        if (P.cols() != C) throw config_error("concat_rows: column mismatch " + P.shape_str());
        rows += P.rows();
        needs = needs || rg(p.id);
    }
    Tensor Y(rows, C);
    int at = 0;
    for (Var p : parts) {
        const Tensor& P = value_of(p.id);
        for (int r = 0; r < P.rows(); ++r)
            for (int c = 0; c < C; ++c) Y.at(at + r, c) = P.at(r, c);
        at += P.rows();
    }
    Var out = make_node(std::move(Y), needs, "concat_rows");
    if (needs) {
        std::vector<Var> ps = parts;
        record("concat_rows", [ps, out, C](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            int off = 0;
            for (Var p : ps) {
                const int pr = t.value_of(p.id).rows();
                if (t.rg(p.id)) {
                    Tensor& dP = t.grad_mut(p.id);
                    for (int r = 0; r < pr; ++r)
                        for (int c = 0; c < C; ++c) dP.at(r, c) += G.at(off + r, c);
                }
                off += pr;
            }
        });
    }
    return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw config_error("concat_cols: no parts");
    int cols = 0;
    const int R = value_of(parts[0].id).rows();
    bool needs = false;
    for (Var p : parts) {
        check_var(p, "concat_cols");
        const Tensor& P = value_of(p.id);
        if (P.rows() != R) throw config_error("concat_cols: row mismatch " + P.shape_str());
        cols += P.cols();
        needs = needs || rg(p.id);
    }
    Tensor Y(R, cols);
    int at = 0;
    for (Var p : parts) {
        const Tensor& P = value_of(p.id);
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < P.cols(); ++c) Y.at(r, at + c) = P.at(r, c);
        at += P.cols();
    }
    Var out = make_node(std::move(Y), needs, "concat_cols");
    if (needs) {
        std::vector<Var> ps = parts;
        record("concat_cols", [ps, out, R](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            int off = 0;
            for (Var p : ps) {
                const int pc = t.value_of(p.id).cols();
                if (t.rg(p.id)) {
                    Tensor& dP = t.grad_mut(p.id);
                    for (int r = 0; r < R; ++r)
                        for (int c = 0; c < pc; ++c) dP.at(r, c) += G.at(r, off + c);
                }
                off += pc;
            }
        });
    }
    return out;
}

Var Tape::shift_rows(Var a, int by) {
    check_var(a, "shift_rows");
    if (by < 0) throw config_error("shift_rows: negative shift");
    const Tensor& X = value_of(a.id);
    const int R = X.rows(), C = X.cols();
    Tensor Y(R, C);
    for (int r = by; r < R; ++r)
        for (int c = 0; c < C; ++c) Y.at(r, c) = X.at(r - by, c);
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "shift_rows");
    if (needs) {
        record("shift_rows", [a, out, by, R, C](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = by; r < R; ++r)
                for (int c = 0; c < C; ++c) dA.at(r - by, c) += G.at(r, c);
        });
    }
    return out;
}

Var Tape::select_element(Var a, int r, int c) {
    check_var(a, "select_element");
    const Tensor& X = value_of(a.id);
    if (r < 0 || r >= X.rows() || c < 0 || c >= X.cols()) {
        throw config_error("select_element (" + std::to_string(r) + "," + std::to_string(c) + ") out of range for " + X.shape_str());
    }
    const bool needs = rg(a.id);
    Var out = make_node(Tensor::scalar(X.at(r, c)), needs, "select_element");
    if (needs) {
        record("select_element", [a, out, r, c](Tape& t) {
            if (!t.has_grad(out.id)) return;
            t.grad_mut(a.id).at(r, c) += t.grad_mut(out.id)[0];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cosine similarity (row vectors)
// ---------------------------------------------------------------------------

Var Tape::cosine_similarity(Var a, Var b) {
    check_var(a, "cosine_similarity");
    check_var(b, "cosine_similarity");
    const Tensor& A = value_of(a.id);
    const Tensor& B = value_of(b.id);
    if (!A.same_shape(B) || A.rows() != 1) {
        throw config_error("cosine_similarity expects matching row vectors, got " + A.shape_str() + " and " + B.shape_str());
    }
    const int n = A.cols();
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (int i = 0; i < n; ++i) {
        dot += A[i] * B[i];
        na2 += A[i] * A[i];
        nb2 += B[i] * B[i];
    }
    if (na2 == 0.0 || nb2 == 0.0) throw numeric_error("cosine_similarity: zero-norm input");
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    const double cosv = dot / (na * nb);
    const bool needs = rg(a.id) || rg(b.id);
    Var out = make_node(Tensor::scalar(cosv), needs, "cosine_similarity");
    if (needs) {
        record("cosine_similarity", [a, b, out, n, na, nb, cosv](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const double g = t.grad_mut(out.id)[0];
            if (g == 0.0) return;
            const Tensor& Av = t.value_of(a.id);
            const Tensor& Bv = t.value_of(b.id);
            if (t.rg(a.id)) {
                Tensor& dA = t.grad_mut(a.id);
                for (int i = 0; i < n; ++i) dA[i] += g * (Bv[i] / (na * nb) - cosv * Av[i] / (na * na));
            }
            if (t.rg(b.id)) {
                Tensor& dB = t.grad_mut(b.id);
                for (int i = 0; i < n; ++i) dB[i] += g * (Av[i] / (na * nb) - cosv * Bv[i] / (nb * nb));
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adaptive max pooling over the column (time) axis
// ---------------------------------------------------------------------------

Var Tape::adaptive_maxpool_cols(Var a, int out_cols) {
    check_var(a, "adaptive_maxpool_cols");
    const Tensor& X = value_of(a.id);
    const int R = X.rows(), C = X.cols();
    if (out_cols < 1 || out_cols > C) {
        throw config_error("adaptive_maxpool_cols: cannot pool " + std::to_string(C) + " columns into " + std::to_string(out_cols) + " bins");
    }
    Tensor Y(R, out_cols);
    std::vector<int> argmax(static_cast<std::size_t>(R) * out_cols);
    for (int r = 0; r < R; ++r) {
        for (int b = 0; b < out_cols; ++b) {
            const int c0 = static_cast<int>(static_cast<std::int64_t>(b) * C / out_cols);
            const int c1 = static_cast<int>(((static_cast<std::int64_t>(b) + 1) * C + out_cols - 1) / out_cols);
            double best = X.at(r, c0);
            int besti = c0;
            for (int c = c0 + 1; c < c1; ++c) {
                if (X.at(r, c) > best) {
                    best = X.at(r, c);
                    besti = c;
                }
            }
            Y.at(r, b) = best;
            argmax[static_cast<std::size_t>(r) * out_cols + b] = besti;
        }
    }
    const bool needs = rg(a.id);
    Var out = make_node(std::move(Y), needs, "adaptive_maxpool_cols");
    if (needs) {
        record("adaptive_maxpool_cols", [a, out, R, out_cols, argmax](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            Tensor& dA = t.grad_mut(a.id);
            for (int r = 0; r < R; ++r)
                for (int b = 0; b < out_cols; ++b) dA.at(r, argmax[static_cast<std::size_t>(r) * out_cols + b]) += G.at(r, b);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over columns
// ---------------------------------------------------------------------------

Var Tape::batchnorm_cols(Var x, Var gamma, Var beta, BatchNormState& state, bool training) {
    check_var(x, "batchnorm_cols");
    check_var(gamma, "batchnorm_cols");
    check_var(beta, "batchnorm_cols");
    const Tensor& X = value_of(x.id);
    const int R = X.rows(), C = X.cols();
    const Tensor& Gm = value_of(gamma.id);
    const Tensor& Bt = value_of(beta.id);
    if (Gm.size() != C || Bt.size() != C) {
        throw config_error("batchnorm_cols: gamma/beta size must match channel count " + std::to_string(C));
    }
    if (state.running_mean.size() != C) {
        throw config_error("batchnorm_cols: state has " + std::to_string(state.running_mean.size()) + " channels, input has " + std::to_string(C));
    }

    Tensor mean(1, C), var(1, C);
    if (training) {
        if (R < 2) throw config_error("batchnorm_cols: training mode needs at least 2 rows");
        for (int c = 0; c < C; ++c) {
            double m = 0.0;
            for (int r = 0; r < R; ++r) m += X.at(r, c);
            m /= R;
            double v = 0.0;
            for (int r = 0; r < R; ++r) {
                const double d = X.at(r, c) - m;
                v += d * d;
            }
            mean.at(0, c) = m;
            var.at(0, c) = v / R;  // biased, used for normalization
            // running stats keep the unbiased estimate
            state.running_mean.at(0, c) = (1.0 - state.momentum) * state.running_mean.at(0, c) + state.momentum * m;
            state.running_var.at(0, c) = (1.0 - state.momentum) * state.running_var.at(0, c) + state.momentum * (v / (R - 1));
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    Tensor xhat(R, C), Y(R, C);
    Tensor invstd(1, C);
    for (int c = 0; c < C; ++c) invstd.at(0, c) = 1.0 / std::sqrt(var.at(0, c) + state.eps);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) {
            xhat.at(r, c) = (X.at(r, c) - mean.at(0, c)) * invstd.at(0, c);
            Y.at(r, c) = Gm.at(0, c) * xhat.at(r, c) + Bt.at(0, c);
        }

    const bool needs = rg(x.id) || rg(gamma.id) || rg(beta.id);
    Var out = make_node(std::move(Y), needs, "batchnorm_cols");
    if (needs) {
        record("batchnorm_cols", [x, gamma, beta, out, R, C, xhat, invstd, training](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            const Tensor& Gm2 = t.value_of(gamma.id);
            if (t.rg(beta.id)) {
                Tensor& dB = t.grad_mut(beta.id);
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < C; ++c) dB.at(0, c) += G.at(r, c);
            }
            if (t.rg(gamma.id)) {
                Tensor& dG = t.grad_mut(gamma.id);
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < C; ++c) dG.at(0, c) += G.at(r, c) * xhat.at(r, c);
            }
            if (t.rg(x.id)) {
                Tensor& dX = t.grad_mut(x.id);
                if (training) {
                    for (int c = 0; c < C; ++c) {
                        double sum_g = 0.0, sum_gx = 0.0;
                        for (int r = 0; r < R; ++r) {
                            sum_g += G.at(r, c);
                            sum_gx += G.at(r, c) * xhat.at(r, c);
                        }
                        const double k = Gm2.at(0, c) * invstd.at(0, c) / R;
                        for (int r = 0; r < R; ++r) {
                            dX.at(r, c) += k * (R * G.at(r, c) - sum_g - xhat.at(r, c) * sum_gx);
                        }
                    }
                } else {
                    for (int r = 0; r < R; ++r)
                        for (int c = 0; c < C; ++c) dX.at(r, c) += G.at(r, c) * Gm2.at(0, c) * invstd.at(0, c);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sinc band-pass filterbank
// ---------------------------------------------------------------------------

Var Tape::sinc_conv(const std::vector<double>& wave, Var f_low_hz, Var band_hz, const SincConvSpec& spec) {
    check_var(f_low_hz, "sinc_conv");
    check_var(band_hz, "sinc_conv");
    const Tensor& FL = value_of(f_low_hz.id);
    const Tensor& BW = value_of(band_hz.id);
    if (FL.rows() != 1 || !FL.same_shape(BW)) {
        throw config_error("sinc_conv: cutoff rows must be matching [1xF], got " + FL.shape_str() + " and " + BW.shape_str());
    }
    if (spec.kernel_len < 3 || spec.kernel_len % 2 == 0) {
        throw config_error("sinc_conv: kernel length must be odd and >= 3");
    }
    const int K = spec.kernel_len;
    const int S = static_cast<int>(wave.size());
    if (S < K) throw data_error("sinc_conv: waveform shorter than kernel");
    const int F = FL.cols();
    const int M = (K - 1) / 2;
    const int Tp = (S - K) / spec.stride + 1;
    const double nyq = spec.sample_rate / 2.0;

    // Hamming window over the kernel span.
    std::vector<double> win(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) win[static_cast<std::size_t>(i)] = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (K - 1));

    // Effective (clamp-resolved) normalized cutoffs, plus the reparameterization
    // slopes d f1/d raw and d f2/d raw for backward.
    Tensor Y(F, Tp);
    std::vector<double> nf1(F), nf2(F), s1(F), sb(F);
    std::vector<char> clamped(F, 0);
    for (int f = 0; f < F; ++f) {
        const double raw_low = FL.at(0, f);
        const double raw_bw = BW.at(0, f);
        const double f1 = std::abs(raw_low);
        double f2 = f1 + std::abs(raw_bw);
        s1[f] = raw_low >= 0.0 ? 1.0 : -1.0;
        sb[f] = raw_bw >= 0.0 ? 1.0 : -1.0;
        if (f2 > nyq) {
            f2 = nyq;
            clamped[static_cast<std::size_t>(f)] = 1;
            log_event("sinc_cutoff_clamp");
        }
        nf1[f] = f1 / spec.sample_rate;
        nf2[f] = f2 / spec.sample_rate;

        std::vector<double> h(static_cast<std::size_t>(K));
        for (int i = 0; i < K; ++i) {
            const int n = i - M;
            double v;
            if (n == 0) {
                v = 2.0 * (nf2[f] - nf1[f]);
            } else {
                v = (std::sin(2.0 * kPi * nf2[f] * n) - std::sin(2.0 * kPi * nf1[f] * n)) / (kPi * n);
            }
            h[static_cast<std::size_t>(i)] = v * win[static_cast<std::size_t>(i)];
        }
        for (int t = 0; t < Tp; ++t) {
            const int base = t * spec.stride;
            double acc = 0.0;
            for (int i = 0; i < K; ++i) acc += h[static_cast<std::size_t>(i)] * wave[static_cast<std::size_t>(base + i)];
            Y.at(f, t) = acc;
        }
    }

    const bool needs = rg(f_low_hz.id) || rg(band_hz.id);
    Var out = make_node(std::move(Y), needs, "sinc_conv");
    if (needs) {
        const int stride = spec.stride;
        const double sr = spec.sample_rate;
        std::vector<double> wcopy = wave;
        record("sinc_conv", [f_low_hz, band_hz, out, wcopy, win, nf1, nf2, s1, sb, clamped, F, Tp, K, M, stride, sr](Tape& t) {
            if (!t.has_grad(out.id)) return;
            const Tensor& G = t.grad_mut(out.id);
            for (int f = 0; f < F; ++f) {
                // dL/dh[i] via the convolution adjoint
                std::vector<double> dh(static_cast<std::size_t>(K), 0.0);
                for (int tt = 0; tt < Tp; ++tt) {
                    const double g = G.at(f, tt);
                    if (g == 0.0) continue;
                    const int base = tt * stride;
                    for (int i = 0; i < K; ++i) dh[static_cast<std::size_t>(i)] += g * wcopy[static_cast<std::size_t>(base + i)];
                }
                // dh/d nf2 = 2 cos(2π nf2 n) · win;  dh/d nf1 = −2 cos(2π nf1 n) · win
                double d_nf1 = 0.0, d_nf2 = 0.0;
                for (int i = 0; i < K; ++i) {
                    const int n = i - M;
                    const double w = win[static_cast<std::size_t>(i)] * dh[static_cast<std::size_t>(i)];
                    d_nf2 += w * 2.0 * std::cos(2.0 * kPi * nf2[f] * n);
                    d_nf1 -= w * 2.0 * std::cos(2.0 * kPi * nf1[f] * n);
                }
                const double d_f1_hz = d_nf1 / sr;
                const double d_f2_hz = clamped[static_cast<std::size_t>(f)] ? 0.0 : d_nf2 / sr;
                // f1 = |raw_low|, f2 = f1 + |raw_bw|
                if (t.rg(f_low_hz.id)) t.grad_mut(f_low_hz.id).at(0, f) += s1[f] * (d_f1_hz + d_f2_hz);
                if (t.rg(band_hz.id)) t.grad_mut(band_hz.id).at(0, f) += sb[f] * d_f2_hz;
            }
        });
    }
    return out;
}

}  // namespace breathnet
