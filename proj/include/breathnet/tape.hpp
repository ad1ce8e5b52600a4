#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "breathnet/tensor.hpp"

namespace breathnet {

// Handle into a Tape's node table.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

struct SincConvSpec {
    int kernel_len = 129;  // odd
    int stride = 160;
    double sample_rate = 16000.0;
};

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormState(int channels = 0) {
        if (channels > 0) {
            running_mean = Tensor(1, channels);
            running_var = Tensor::full(1, channels, 1.0);
        }
    }
};

// Reverse-mode tape. Every kernel records a backward closure at execution
// time; backward() replays the closures in exact reverse execution order.
// Kernels are pure functions of their inputs, single-threaded per tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var input(Tensor value, bool requires_grad = false);
    Var constant(Tensor value) { return input(std::move(value), false); }

    const Tensor& val(Var v) const;
    Tensor grad(Var v) const;  // zeros if the node never received gradient
    bool needs_grad(Var v) const;

    // Seeds d(loss)/d(loss) = 1 and replays all recorded ops backward.
    void backward(Var scalar_loss);

    void set_check_finite(bool on) { check_finite_ = on; }
    std::size_t op_count() const { return ops_.size(); }

    // ---- kernels ----
    Var matmul(Var a, Var b);                   // [m×k]·[k×n]
    Var matmul_nt(Var a, Var b);                // [m×k]·[n×k]ᵀ -> [m×n]
    Var affine(Var x, Var w);                   // matmul, shape-checked as x·W
    Var affine(Var x, Var w, Var bias);         // x·W + bias (bias [1×n])
    Var add(Var a, Var b);                      // elementwise, same shape
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                      // Hadamard
    Var add_rowvec(Var a, Var b);               // [m×n] + [1×n] broadcast
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var scalar_mul(Var x, Var s);               // s is [1×1]
    Var sigmoid(Var a);
    Var relu(Var a);
    Var selu(Var a);
    Var tanh_act(Var a);
    Var softplus(Var a);
    Var log_clamped(Var a, double floor);       // ln(max(x, floor)), clamp logged
    Var rowwise_softmax(Var a, double scale);   // softmax(scale · row)
    Var rowwise_logsumexp(Var a);               // [r×c] -> [r×1]
    Var mean_rows(Var a);                       // [r×c] -> [1×c]
    Var mean_all(Var a);                        // -> [1×1]
    Var sum_all(Var a);                         // -> [1×1]
    Var transpose(Var a);
    Var slice_rows(Var a, int r0, int r1);      // half-open
    Var slice_cols(Var a, int c0, int c1);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var shift_rows(Var a, int by);              // rows move down, zero fill
    Var select_element(Var a, int r, int c);    // -> [1×1]
    Var cosine_similarity(Var a, Var b);        // row vectors -> [1×1]
    Var adaptive_maxpool_cols(Var a, int out_cols);

    // Column-wise batch normalization over the row axis. Training mode uses
    // batch statistics and updates `state`; inference mode reads them.
    Var batchnorm_cols(Var x, Var gamma, Var beta, BatchNormState& state, bool training);

    // Learnable sinc band-pass filterbank applied to a fixed waveform.
    // f_low_hz / band_hz are [1×F]; effective cutoffs f1=|f_low|,
    // f2=min(f1+|band|, nyquist). Gradients flow to both parameter rows.
    Var sinc_conv(const std::vector<double>& wave, Var f_low_hz, Var band_hz, const SincConvSpec& spec);

private:
    struct Node {
        Tensor value;
        Tensor grad;  // lazily sized on first accumulation
        bool requires_grad = false;
    };

    struct BackOp {
        std::function<void(Tape&)> fn;
        const char* name;
    };

    Var make_node(Tensor value, bool requires_grad, const char* kernel);
    void record(const char* name, std::function<void(Tape&)> fn) { ops_.push_back({std::move(fn), name}); }
    Tensor& grad_mut(int id);
    bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }
    const Tensor& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool rg(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    void check_var(Var v, const char* kernel) const;

    std::deque<Node> nodes_;  // deque: node references stay valid as the tape grows
    std::vector<BackOp> ops_;
    bool check_finite_ = false;
    bool backward_done_ = false;
};

}  // namespace breathnet
