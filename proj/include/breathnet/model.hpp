#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "breathnet/breathmask.hpp"
#include "breathnet/classifier.hpp"
#include "breathnet/freq.hpp"
#include "breathnet/fusion.hpp"
#include "breathnet/losses.hpp"
#include "breathnet/temporal.hpp"

namespace breathnet {

struct ModelConfig {
    // temporal branch
    int encoder_layers = 4;
    int dim = 64;
    int window = 400;
    int hop = 320;
    int encoder_taps = 2;
    int film_hidden = 32;
    // frequency branch
    int sinc_filters = 16;
    int sinc_kernel = 65;
    int sinc_stride = 160;
    int freq_steps = 32;
    // fusion / classifier
    int heads = 4;
    int lstm_hidden1 = 64;
    int lstm_hidden2 = 32;
    // input contract
    int target_samples = 64600;
    double sample_rate = 16000.0;
    double pre_emphasis = 0.97;
    // ablation switches
    bool film_enabled = true;
    bool freq_enabled = true;

    bool operator==(const ModelConfig&) const = default;
};

// All trainable state plus the two non-parameter buffers (batch-norm
// running stats, bona fide center). Parameters are enumerated in a fixed
// order by for_each_param; that order defines checkpoint layout.
struct Model {
    ModelConfig cfg;

    // encoder: [layer][tap] weights and per-layer bias
    std::vector<std::vector<Tensor>> enc_w;
    std::vector<Tensor> enc_b;
    Tensor sls_u;   // [D×1]
    Tensor sls_b;   // [1×1]
    Tensor film_w1;  // [1×H]
    Tensor film_w2;  // [H×D]
    Tensor sinc_f_low;  // [1×F]
    Tensor sinc_band;   // [1×F]
    Tensor bn_gamma;    // [1×F]
    Tensor bn_beta;     // [1×F]
    Tensor proj_w;      // [F×D]
    Tensor proj_b;      // [1×D]
    Tensor att_wq, att_wk, att_wv, att_wo;  // [D×D]
    Tensor l1f_wx, l1f_wh, l1f_b;
    Tensor l1b_wx, l1b_wh, l1b_b;
    Tensor l2f_wx, l2f_wh, l2f_b;
    Tensor l2b_wx, l2b_wh, l2b_b;
    Tensor head_w;  // [2·h2×2]
    Tensor head_b;  // [1×2]

    BatchNormState bn;
    CenterState center;

    static Model init(const ModelConfig& cfg, std::uint64_t seed);

    // Fixed-order enumeration of every parameter tensor. `encoder_group`
    // marks tensors trained at the reduced encoder learning rate.
    void for_each_param(const std::function<void(const std::string&, Tensor&, bool encoder_group)>& fn);
    void for_each_param(const std::function<void(const std::string&, const Tensor&, bool encoder_group)>& fn) const;
};

// Per-tape bindings of the model parameters.
struct BoundModel {
    EncoderVars encoder;
    Var sls_u, sls_b;
    Var film_w1, film_w2;
    FreqVars freq;
    AttentionVars attention;
    BiLstmStackVars lstm;
};

BoundModel bind_model(Tape& tape, const Model& model, bool trainable);

// Reads parameter gradients back in for_each_param order.
std::vector<Tensor> collect_param_grads(Tape& tape, const Model& model, const BoundModel& bound);

struct ForwardDetail {
    std::vector<int> temporal_shape;  // x_temp
    std::vector<int> freq_shape;      // x_freq (empty when branch disabled)
    std::vector<int> fused_shape;
    std::vector<double> sls_weights;
    Tensor film_gates;
    AttentionDetail attention;
};

struct ForwardOut {
    Var embedding;  // [1×D], time-mean of the fused features
    Var logits;     // [1×2], index 0 = bonafide
};

FreqConfig freq_config(const ModelConfig& cfg);

// Everything ahead of the frequency branch's batch normalization: the
// temporal branch output and the pooled time-major filter map. The trainer
// stacks freq_pooled across the mini-batch so batch statistics span all
// batch members.
struct BranchPre {
    Var x_temp;
    Var freq_pooled;  // [freq_steps×F]; invalid when the branch is disabled
};

BranchPre forward_branches(Tape& tape, Model& model, const BoundModel& bound, const Waveform& normalized,
                           const BreathMask& mask, ForwardDetail* detail = nullptr);

// Fusion, embedding, and classification. `x_freq` must already be
// normalized and projected; pass an invalid Var when the branch is off.
ForwardOut fuse_and_classify(Tape& tape, Model& model, const BoundModel& bound, Var x_temp, Var x_freq,
                             ForwardDetail* detail = nullptr);

// Full pipeline for one normalized waveform. `training` selects batch-norm
// statistics mode (and mutates model.bn running stats when true); batch
// statistics then span only this sample's pooled bins, so the trainer uses
// the phased path above instead.
ForwardOut model_forward(Tape& tape, Model& model, const BoundModel& bound, const Waveform& normalized,
                         const BreathMask& mask, bool training, ForwardDetail* detail = nullptr);

// Detection score convention: logit(bonafide) − logit(spoof).
double detection_score(Tape& tape, const ForwardOut& out);

}  // namespace breathnet
