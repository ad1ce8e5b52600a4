#pragma once

#include <vector>

#include "breathnet/audio.hpp"
#include "breathnet/breathmask.hpp"
#include "breathnet/tape.hpp"

namespace breathnet {

struct EncoderConfig {
    int layers = 4;
    int dim = 64;
    int window = 400;
    int hop = 320;
    int taps = 2;  // causal taps per conv layer
};

// Per-layer causal convolution weights: w[tap] maps the input width of that
// layer (window for layer 0, dim afterwards) to dim.
struct EncoderVars {
    std::vector<std::vector<Var>> w;  // [layer][tap]
    std::vector<Var> bias;            // [layer], each [1×dim]
};

// Frame the waveform into overlapping windows, [T×window].
Tensor frame_waveform(const Waveform& w, int window, int hop);

// Stand-in layered encoder: stacked causal conv + tanh over framed input.
// Returns all L layer outputs ([T×dim] each), oldest first.
std::vector<Var> toy_encoder(Tape& tape, const Waveform& w, const EncoderConfig& cfg, const EncoderVars& vars);

// Layer aggregation: s_i = time-mean of h_i, w_i = sigmoid(u·s_i + b),
// out = sum_i w_i h_i. `weights_out`, when given, receives the w_i values.
Var sls_aggregate(Tape& tape, const std::vector<Var>& layers, Var u /*[D×1]*/, Var b /*[1×1]*/,
                  std::vector<double>* weights_out = nullptr);

// Residual FiLM gating from the binary breath mask:
// g = sigmoid(relu(M·W1)·W2), out = (1+g) ⊙ x. `gates_out` receives 1+g.
Var breathfilm(Tape& tape, Var x, const BreathMask& mask, Var w1 /*[1×H]*/, Var w2 /*[H×D]*/,
               Tensor* gates_out = nullptr);

}  // namespace breathnet
