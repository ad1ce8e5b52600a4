#include "breathnet/temporal.hpp"

#include <string>

#include "breathnet/errors.hpp"

namespace breathnet {

Tensor frame_waveform(const Waveform& w, int window, int hop) {
    validate_waveform(w, "frame_waveform");
    const int frames = temporal_frame_count(static_cast<int>(w.samples.size()), window, hop);
    Tensor out(frames, window);
    for (int t = 0; t < frames; ++t) {
        const int base = t * hop;
        for (int i = 0; i < window; ++i) out.at(t, i) = w.samples[static_cast<std::size_t>(base + i)];
    }
    return out;
}

std::vector<Var> toy_encoder(Tape& tape, const Waveform& w, const EncoderConfig& cfg, const EncoderVars& vars) {
    if (cfg.layers < 1) throw config_error("toy_encoder: need at least one layer");
    if (static_cast<int>(vars.w.size()) != cfg.layers || static_cast<int>(vars.bias.size()) != cfg.layers) {
        throw config_error("toy_encoder: parameter count does not match layer count");
    }
    Var x = tape.constant(frame_waveform(w, cfg.window, cfg.hop));
    std::vector<Var> outputs;
    outputs.reserve(static_cast<std::size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        const auto& taps = vars.w[static_cast<std::size_t>(l)];
        if (static_cast<int>(taps.size()) != cfg.taps) throw config_error("toy_encoder: tap count mismatch at layer " + std::to_string(l));
        Var acc = tape.matmul(x, taps[0]);
        for (int k = 1; k < cfg.taps; ++k) {
            acc = tape.add(acc, tape.matmul(tape.shift_rows(x, k), taps[static_cast<std::size_t>(k)]));
        }
        acc = tape.add_rowvec(acc, vars.bias[static_cast<std::size_t>(l)]);
        // centered softplus keeps a half-rectified envelope (oscillatory
        // content survives downstream time-mean pooling) without the
        // constant ln2 baseline stacking up across layers
        x = tape.add_const(tape.softplus(acc), -0.6931471805599453);
        outputs.push_back(x);
    }
    return outputs;
}

Var sls_aggregate(Tape& tape, const std::vector<Var>& layers, Var u, Var b, std::vector<double>* weights_out) {
    if (layers.empty()) throw config_error("sls_aggregate: empty layer stack");
    if (weights_out) weights_out->clear();
    Var out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Var pooled = tape.mean_rows(layers[i]);              // [1×D]
        Var score = tape.add(tape.matmul(pooled, u), b);     // [1×1]
        Var weight = tape.sigmoid(score);
        if (weights_out) weights_out->push_back(tape.val(weight)[0]);
        Var term = tape.scalar_mul(layers[i], weight);
        out = i == 0 ? term : tape.add(out, term);
    }
    return out;
}

Var breathfilm(Tape& tape, Var x, const BreathMask& mask, Var w1, Var w2, Tensor* gates_out) {
    const Tensor& xv = tape.val(x);
    const int frames = xv.rows();
    if (static_cast<int>(mask.bits.size()) != frames) {
        throw data_error("breathfilm: mask length " + std::to_string(mask.bits.size()) + " does not match temporal frames " + std::to_string(frames));
    }
    Tensor m(frames, 1);
    for (int t = 0; t < frames; ++t) m.at(t, 0) = static_cast<double>(mask.bits[static_cast<std::size_t>(t)]);
    Var mvar = tape.constant(std::move(m));
    Var hidden = tape.relu(tape.matmul(mvar, w1));       // [T×H]
    Var g = tape.sigmoid(tape.matmul(hidden, w2));       // [T×D]
    Var gate = tape.add_const(g, 1.0);                   // in (1, 2)
    if (gates_out) *gates_out = tape.val(gate);
    return tape.mul(gate, x);
}

}  // namespace breathnet
