#pragma once

#include "breathnet/audio.hpp"
#include "breathnet/tape.hpp"

namespace breathnet {

struct FreqConfig {
    int filters = 16;
    int kernel_len = 65;  // odd
    int stride = 160;
    int out_steps = 32;
    int dim = 64;  // projection width, matches the temporal branch
    double sample_rate = 16000.0;
    double pre_emphasis_coeff = 0.97;
};

struct FreqVars {
    Var f_low_hz;  // [1×F]
    Var band_hz;   // [1×F]
    Var bn_gamma;  // [1×F]
    Var bn_beta;   // [1×F]
    Var proj_w;    // [F×D]
    Var proj_b;    // [1×D]
};

// y[0] = x[0]; y[n] = x[n] - c·x[n-1].
Waveform pre_emphasis(const Waveform& w, double coeff);

// Mel-spaced cutoff initialization: filter i spans [p_i, p_{i+1}] with
// p_0..p_F mel-uniform over [30 Hz, Nyquist - 100 Hz].
void init_sinc_cutoffs_mel(Tensor& f_low_hz, Tensor& band_hz, int filters, double sample_rate);

// Keeps raw cutoff parameters inside the valid region after an optimizer
// step: f_low >= 0, band >= min_band, f_low + band <= Nyquist. Logs an
// event when the Nyquist clamp fires.
void project_sinc_cutoffs(Tensor& f_low_hz, Tensor& band_hz, double sample_rate, double min_band_hz = 10.0);

// Pre-emphasis -> sinc filterbank -> adaptive max pool to out_steps bins,
// laid out time-major: [out_steps×F]. This is the part ahead of batch
// normalization; the trainer stacks several utterances' outputs so the
// batch statistics span the whole mini-batch.
Var freq_pooled_map(Tape& tape, const Waveform& w, const FreqConfig& cfg, const FreqVars& vars);

// SELU then the F -> D projection, applied to normalized rows.
Var freq_project(Tape& tape, Var normed, const FreqVars& vars);

// Pool the [F×T'] filter map to out_steps bins, batch-normalize per filter,
// SELU, and project F -> D. Output [out_steps×D]. Single-sample path: batch
// statistics in training mode span this sample's pooled bins only.
Var dfim_pool_project(Tape& tape, Var filter_map, const FreqConfig& cfg, const FreqVars& vars,
                      BatchNormState& bn, bool training);

// Full frequency branch for one waveform (single-sample normalization).
Var freq_branch(Tape& tape, const Waveform& w, const FreqConfig& cfg, const FreqVars& vars,
                BatchNormState& bn, bool training);

}  // namespace breathnet
