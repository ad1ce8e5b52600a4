#include "breathnet/freq.hpp"

#include <algorithm>
#include <cmath>

#include "breathnet/errors.hpp"
#include "breathnet/events.hpp"

namespace breathnet {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

Waveform pre_emphasis(const Waveform& w, double coeff) {
    validate_waveform(w, "pre_emphasis");
    if (coeff < 0.0 || coeff > 1.0) throw config_error("pre_emphasis: coefficient must be in [0,1]");
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.resize(w.samples.size());
    out.samples[0] = w.samples[0];
    for (std::size_t n = 1; n < w.samples.size(); ++n) {
        out.samples[n] = w.samples[n] - coeff * w.samples[n - 1];
    }
    return out;
}

void init_sinc_cutoffs_mel(Tensor& f_low_hz, Tensor& band_hz, int filters, double sample_rate) {
    if (filters < 1) throw config_error("init_sinc_cutoffs_mel: need at least one filter");
    f_low_hz = Tensor(1, filters);
    band_hz = Tensor(1, filters);
    const double mel_lo = hz_to_mel(30.0);
    const double mel_hi = hz_to_mel(sample_rate / 2.0 - 100.0);
    for (int i = 0; i < filters; ++i) {
        const double p0 = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / filters);
        const double p1 = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (i + 1) / filters);
        f_low_hz.at(0, i) = p0;
        band_hz.at(0, i) = p1 - p0;
    }
}

void project_sinc_cutoffs(Tensor& f_low_hz, Tensor& band_hz, double sample_rate, double min_band_hz) {
    const double nyq = sample_rate / 2.0;
    for (int i = 0; i < f_low_hz.cols(); ++i) {
        double lo = std::abs(f_low_hz.at(0, i));
        double bw = std::max(std::abs(band_hz.at(0, i)), min_band_hz);
        if (lo > nyq - min_band_hz) {
            lo = nyq - min_band_hz;
            log_event("sinc_cutoff_clamp");
        }
        if (lo + bw > nyq) {
            bw = nyq - lo;
            log_event("sinc_cutoff_clamp");
        }
        f_low_hz.at(0, i) = lo;
        band_hz.at(0, i) = bw;
    }
}

Var freq_pooled_map(Tape& tape, const Waveform& w, const FreqConfig& cfg, const FreqVars& vars) {
    const Waveform emphasized = pre_emphasis(w, cfg.pre_emphasis_coeff);
    SincConvSpec spec;
    spec.kernel_len = cfg.kernel_len;
    spec.stride = cfg.stride;
    spec.sample_rate = cfg.sample_rate;
    Var map = tape.sinc_conv(emphasized.samples, vars.f_low_hz, vars.band_hz, spec);
    const Tensor& m = tape.val(map);
    if (m.cols() < cfg.out_steps) {
        throw data_error("freq branch: filter map has " + std::to_string(m.cols()) + " steps, need at least " +
                         std::to_string(cfg.out_steps) + " (waveform too short for this stride)");
    }
    Var pooled = tape.adaptive_maxpool_cols(map, cfg.out_steps);  // [F×32]
    return tape.transpose(pooled);                                // [32×F]
}

Var freq_project(Tape& tape, Var normed, const FreqVars& vars) {
    return tape.affine(tape.selu(normed), vars.proj_w, vars.proj_b);
}

Var dfim_pool_project(Tape& tape, Var filter_map, const FreqConfig& cfg, const FreqVars& vars,
                      BatchNormState& bn, bool training) {
    const Tensor& map = tape.val(filter_map);
    if (map.cols() < cfg.out_steps) {
        throw data_error("dfim_pool_project: filter map has " + std::to_string(map.cols()) + " steps, need at least " +
                         std::to_string(cfg.out_steps) + " (waveform too short for this stride)");
    }
    Var pooled = tape.adaptive_maxpool_cols(filter_map, cfg.out_steps);  // [F×32]
    Var by_time = tape.transpose(pooled);                                // [32×F]
    Var normed = tape.batchnorm_cols(by_time, vars.bn_gamma, vars.bn_beta, bn, training);
    return freq_project(tape, normed, vars);                             // [32×D]
}

Var freq_branch(Tape& tape, const Waveform& w, const FreqConfig& cfg, const FreqVars& vars,
                BatchNormState& bn, bool training) {
    Var pooled = freq_pooled_map(tape, w, cfg, vars);
    Var normed = tape.batchnorm_cols(pooled, vars.bn_gamma, vars.bn_beta, bn, training);
    return freq_project(tape, normed, vars);
}

}  // namespace breathnet
