#include "breathnet/model.hpp"

#include <cmath>

#include "breathnet/errors.hpp"
#include "breathnet/rng.hpp"

namespace breathnet {

namespace {

Tensor xavier(int rows, int cols, Rng& rng, double gain = 1.0) {
    Tensor t(rows, cols);
    const double a = gain * std::sqrt(6.0 / (rows + cols));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
    return t;
}

Tensor lstm_bias(int hidden) {
    Tensor b(1, 4 * hidden);
    for (int i = hidden; i < 2 * hidden; ++i) b.at(0, i) = 1.0;  // forget gate bias
    return b;
}

// Layer-one analysis weights: windowed cosine/sine quadrature pairs with
// log-spaced center frequencies, so the first layer produces spectrally
// organized features from the start (the pretrained-encoder stand-in).
Tensor cosine_filterbank(int window, int dim, double sample_rate) {
    constexpr double pi = 3.14159265358979323846;
    Tensor w(window, dim);
    const int pairs = (dim + 1) / 2;
    const double f_lo = 60.0;
    const double f_hi = 0.95 * sample_rate / 2.0;
    for (int j = 0; j < dim; ++j) {
        const int m = j / 2;
        const double frac = pairs > 1 ? static_cast<double>(m) / (pairs - 1) : 0.0;
        const double freq = f_lo * std::pow(f_hi / f_lo, frac);
        double norm = 0.0;
        for (int n = 0; n < window; ++n) {
            const double hann = 0.5 - 0.5 * std::cos(2.0 * pi * n / (window - 1));
            const double phase = 2.0 * pi * freq * n / sample_rate;
            const double v = hann * (j % 2 == 0 ? std::cos(phase) : std::sin(phase));
            w.at(n, j) = v;
            norm += v * v;
        }
        const double k = 3.0 / std::sqrt(std::max(norm, 1e-12));
        for (int n = 0; n < window; ++n) w.at(n, j) *= k;
    }
    return w;
}

}  // namespace

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.encoder_layers < 1 || cfg.dim < 1 || cfg.film_hidden < 1 || cfg.sinc_filters < 1 || cfg.heads < 1 ||
        cfg.lstm_hidden1 < 1 || cfg.lstm_hidden2 < 1) {
        throw config_error("model dimensions must be positive");
    }
    if (cfg.dim % cfg.heads != 0) {
        throw config_error("model width " + std::to_string(cfg.dim) + " must be divisible by head count " + std::to_string(cfg.heads));
    }
    Model m;
    m.cfg = cfg;
    Rng rng(derive_seed(seed, 0xB0DE));

    m.enc_w.resize(static_cast<std::size_t>(cfg.encoder_layers));
    m.enc_b.resize(static_cast<std::size_t>(cfg.encoder_layers));
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        const int in = l == 0 ? cfg.window : cfg.dim;
        for (int k = 0; k < cfg.encoder_taps; ++k) {
            if (l == 0 && k == 0) {
                m.enc_w[0].push_back(cosine_filterbank(cfg.window, cfg.dim, cfg.sample_rate));
            } else {
                m.enc_w[static_cast<std::size_t>(l)].push_back(xavier(in, cfg.dim, rng));
            }
        }
        m.enc_b[static_cast<std::size_t>(l)] = Tensor(1, cfg.dim);
    }
    m.sls_u = xavier(cfg.dim, 1, rng);
    m.sls_b = Tensor(1, 1);
    // active gating from the start: the hidden row passes relu, and the
    // second layer is wide enough to differentiate masked frames
    m.film_w1 = Tensor::full(1, cfg.film_hidden, 1.0);
    m.film_w2 = xavier(cfg.film_hidden, cfg.dim, rng, 2.5);

    init_sinc_cutoffs_mel(m.sinc_f_low, m.sinc_band, cfg.sinc_filters, cfg.sample_rate);
    m.bn_gamma = Tensor::full(1, cfg.sinc_filters, 1.0);
    m.bn_beta = Tensor(1, cfg.sinc_filters);
    m.proj_w = xavier(cfg.sinc_filters, cfg.dim, rng);
    m.proj_b = Tensor(1, cfg.dim);

    m.att_wq = xavier(cfg.dim, cfg.dim, rng, 3.0);
    m.att_wk = xavier(cfg.dim, cfg.dim, rng, 3.0);
    m.att_wv = xavier(cfg.dim, cfg.dim, rng);
    m.att_wo = xavier(cfg.dim, cfg.dim, rng);

    const int h1 = cfg.lstm_hidden1, h2 = cfg.lstm_hidden2;
    m.l1f_wx = xavier(cfg.dim, 4 * h1, rng, 0.5);
    m.l1f_wh = xavier(h1, 4 * h1, rng, 0.5);
    m.l1f_b = lstm_bias(h1);
    m.l1b_wx = xavier(cfg.dim, 4 * h1, rng, 0.5);
    m.l1b_wh = xavier(h1, 4 * h1, rng, 0.5);
    m.l1b_b = lstm_bias(h1);
    m.l2f_wx = xavier(2 * h1, 4 * h2, rng, 0.5);
    m.l2f_wh = xavier(h2, 4 * h2, rng, 0.5);
    m.l2f_b = lstm_bias(h2);
    m.l2b_wx = xavier(2 * h1, 4 * h2, rng, 0.5);
    m.l2b_wh = xavier(h2, 4 * h2, rng, 0.5);
    m.l2b_b = lstm_bias(h2);
    m.head_w = xavier(2 * h2, 2, rng);
    m.head_b = Tensor(1, 2);

    m.bn = BatchNormState(cfg.sinc_filters);
    m.center.momentum = 0.9;
    return m;
}

void Model::for_each_param(const std::function<void(const std::string&, Tensor&, bool)>& fn) {
    for (std::size_t l = 0; l < enc_w.size(); ++l) {
        for (std::size_t k = 0; k < enc_w[l].size(); ++k) {
            fn("encoder.l" + std::to_string(l) + ".w" + std::to_string(k), enc_w[l][k], true);
        }
        fn("encoder.l" + std::to_string(l) + ".b", enc_b[l], true);
    }
    fn("sls.u", sls_u, false);
    fn("sls.b", sls_b, false);
    fn("film.w1", film_w1, false);
    fn("film.w2", film_w2, false);
    fn("sinc.f_low", sinc_f_low, false);
    fn("sinc.band", sinc_band, false);
    fn("freq.bn_gamma", bn_gamma, false);
    fn("freq.bn_beta", bn_beta, false);
    fn("freq.proj_w", proj_w, false);
    fn("freq.proj_b", proj_b, false);
    fn("attention.wq", att_wq, false);
    fn("attention.wk", att_wk, false);
    fn("attention.wv", att_wv, false);
    fn("attention.wo", att_wo, false);
    fn("lstm1.fwd.wx", l1f_wx, false);
    fn("lstm1.fwd.wh", l1f_wh, false);
    fn("lstm1.fwd.b", l1f_b, false);
    fn("lstm1.bwd.wx", l1b_wx, false);
    fn("lstm1.bwd.wh", l1b_wh, false);
    fn("lstm1.bwd.b", l1b_b, false);
    fn("lstm2.fwd.wx", l2f_wx, false);
    fn("lstm2.fwd.wh", l2f_wh, false);
    fn("lstm2.fwd.b", l2f_b, false);
    fn("lstm2.bwd.wx", l2b_wx, false);
    fn("lstm2.bwd.wh", l2b_wh, false);
    fn("lstm2.bwd.b", l2b_b, false);
    fn("head.w", head_w, false);
    fn("head.b", head_b, false);
}

void Model::for_each_param(const std::function<void(const std::string&, const Tensor&, bool)>& fn) const {
    const_cast<Model*>(this)->for_each_param([&](const std::string& name, Tensor& t, bool enc) { fn(name, t, enc); });
}

BoundModel bind_model(Tape& tape, const Model& model, bool trainable) {
    BoundModel b;
    const auto in = [&](const Tensor& t) { return tape.input(t, trainable); };

    b.encoder.w.resize(model.enc_w.size());
    b.encoder.bias.resize(model.enc_b.size());
    for (std::size_t l = 0; l < model.enc_w.size(); ++l) {
        for (const Tensor& t : model.enc_w[l]) b.encoder.w[l].push_back(in(t));
        b.encoder.bias[l] = in(model.enc_b[l]);
    }
    b.sls_u = in(model.sls_u);
    b.sls_b = in(model.sls_b);
    b.film_w1 = in(model.film_w1);
    b.film_w2 = in(model.film_w2);
    b.freq.f_low_hz = in(model.sinc_f_low);
    b.freq.band_hz = in(model.sinc_band);
    b.freq.bn_gamma = in(model.bn_gamma);
    b.freq.bn_beta = in(model.bn_beta);
    b.freq.proj_w = in(model.proj_w);
    b.freq.proj_b = in(model.proj_b);
    b.attention.wq = in(model.att_wq);
    b.attention.wk = in(model.att_wk);
    b.attention.wv = in(model.att_wv);
    b.attention.wo = in(model.att_wo);
    b.lstm.fwd1 = {in(model.l1f_wx), in(model.l1f_wh), in(model.l1f_b)};
    b.lstm.bwd1 = {in(model.l1b_wx), in(model.l1b_wh), in(model.l1b_b)};
    b.lstm.fwd2 = {in(model.l2f_wx), in(model.l2f_wh), in(model.l2f_b)};
    b.lstm.bwd2 = {in(model.l2b_wx), in(model.l2b_wh), in(model.l2b_b)};
    b.lstm.head_w = in(model.head_w);
    b.lstm.head_b = in(model.head_b);
    return b;
}

std::vector<Tensor> collect_param_grads(Tape& tape, const Model& model, const BoundModel& bound) {
    std::vector<Var> order;
    for (std::size_t l = 0; l < bound.encoder.w.size(); ++l) {
        for (Var v : bound.encoder.w[l]) order.push_back(v);
        order.push_back(bound.encoder.bias[l]);
    }
    order.insert(order.end(), {bound.sls_u, bound.sls_b, bound.film_w1, bound.film_w2, bound.freq.f_low_hz, bound.freq.band_hz,
                               bound.freq.bn_gamma, bound.freq.bn_beta, bound.freq.proj_w, bound.freq.proj_b, bound.attention.wq,
                               bound.attention.wk, bound.attention.wv, bound.attention.wo, bound.lstm.fwd1.wx, bound.lstm.fwd1.wh,
                               bound.lstm.fwd1.b, bound.lstm.bwd1.wx, bound.lstm.bwd1.wh, bound.lstm.bwd1.b, bound.lstm.fwd2.wx,
                               bound.lstm.fwd2.wh, bound.lstm.fwd2.b, bound.lstm.bwd2.wx, bound.lstm.bwd2.wh, bound.lstm.bwd2.b,
                               bound.lstm.head_w, bound.lstm.head_b});
    std::size_t expected = 0;
    const_cast<Model&>(model).for_each_param([&](const std::string&, Tensor&, bool) { ++expected; });
    if (order.size() != expected) throw numeric_error("collect_param_grads: binding order out of sync with parameter registry");
    std::vector<Tensor> grads;
    grads.reserve(order.size());
    for (Var v : order) grads.push_back(tape.grad(v));
    return grads;
}

FreqConfig freq_config(const ModelConfig& cfg) {
    FreqConfig freq_cfg;
    freq_cfg.filters = cfg.sinc_filters;
    freq_cfg.kernel_len = cfg.sinc_kernel;
    freq_cfg.stride = cfg.sinc_stride;
    freq_cfg.out_steps = cfg.freq_steps;
    freq_cfg.dim = cfg.dim;
    freq_cfg.sample_rate = cfg.sample_rate;
    freq_cfg.pre_emphasis_coeff = cfg.pre_emphasis;
    return freq_cfg;
}

BranchPre forward_branches(Tape& tape, Model& model, const BoundModel& bound, const Waveform& normalized,
                           const BreathMask& mask, ForwardDetail* detail) {
    const ModelConfig& cfg = model.cfg;
    if (static_cast<int>(normalized.samples.size()) != cfg.target_samples) {
        throw data_error("forward: waveform has " + std::to_string(normalized.samples.size()) + " samples, expected " +
                         std::to_string(cfg.target_samples) + " (run normalize_duration first)");
    }
    EncoderConfig enc_cfg{cfg.encoder_layers, cfg.dim, cfg.window, cfg.hop, cfg.encoder_taps};
    const std::vector<Var> stack = toy_encoder(tape, normalized, enc_cfg, bound.encoder);
    BranchPre out;
    out.x_temp = sls_aggregate(tape, stack, bound.sls_u, bound.sls_b, detail ? &detail->sls_weights : nullptr);
    if (cfg.film_enabled) {
        out.x_temp = breathfilm(tape, out.x_temp, mask, bound.film_w1, bound.film_w2, detail ? &detail->film_gates : nullptr);
    }
    if (detail) detail->temporal_shape = tape.val(out.x_temp).shape();
    if (cfg.freq_enabled) {
        out.freq_pooled = freq_pooled_map(tape, normalized, freq_config(cfg), bound.freq);
    }
    return out;
}

ForwardOut fuse_and_classify(Tape& tape, Model& model, const BoundModel& bound, Var x_temp, Var x_freq,
                             ForwardDetail* detail) {
    const ModelConfig& cfg = model.cfg;
    Var fused = x_temp;
    if (cfg.freq_enabled) {
        if (!x_freq.valid()) throw config_error("fuse_and_classify: frequency branch enabled but no x_freq given");
        if (detail) detail->freq_shape = tape.val(x_freq).shape();
        AttentionConfig att_cfg{cfg.heads, cfg.dim};
        fused = cross_attention(tape, x_freq, x_temp, att_cfg, bound.attention, detail ? &detail->attention : nullptr);
    }
    if (detail) detail->fused_shape = tape.val(fused).shape();

    ForwardOut out;
    out.embedding = tape.mean_rows(fused);
    Var seq = bilstm_forward(tape, fused, bound.lstm, cfg.lstm_hidden1, cfg.lstm_hidden2);
    out.logits = pool_and_logits(tape, seq, bound.lstm.head_w, bound.lstm.head_b);
    return out;
}

ForwardOut model_forward(Tape& tape, Model& model, const BoundModel& bound, const Waveform& normalized,
                         const BreathMask& mask, bool training, ForwardDetail* detail) {
    BranchPre pre = forward_branches(tape, model, bound, normalized, mask, detail);
    Var x_freq;
    if (model.cfg.freq_enabled) {
        Var normed = tape.batchnorm_cols(pre.freq_pooled, bound.freq.bn_gamma, bound.freq.bn_beta, model.bn, training);
        x_freq = freq_project(tape, normed, bound.freq);
    }
    return fuse_and_classify(tape, model, bound, pre.x_temp, x_freq, detail);
}

double detection_score(Tape& tape, const ForwardOut& out) {
    const Tensor& logits = tape.val(out.logits);
    return logits.at(0, 0) - logits.at(0, 1);
}

}  // namespace breathnet
