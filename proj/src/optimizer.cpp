#include "breathnet/optimizer.hpp"

#include <cmath>

#include "breathnet/errors.hpp"
#include "breathnet/freq.hpp"

namespace breathnet {

void adam_step(Model& model, const std::vector<Tensor>& grads, AdamState& state, const RunConfig& cfg) {
    std::vector<Tensor*> params;
    std::vector<bool> is_encoder;
    model.for_each_param([&](const std::string&, Tensor& t, bool enc) {
        params.push_back(&t);
        is_encoder.push_back(enc);
    });
    if (params.size() != grads.size()) throw numeric_error("adam_step: gradient count mismatch");
    if (state.m.empty()) {
        for (Tensor* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    ++state.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        const double lr = is_encoder[i] ? cfg.encoder_learning_rate : cfg.learning_rate;
        for (std::int64_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / bias1;
            const double vhat = v[j] / bias2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            p[j] -= lr * cfg.weight_decay * p[j];  // decoupled decay
        }
    }
    project_sinc_cutoffs(model.sinc_f_low, model.sinc_band, cfg.sample_rate);
}


}  // namespace breathnet
