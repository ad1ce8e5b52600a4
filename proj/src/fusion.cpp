#include "breathnet/fusion.hpp"

#include <cmath>
#include <string>

#include "breathnet/errors.hpp"

namespace breathnet {

Var cross_attention(Tape& tape, Var x_freq, Var x_temp, const AttentionConfig& cfg, const AttentionVars& vars,
                    AttentionDetail* detail) {
    const Tensor& q_in = tape.val(x_freq);
    const Tensor& kv_in = tape.val(x_temp);
    if (q_in.cols() != cfg.dim || kv_in.cols() != cfg.dim) {
        throw config_error("cross_attention: branch widths " + q_in.shape_str() + " / " + kv_in.shape_str() +
                           " do not match model width " + std::to_string(cfg.dim));
    }
    if (cfg.heads < 1 || cfg.dim % cfg.heads != 0) {
        throw config_error("cross_attention: head count " + std::to_string(cfg.heads) + " must divide width " + std::to_string(cfg.dim));
    }
    const int dh = cfg.dim / cfg.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dh));

    Var q = tape.matmul(x_freq, vars.wq);  // [Q×D]
    Var k = tape.matmul(x_temp, vars.wk);  // [T×D]
    Var v = tape.matmul(x_temp, vars.wv);  // [T×D]

    if (detail) detail->head_weights.clear();
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        Var qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
        Var scores = tape.matmul_nt(qh, kh);                       // [Q×T]
        Var weights = tape.rowwise_softmax(scores, inv_sqrt_dk);
        if (detail) detail->head_weights.push_back(tape.val(weights));
        heads.push_back(tape.matmul(weights, vh));                 // [Q×dh]
    }
    Var concat = cfg.heads == 1 ? heads[0] : tape.concat_cols(heads);
    return tape.matmul(concat, vars.wo);
}

}  // namespace breathnet
