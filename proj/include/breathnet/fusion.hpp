#pragma once

#include <vector>

#include "breathnet/tape.hpp"

namespace breathnet {

struct AttentionConfig {
    int heads = 4;
    int dim = 64;  // total model width; per-head width = dim / heads
};

struct AttentionVars {
    Var wq;  // [D×D]
    Var wk;  // [D×D]
    Var wv;  // [D×D]
    Var wo;  // [D×D]
};

struct AttentionDetail {
    std::vector<Tensor> head_weights;  // softmax rows per head, [Q×T]
};

// Scaled dot-product cross-attention with x_freq as queries and x_temp as
// keys/values. Heads are column slices of the projected width; output is
// the concatenated heads passed through the output projection, [Q×D].
Var cross_attention(Tape& tape, Var x_freq, Var x_temp, const AttentionConfig& cfg, const AttentionVars& vars,
                    AttentionDetail* detail = nullptr);

}  // namespace breathnet
