#pragma once

#include "breathnet/tape.hpp"

namespace breathnet {

// One LSTM direction's parameters. Gate layout along the 4H axis: input,
// forget, cell, output.
struct LstmVars {
    Var wx;  // [in×4H]
    Var wh;  // [H×4H]
    Var b;   // [1×4H]
};

struct BiLstmStackVars {
    LstmVars fwd1, bwd1;  // hidden h1
    LstmVars fwd2, bwd2;  // hidden h2, input 2·h1
    Var head_w;           // [2·h2×2]
    Var head_b;           // [1×2]
};

struct LstmStep {
    Var h;
    Var c;
};

// Single cell update for one time step (x is [1×in]).
LstmStep lstm_cell(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmVars& vars, int hidden);

// Runs one direction over seq [T×in] from zero initial state; returns
// [T×H] in original time order (the backward direction is re-reversed).
Var lstm_direction(Tape& tape, Var seq, const LstmVars& vars, int hidden, bool backward);

// Forward and backward passes concatenated per step, [T×2H].
Var bilstm_layer(Tape& tape, Var seq, const LstmVars& fwd, const LstmVars& bwd, int hidden);

// Two stacked BiLSTM layers, [T×2·h2].
Var bilstm_forward(Tape& tape, Var seq, const BiLstmStackVars& vars, int h1, int h2);

// Time-mean then affine to 2 logits, [1×2].
Var pool_and_logits(Tape& tape, Var seq, Var head_w, Var head_b);

}  // namespace breathnet
