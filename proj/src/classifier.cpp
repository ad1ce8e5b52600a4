#include "breathnet/classifier.hpp"

#include "breathnet/errors.hpp"

namespace breathnet {

LstmStep lstm_cell(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmVars& vars, int hidden) {
    Var gates = tape.add_rowvec(tape.add(tape.matmul(x, vars.wx), tape.matmul(h_prev, vars.wh)), vars.b);  // [1×4H]
    Var i = tape.sigmoid(tape.slice_cols(gates, 0, hidden));
    Var f = tape.sigmoid(tape.slice_cols(gates, hidden, 2 * hidden));
    Var g = tape.tanh_act(tape.slice_cols(gates, 2 * hidden, 3 * hidden));
    Var o = tape.sigmoid(tape.slice_cols(gates, 3 * hidden, 4 * hidden));
    Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
    Var h = tape.mul(o, tape.tanh_act(c));
    return {h, c};
}

Var lstm_direction(Tape& tape, Var seq, const LstmVars& vars, int hidden, bool backward) {
    const int steps = tape.val(seq).rows();
    Var h = tape.constant(Tensor(1, hidden));
    Var c = tape.constant(Tensor(1, hidden));
    std::vector<Var> outputs(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const int t = backward ? steps - 1 - k : k;
        Var x = tape.slice_rows(seq, t, t + 1);
        LstmStep step = lstm_cell(tape, x, h, c, vars, hidden);
        h = step.h;
        c = step.c;
        outputs[static_cast<std::size_t>(t)] = h;
    }
    return steps == 1 ? outputs[0] : tape.concat_rows(outputs);
}

Var bilstm_layer(Tape& tape, Var seq, const LstmVars& fwd, const LstmVars& bwd, int hidden) {
    Var f = lstm_direction(tape, seq, fwd, hidden, false);
    Var b = lstm_direction(tape, seq, bwd, hidden, true);
    return tape.concat_cols({f, b});
}

Var bilstm_forward(Tape& tape, Var seq, const BiLstmStackVars& vars, int h1, int h2) {
    Var l1 = bilstm_layer(tape, seq, vars.fwd1, vars.bwd1, h1);
    return bilstm_layer(tape, l1, vars.fwd2, vars.bwd2, h2);
}

Var pool_and_logits(Tape& tape, Var seq, Var head_w, Var head_b) {
    const Tensor& s = tape.val(seq);
    if (s.rows() < 1) throw config_error("pool_and_logits: empty sequence");
    Var pooled = tape.mean_rows(seq);
    return tape.affine(pooled, head_w, head_b);
}

}  // namespace breathnet
