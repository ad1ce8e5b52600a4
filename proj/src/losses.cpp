#include "breathnet/losses.hpp"

#include <cmath>
#include <string>

#include "breathnet/errors.hpp"
#include "breathnet/events.hpp"
#include "breathnet/rng.hpp"

namespace breathnet {

namespace {

double row_norm(const Tensor& t) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < t.size(); ++i) acc += t[i] * t[i];
    return std::sqrt(acc);
}

void require_nonzero(Tape& tape, const std::vector<Var>& zs, const char* who) {
    for (Var z : zs) {
        if (row_norm(tape.val(z)) == 0.0) throw data_error(std::string(who) + ": zero-norm embedding");
    }
}

Var center_var(Tape& tape, const CenterState& center, const char* who) {
    if (!center.initialized) throw numeric_error(std::string(who) + ": bona fide center not initialized");
    if (row_norm(center.c) == 0.0) throw numeric_error(std::string(who) + ": zero-norm center");
    return tape.constant(center.c);
}

}  // namespace

void update_center(CenterState& state, const Tensor& zbar) {
    if (!zbar.all_finite()) throw numeric_error("update_center: non-finite batch mean");
    if (!state.initialized) {
        state.c = zbar;
        state.initialized = true;
        return;
    }
    for (std::int64_t i = 0; i < state.c.size(); ++i) {
        state.c[i] = state.momentum * state.c[i] + (1.0 - state.momentum) * zbar[i];
    }
}

std::vector<Var> augment_bonafide(Tape& tape, Var z, double delta, int count, std::uint64_t seed) {
    if (count < 0) throw config_error("augment_bonafide: count must be >= 0");
    const std::vector<int> shape = tape.val(z).shape();
    Rng rng(seed);
    std::vector<Var> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        Tensor noise(shape);
        for (std::int64_t i = 0; i < noise.size(); ++i) noise[i] = delta * rng.normal();
        out.push_back(tape.add(z, tape.constant(std::move(noise))));
    }
    return out;
}

Var pscl(Tape& tape, const std::vector<Var>& bona, double tau) {
    if (!(tau > 0.0)) throw config_error("pscl: temperature must be positive");
    const int n = static_cast<int>(bona.size());
    if (n < 2) return tape.constant(Tensor::scalar(0.0));
    require_nonzero(tape, bona, "pscl");

    // Pairwise cosine similarities scaled by 1/tau; cache Vars since
    // s(i,j) = s(j,i).
    std::vector<std::vector<Var>> sim(static_cast<std::size_t>(n), std::vector<Var>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            Var s = tape.scale(tape.cosine_similarity(bona[static_cast<std::size_t>(i)], bona[static_cast<std::size_t>(j)]), 1.0 / tau);
            sim[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
            sim[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = s;
        }
    }

    // For each anchor i: mean_j (t_ij) - logsumexp_k (t_ik), j,k != i.
    Var acc;
    for (int i = 0; i < n; ++i) {
        std::vector<Var> row;
        row.reserve(static_cast<std::size_t>(n - 1));
        for (int k = 0; k < n; ++k) {
            if (k != i) row.push_back(sim[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
        }
        Var terms = tape.concat_cols(row);                       // [1×(n-1)]
        Var mean_term = tape.scale(tape.sum_all(terms), 1.0 / (n - 1));
        Var lse = tape.rowwise_logsumexp(terms);                 // [1×1]
        Var inner = tape.sub(mean_term, lse);
        acc = i == 0 ? inner : tape.add(acc, inner);
    }
    return tape.scale(acc, -1.0 / n);
}

Var center_loss(Tape& tape, const std::vector<Var>& bona, const CenterState& center) {
    if (bona.empty()) return tape.constant(Tensor::scalar(0.0));
    require_nonzero(tape, bona, "center_loss");
    Var c = center_var(tape, center, "center_loss");
    Var acc;
    for (std::size_t i = 0; i < bona.size(); ++i) {
        // (1 - cos)/2
        Var term = tape.add_const(tape.scale(tape.cosine_similarity(bona[i], c), -0.5), 0.5);
        acc = i == 0 ? term : tape.add(acc, term);
    }
    return tape.scale(acc, 1.0 / static_cast<double>(bona.size()));
}

Var contrast_loss(Tape& tape, const std::vector<Var>& fakes, const CenterState& center) {
    const int n = static_cast<int>(fakes.size());
    if (n == 0) return tape.constant(Tensor::scalar(0.0));
    require_nonzero(tape, fakes, "contrast_loss");
    Var c = center_var(tape, center, "contrast_loss");

    Var singles;
    for (int i = 0; i < n; ++i) {
        Var term = tape.add_const(tape.scale(tape.cosine_similarity(fakes[static_cast<std::size_t>(i)], c), 0.5), 0.5);
        singles = i == 0 ? term : tape.add(singles, term);
    }
    Var loss = tape.scale(singles, 1.0 / n);

    if (n >= 2) {
        Var pairs;
        int used = 0;
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                Var mix = tape.scale(tape.add(fakes[static_cast<std::size_t>(a)], fakes[static_cast<std::size_t>(b)]), 0.5);
                if (row_norm(tape.val(mix)) == 0.0) {
                    log_event("contrast_mix_zero_norm_skip");
                    continue;
                }
                Var term = tape.add_const(tape.scale(tape.cosine_similarity(mix, c), 0.5), 0.5);
                pairs = used == 0 ? term : tape.add(pairs, term);
                ++used;
            }
        }
        if (used > 0) loss = tape.add(loss, tape.scale(pairs, 1.0 / used));
    }
    return loss;
}

Var feature_loss(Tape& tape, Var pscl_term, Var center_term, Var contrast_term, double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0) throw config_error("feature_loss: weights must be nonnegative");
    return tape.add(pscl_term, tape.add(tape.scale(center_term, alpha), tape.scale(contrast_term, beta)));
}

Var weighted_ce(Tape& tape, Var probs, const std::vector<int>& labels, double w_bona, double w_spoof) {
    const Tensor& p = tape.val(probs);
    const int n = p.rows();
    if (p.cols() != 2) throw config_error("weighted_ce: expected [Nx2] probabilities, got " + p.shape_str());
    if (static_cast<int>(labels.size()) != n) {
        throw config_error("weighted_ce: label count " + std::to_string(labels.size()) + " does not match batch " + std::to_string(n));
    }
    for (int r = 0; r < n; ++r) {
        const double sum = p.at(r, 0) + p.at(r, 1);
        if (std::abs(sum - 1.0) > 1e-6) throw data_error("weighted_ce: probability row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
    Var acc;
    for (int r = 0; r < n; ++r) {
        const int label = labels[static_cast<std::size_t>(r)];
        if (label != 0 && label != 1) throw config_error("weighted_ce: label must be 0 (bonafide) or 1 (spoof)");
        const double w = label == 0 ? w_bona : w_spoof;
        Var logp = tape.log_clamped(tape.select_element(probs, r, label), 1e-12);
        Var term = tape.scale(logp, -w);
        acc = r == 0 ? term : tape.add(acc, term);
    }
    return tape.scale(acc, 1.0 / n);
}

Var total_loss(Tape& tape, Var ce, Var feature, double lambda) {
    return tape.add(ce, tape.scale(feature, lambda));
}

}  // namespace breathnet
