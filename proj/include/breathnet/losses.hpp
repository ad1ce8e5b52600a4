#pragma once

#include <cstdint>
#include <vector>

#include "breathnet/tape.hpp"

namespace breathnet {

// Bona fide class center. A buffer, not a parameter: Eq-style momentum
// updates only, no gradient ever flows through it.
struct CenterState {
    Tensor c;
    double momentum = 0.9;
    bool initialized = false;
};

// First call initializes c = zbar; afterwards c <- mu·c + (1-mu)·zbar.
void update_center(CenterState& state, const Tensor& zbar);

// `count` noisy copies z + delta·eps, eps ~ N(0,1) per coordinate,
// deterministic in `seed`.
std::vector<Var> augment_bonafide(Tape& tape, Var z, double delta, int count, std::uint64_t seed);

// Positive-only supervised contrastive loss over the bona fide set
// (originals plus augmented). Returns exactly 0 when |bona| < 2.
Var pscl(Tape& tape, const std::vector<Var>& bona, double tau);

// mean (1 - cos(z, c)) / 2 over bona fide embeddings; 0 for an empty set.
Var center_loss(Tape& tape, const std::vector<Var>& bona, const CenterState& center);

// mean (1 + cos(z, c)) / 2 over fakes plus the same over all pairwise
// mixups (z_n + z_m)/2; the pair term is omitted when |fakes| < 2 and the
// whole loss is 0 when the set is empty.
Var contrast_loss(Tape& tape, const std::vector<Var>& fakes, const CenterState& center);

// pscl + alpha·center + beta·contrast.
Var feature_loss(Tape& tape, Var pscl_term, Var center_term, Var contrast_term, double alpha, double beta);

// Mean over the batch of -w_label · ln(p_label); probs rows must sum to 1.
// Zero probability at the true label is clamped at 1e-12 (event logged).
// labels: 0 = bonafide, 1 = spoof.
Var weighted_ce(Tape& tape, Var probs, const std::vector<int>& labels, double w_bona, double w_spoof);

// ce + lambda·feature.
Var total_loss(Tape& tape, Var ce, Var feature, double lambda);

}  // namespace breathnet
