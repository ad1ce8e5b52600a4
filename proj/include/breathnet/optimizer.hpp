#pragma once

#include <vector>

#include "breathnet/config.hpp"
#include "breathnet/model.hpp"

namespace breathnet {

// Adam with decoupled weight decay. Two parameter groups: encoder tensors
// run at cfg.encoder_learning_rate, everything else at cfg.learning_rate.
// Batch-norm running statistics and the center buffer are not parameters
// and are never decayed or stepped.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;
};

// Applies one update; `grads` must be in for_each_param order. Also
// projects the sinc cutoffs back into the valid band afterwards.
void adam_step(Model& model, const std::vector<Tensor>& grads, AdamState& state, const RunConfig& cfg);

}  // namespace breathnet
