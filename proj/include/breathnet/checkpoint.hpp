#pragma once

#include <string>
#include <vector>

#include "breathnet/model.hpp"

namespace breathnet {

// On-disk model snapshot: every parameter tensor (in registry order),
// batch-norm running statistics, the bona fide center, and training
// metadata. Serialization is raw little-endian doubles, so identical state
// produces identical bytes.
struct Checkpoint {
    ModelConfig cfg;
    std::vector<std::pair<std::string, Tensor>> params;
    Tensor bn_mean, bn_var;
    double bn_momentum = 0.1, bn_eps = 1e-5;
    Tensor center;
    bool center_initialized = false;
    double center_momentum = 0.9;
    int epoch = -1;
    std::vector<double> loss_history;
};

Checkpoint snapshot_model(const Model& model, int epoch, const std::vector<double>& loss_history);

// Throws config_error when dims or the config block disagree.
void restore_model(Model& model, const Checkpoint& ck);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Unweighted arithmetic mean of every tensor (params, running stats,
// center); epoch becomes the max input epoch. Dimension mismatches name
// the offending tensor.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& cks);

}  // namespace breathnet
