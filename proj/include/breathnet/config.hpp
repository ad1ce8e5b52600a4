#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "breathnet/model.hpp"
#include "breathnet/synthcorpus.hpp"

namespace breathnet {

// Full run configuration. Every field maps to a config-file key of the same
// name and to a --<key> CLI flag.
struct RunConfig {
    // model dims
    int encoder_layers = 4;
    int model_dim = 64;
    int film_hidden = 32;
    int sinc_filters = 16;
    int sinc_kernel = 65;
    int sinc_stride = 160;
    int heads = 4;
    int lstm_hidden1 = 64;
    int lstm_hidden2 = 32;
    int target_samples = 64600;
    double sample_rate = 16000.0;
    double pre_emphasis = 0.97;

    // loss weights
    double lambda = 0.5;
    double alpha = 1.0;
    double beta = 1.0;
    double tau = 0.1;
    double delta = 0.1;
    int aug_count = 3;
    double class_weight_bonafide = 0.9;
    double class_weight_spoof = 0.1;
    double center_momentum = 0.9;

    // optimizer
    double learning_rate = 1e-5;
    double encoder_learning_rate = 1e-6;
    double weight_decay = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    // training
    int batch_size = 10;
    int max_epochs = 50;
    int patience = 2;
    std::uint64_t seed = 1;
    int checkpoint_average = 3;
    std::string mask_mode = "normal";        // normal|zeros|ones
    std::string mask_source = "annotations";  // annotations|heuristic
    std::string rawboost = "none";            // none|convolutive|impulsive|stationary|series

    // ablation switches
    bool film_enabled = true;
    bool freq_enabled = true;
    bool use_pscl = true;
    bool use_center = true;
    bool use_contrast = true;

    // paths
    std::string train_manifest;
    std::string eval_manifest;
    std::string breath_annotations;  // optional; empty -> manifest column
    std::string out_dir = "runs/default";
};

struct ConfigKey {
    std::string name;
    std::string type;         // int|real|bool|string
    std::string default_value;
    std::string description;
};

std::vector<ConfigKey> config_schema();

// Typed assignment; throws config_error on unknown key or bad value.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// "key = value" lines, '#' comments, blank lines allowed.
RunConfig load_config_file(const std::string& path);

void validate_config(const RunConfig& cfg);
ModelConfig model_config(const RunConfig& cfg);

// Rendered key/value listing (documented defaults) for `--dump-config`.
std::string render_config(const RunConfig& cfg);

}  // namespace breathnet
