#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "breathnet/checkpoint.hpp"
#include "breathnet/config.hpp"
#include "breathnet/metrics.hpp"

namespace breathnet {

struct TrainResult {
    std::vector<std::string> checkpoint_paths;  // one per completed epoch
    std::string averaged_path;                  // empty when no epochs ran
    std::vector<double> epoch_losses;
    bool early_stopped = false;
};

TrainResult train(const RunConfig& cfg, std::ostream& log);

// True when the last `patience` epochs each failed to strictly improve on
// their predecessor (with patience 2: loss[e] >= loss[e-1] >= loss[e-2]).
bool should_stop_early(const std::vector<double>& epoch_losses, int patience);

struct EvalResult {
    double eer_value = 0.0;
    double min_dcf_value = 0.0;
    double cllr_value = 0.0;
    int scored = 0;
    int skipped = 0;
    std::string score_path;
    std::vector<ScoreRecord> records;
};

EvalResult evaluate(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& manifest_path,
                    MaskMode mode, const std::string& score_path, std::ostream& log);

struct AblationRow {
    std::string variant;
    double eer_pooled = 0.0;
    double eer_breath_subset = 0.0;    // bona fide vs {no_breath, breath_removed}
    double eer_spectral_subset = 0.0;  // bona fide vs {comb_artifact, lowpass}
    bool breath_valid = false;
    bool spectral_valid = false;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::string table;
};

AblationResult ablate(const RunConfig& cfg, std::ostream& log);

void export_embeddings(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& manifest_path,
                       const std::string& out_path, std::ostream& log);

// Subset EER over bona fide plus the given spoof styles; false when a class
// is missing.
bool subset_eer(const std::vector<ScoreRecord>& records, const std::vector<std::string>& spoof_styles, double* out);

}  // namespace breathnet
