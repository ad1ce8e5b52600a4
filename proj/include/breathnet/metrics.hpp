#pragma once

#include <string>
#include <vector>

namespace breathnet {

struct ScoreRecord {
    std::string utt_id;
    bool is_bonafide = false;
    double score = 0.0;        // higher = more bona fide
    std::string condition;     // optional tag
};

// Equal error rate via a full threshold sweep over distinct scores
// (accept iff score >= t), linearly interpolating between the adjacent
// operating points when FRR and FAR do not meet exactly.
double eer(const std::vector<ScoreRecord>& records);

// Minimum normalized detection cost over all thresholds including the
// accept-all and reject-all decisions.
double min_dcf(const std::vector<ScoreRecord>& records, double c_miss = 1.0, double c_fa = 10.0, double prior = 0.05);

// Cost of log-likelihood ratios in bits; scores are natural-log LLRs.
double cllr(const std::vector<ScoreRecord>& records);

struct BreakdownRow {
    std::string condition;
    int n_bonafide = 0;
    int n_spoof = 0;
    double eer = 0.0;
    bool valid = false;  // false when a tag has a single class -> "n/a"
};

struct Breakdown {
    std::vector<BreakdownRow> rows;  // sorted by condition name
    double pooled = 0.0;
};

Breakdown pooled_breakdown(const std::vector<ScoreRecord>& records);
std::string format_breakdown(const Breakdown& b);
void write_breakdown_tsv(const std::string& path, const Breakdown& b);

// Score file: "<utt_id>\t<label>\t<score>[\t<condition>]", score with six
// decimals, LF endings. The reader rejects malformed lines with their line
// numbers.
void write_score_file(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_score_file(const std::string& path);

}  // namespace breathnet
