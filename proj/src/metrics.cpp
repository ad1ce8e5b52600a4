#include "breathnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "breathnet/errors.hpp"

namespace breathnet {

namespace {

void split_scores(const std::vector<ScoreRecord>& records, std::vector<double>& bona, std::vector<double>& spoof) {
    for (const ScoreRecord& r : records) {
        if (!std::isfinite(r.score)) throw data_error("non-finite score for utterance '" + r.utt_id + "'");
        (r.is_bonafide ? bona : spoof).push_back(r.score);
    }
    if (bona.empty() || spoof.empty()) {
        throw data_error("metric needs both classes: have " + std::to_string(bona.size()) + " bonafide and " +
                         std::to_string(spoof.size()) + " spoof scores");
    }
}

struct OperatingPoint {
    double frr;
    double far;
};

// Operating points at every distinct score threshold (ascending) plus the
// reject-all decision. Accept iff score >= t, so FRR(t) = #bona < t and
// FAR(t) = #spoof >= t.
std::vector<OperatingPoint> sweep(const std::vector<double>& bona_in, const std::vector<double>& spoof_in) {
    std::vector<double> bona = bona_in, spoof = spoof_in;
    std::sort(bona.begin(), bona.end());
    std::sort(spoof.begin(), spoof.end());
    std::vector<double> thresholds;
    thresholds.reserve(bona.size() + spoof.size());
    thresholds.insert(thresholds.end(), bona.begin(), bona.end());
    thresholds.insert(thresholds.end(), spoof.begin(), spoof.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const double nb = static_cast<double>(bona.size());
    const double ns = static_cast<double>(spoof.size());
    std::vector<OperatingPoint> pts;
    pts.reserve(thresholds.size() + 1);
    for (double t : thresholds) {
        const double below_bona = static_cast<double>(std::lower_bound(bona.begin(), bona.end(), t) - bona.begin());
        const double atabove_spoof = static_cast<double>(spoof.end() - std::lower_bound(spoof.begin(), spoof.end(), t));
        pts.push_back({below_bona / nb, atabove_spoof / ns});
    }
    pts.push_back({1.0, 0.0});  // reject everything
    return pts;
}

}  // namespace

double eer(const std::vector<ScoreRecord>& records) {
    std::vector<double> bona, spoof;
    split_scores(records, bona, spoof);
    const std::vector<OperatingPoint> pts = sweep(bona, spoof);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].frr >= pts[i].far) {
            if (pts[i].frr == pts[i].far || i == 0) return pts[i].frr;
            const OperatingPoint& p = pts[i - 1];
            const OperatingPoint& q = pts[i];
            const double denom = (q.frr - p.frr) + (p.far - q.far);
            const double alpha = denom > 0.0 ? (p.far - p.frr) / denom : 0.0;
            return p.frr + alpha * (q.frr - p.frr);
        }
    }
    return pts.back().frr;  // unreachable: the reject-all point has frr >= far
}

double min_dcf(const std::vector<ScoreRecord>& records, double c_miss, double c_fa, double prior) {
    if (!(c_miss > 0.0) || !(c_fa > 0.0)) throw config_error("min_dcf: costs must be positive");
    if (!(prior > 0.0) || !(prior < 1.0)) throw config_error("min_dcf: prior must lie in (0,1)");
    std::vector<double> bona, spoof;
    split_scores(records, bona, spoof);
    const std::vector<OperatingPoint> pts = sweep(bona, spoof);
    double best = 1e308;
    for (const OperatingPoint& p : pts) {
        best = std::min(best, c_miss * prior * p.frr + c_fa * (1.0 - prior) * p.far);
    }
    const double norm = std::min(c_miss * prior, c_fa * (1.0 - prior));
    return best / norm;
}

double cllr(const std::vector<ScoreRecord>& records) {
    std::vector<double> bona, spoof;
    split_scores(records, bona, spoof);
    const double ln2 = std::log(2.0);
    auto softplus = [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
    double acc_bona = 0.0;
    for (double s : bona) acc_bona += softplus(-s) / ln2;  // log2(1 + e^-s)
    double acc_spoof = 0.0;
    for (double s : spoof) acc_spoof += softplus(s) / ln2;  // log2(1 + e^s)
    return 0.5 * (acc_bona / static_cast<double>(bona.size()) + acc_spoof / static_cast<double>(spoof.size()));
}

Breakdown pooled_breakdown(const std::vector<ScoreRecord>& records) {
    std::map<std::string, std::vector<ScoreRecord>> by_tag;
    for (const ScoreRecord& r : records) {
        by_tag[r.condition.empty() ? "untagged" : r.condition].push_back(r);
    }
    Breakdown out;
    for (const auto& [tag, group] : by_tag) {
        BreakdownRow row;
        row.condition = tag;
        for (const ScoreRecord& r : group) (r.is_bonafide ? row.n_bonafide : row.n_spoof)++;
        if (row.n_bonafide > 0 && row.n_spoof > 0) {
            row.eer = eer(group);
            row.valid = true;
        }
        out.rows.push_back(row);
    }
    out.pooled = eer(records);
    return out;
}

std::string format_breakdown(const Breakdown& b) {
    std::size_t width = std::string("condition").size();
    for (const BreakdownRow& r : b.rows) width = std::max(width, r.condition.size());
    std::ostringstream os;
    os << std::left;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-*s  %8s  %8s  %8s\n", static_cast<int>(width), "condition", "bonafide", "spoof", "eer%");
    os << buf;
    for (const BreakdownRow& r : b.rows) {
        if (r.valid) {
            std::snprintf(buf, sizeof(buf), "%-*s  %8d  %8d  %8.3f\n", static_cast<int>(width), r.condition.c_str(), r.n_bonafide,
                          r.n_spoof, 100.0 * r.eer);
        } else {
            std::snprintf(buf, sizeof(buf), "%-*s  %8d  %8d  %8s\n", static_cast<int>(width), r.condition.c_str(), r.n_bonafide,
                          r.n_spoof, "n/a");
        }
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-*s  %8s  %8s  %8.3f\n", static_cast<int>(width), "pooled", "", "", 100.0 * b.pooled);
    os << buf;
    return os.str();
}

void write_breakdown_tsv(const std::string& path, const Breakdown& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write breakdown file: " + path);
    out << "condition\tn_bonafide\tn_spoof\teer\n";
    char buf[32];
    for (const BreakdownRow& r : b.rows) {
        out << r.condition << '\t' << r.n_bonafide << '\t' << r.n_spoof << '\t';
        if (r.valid) {
            std::snprintf(buf, sizeof(buf), "%.6f", r.eer);
            out << buf << '\n';
        } else {
            out << "n/a\n";
        }
    }
    std::snprintf(buf, sizeof(buf), "%.6f", b.pooled);
    out << "pooled\t\t\t" << buf << '\n';
}

void write_score_file(const std::string& path, const std::vector<ScoreRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write score file: " + path);
    char buf[32];
    for (const ScoreRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.score);
        out << r.utt_id << '\t' << (r.is_bonafide ? "bonafide" : "spoof") << '\t' << buf;
        if (!r.condition.empty()) out << '\t' << r.condition;
        out << '\n';
    }
    if (!out) throw data_error("short write to score file: " + path);
}

std::vector<ScoreRecord> read_score_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open score file: " + path);
    std::vector<ScoreRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t tab = line.find('\t', pos);
            fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() < 3 || fields.size() > 4) {
            throw data_error(path + ":" + std::to_string(lineno) + ": expected 3 or 4 tab-separated fields, got " +
                             std::to_string(fields.size()));
        }
        ScoreRecord r;
        r.utt_id = fields[0];
        if (fields[1] == "bonafide") {
            r.is_bonafide = true;
        } else if (fields[1] == "spoof") {
            r.is_bonafide = false;
        } else {
            throw data_error(path + ":" + std::to_string(lineno) + ": unknown label '" + fields[1] + "'");
        }
        try {
            std::size_t used = 0;
            r.score = std::stod(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw data_error(path + ":" + std::to_string(lineno) + ": bad score '" + fields[2] + "'");
        }
        if (fields.size() == 4) r.condition = fields[3];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace breathnet
