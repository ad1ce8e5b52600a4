#include "golden_runner.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "breathnet/breathmask.hpp"
#include "breathnet/classifier.hpp"
#include "breathnet/errors.hpp"
#include "breathnet/freq.hpp"
#include "breathnet/losses.hpp"
#include "breathnet/metrics.hpp"
#include "breathnet/tape.hpp"
#include "breathnet/temporal.hpp"

namespace golden {

using namespace breathnet;

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

Tensor read_tensor_block(std::istream& in, int rows, int cols) {
    Tensor t(rows, cols);
    for (int r = 0; r < rows; ++r) {
        std::string line;
        if (!std::getline(in, line)) throw data_error("golden fixture: truncated tensor block");
        std::istringstream is(line);
        for (int c = 0; c < cols; ++c) {
            if (!(is >> t.at(r, c))) throw data_error("golden fixture: short tensor row");
        }
    }
    return t;
}

// One evaluated case: labelled actual values of each kind.
struct Actual {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, double> scalars;
    std::map<std::string, std::string> texts;
};

std::vector<ScoreRecord> records_from(const GoldenCase& c) {
    std::vector<ScoreRecord> recs;
    const Tensor& bona = c.tensors.at("bona");
    const Tensor& spoof = c.tensors.at("spoof");
    for (std::int64_t i = 0; i < bona.size(); ++i) recs.push_back({"b" + std::to_string(i), true, bona[i], ""});
    for (std::int64_t i = 0; i < spoof.size(); ++i) recs.push_back({"s" + std::to_string(i), false, spoof[i], ""});
    return recs;
}

Actual evaluate_case(const GoldenCase& c) {
    Actual out;
    if (c.name == "affine_scalar") {
        Tape t;
        Var y = t.affine(t.constant(c.tensors.at("x")), t.constant(c.tensors.at("w")), t.constant(c.tensors.at("b")));
        out.tensors["y"] = t.val(y);
    } else if (c.name == "softmax_row_01") {
        Tape t;
        out.tensors["y"] = t.val(t.rowwise_softmax(t.constant(c.tensors.at("x")), 1.0));
    } else if (c.name == "sls_hand") {
        Tape t;
        std::vector<Var> layers = {t.constant(c.tensors.at("h1")), t.constant(c.tensors.at("h2"))};
        std::vector<double> weights;
        Var agg = sls_aggregate(t, layers, t.constant(c.tensors.at("u")), t.constant(Tensor::scalar(c.scalars.at("b"))), &weights);
        out.scalars["w1"] = weights[0];
        out.scalars["w2"] = weights[1];
        out.scalars["out"] = t.val(agg)[0];
    } else if (c.name == "film_hand_m1" || c.name == "film_hand_m0") {
        Tape t;
        BreathMask mask;
        mask.bits = {static_cast<std::uint8_t>(c.scalars.at("mask_bit") != 0.0 ? 1 : 0)};
        Var x = t.constant(Tensor::scalar(c.scalars.at("x")));
        Var w1 = t.constant(Tensor::scalar(c.scalars.at("w1")));
        Var w2 = t.constant(Tensor::scalar(c.scalars.at("w2")));
        out.scalars["out"] = t.val(breathfilm(t, x, mask, w1, w2))[0];
    } else if (c.name == "preemph_recurrence") {
        Waveform w;
        const Tensor& x = c.tensors.at("x");
        w.samples.assign(x.data().begin(), x.data().end());
        const Waveform y = pre_emphasis(w, c.scalars.at("coeff"));
        out.tensors["y"] = Tensor::row(std::vector<double>(y.samples.begin(), y.samples.end()));
    } else if (c.name == "pool_binwise") {
        Tape t;
        out.tensors["pooled"] = t.val(t.adaptive_maxpool_cols(t.constant(c.tensors.at("map")), static_cast<int>(c.scalars.at("bins"))));
    } else if (c.name == "attention_hand") {
        Tape t;
        Var q = t.constant(c.tensors.at("q"));
        Var k = t.constant(c.tensors.at("keys"));
        Var v = t.constant(c.tensors.at("values"));
        Var weights = t.rowwise_softmax(t.matmul_nt(q, k), 1.0);  // d_k = 1
        out.scalars["out"] = t.val(t.matmul(weights, v))[0];
    } else if (c.name == "pscl_identical_ln2" || c.name == "pscl_orthogonal_pair") {
        Tape t;
        std::vector<Var> zs = {t.constant(c.tensors.at("z1")), t.constant(c.tensors.at("z2")), t.constant(c.tensors.at("z3"))};
        out.scalars["loss"] = t.val(pscl(t, zs, c.scalars.at("tau")))[0];
    } else if (c.name == "center_same" || c.name == "center_anti" || c.name == "center_ortho") {
        Tape t;
        CenterState center{c.tensors.at("center"), 0.9, true};
        out.scalars["loss"] = t.val(center_loss(t, {t.constant(c.tensors.at("z"))}, center))[0];
    } else if (c.name == "contrast_anti" || c.name == "contrast_same" || c.name == "contrast_orthonormal") {
        Tape t;
        CenterState center{c.tensors.at("center"), 0.9, true};
        std::vector<Var> fakes = {t.constant(c.tensors.at("f1")), t.constant(c.tensors.at("f2"))};
        out.scalars["loss"] = t.val(contrast_loss(t, fakes, center))[0];
    } else if (c.name == "feature_sum") {
        Tape t;
        Var v = feature_loss(t, t.constant(Tensor::scalar(c.scalars.at("pscl"))), t.constant(Tensor::scalar(c.scalars.at("center"))),
                             t.constant(Tensor::scalar(c.scalars.at("contrast"))), c.scalars.at("alpha"), c.scalars.at("beta"));
        out.scalars["loss"] = t.val(v)[0];
    } else if (c.name == "ce_bonafide_uniform" || c.name == "ce_spoof_uniform") {
        Tape t;
        Var ce = weighted_ce(t, t.constant(c.tensors.at("probs")), {static_cast<int>(c.scalars.at("label"))}, 0.9, 0.1);
        out.scalars["loss"] = t.val(ce)[0];
    } else if (c.name == "total_hand") {
        Tape t;
        Var v = total_loss(t, t.constant(Tensor::scalar(c.scalars.at("ce"))), t.constant(Tensor::scalar(c.scalars.at("feature"))),
                           c.scalars.at("lambda"));
        out.scalars["loss"] = t.val(v)[0];
    } else if (c.name == "center_update_momentum") {
        CenterState center{c.tensors.at("c_old"), c.scalars.at("mu"), true};
        update_center(center, c.tensors.at("zbar"));
        out.tensors["c_new"] = center.c;
    } else if (c.name == "pool_mean_rows") {
        Tape t;
        out.tensors["pooled"] = t.val(t.mean_rows(t.constant(c.tensors.at("seq"))));
    } else if (c.name == "eer_one_third") {
        out.scalars["eer"] = eer(records_from(c));
    } else if (c.name == "mindcf_all_equal") {
        out.scalars["mindcf"] = min_dcf(records_from(c));
    } else if (c.name == "cllr_ln3" || c.name == "cllr_zero_scores") {
        out.scalars["cllr"] = cllr(records_from(c));
    } else if (c.name == "mask_coverage_rule") {
        const BreathIntervals iv = parse_intervals(c.texts.at("intervals"));
        const BreathMask m = intervals_to_mask(iv, static_cast<int>(c.scalars.at("frames")), c.scalars.at("frame_duration"));
        std::string bits;
        for (auto b : m.bits) bits += b ? '1' : '0';
        out.texts["bits"] = bits;
    } else {
        throw data_error("no golden dispatcher for case '" + c.name + "'");
    }
    return out;
}

double tensor_max_dev(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return 1e300;
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace

std::vector<GoldenCase> load_cases(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open golden fixture file: " + path);
    std::vector<GoldenCase> cases;
    std::string line;
    GoldenCase cur;
    bool in_case = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> tok = split_ws(line);
        if (tok[0] == "case") {
            cur = GoldenCase();
            cur.name = tok.at(1);
            in_case = true;
        } else if (!in_case) {
            throw data_error("golden fixture: content outside a case block");
        } else if (tok[0] == "tolerance") {
            cur.tolerance = std::stod(tok.at(1));
        } else if (tok[0] == "tensor") {
            cur.tensors[tok.at(1)] = read_tensor_block(in, std::stoi(tok.at(2)), std::stoi(tok.at(3)));
        } else if (tok[0] == "scalar") {
            cur.scalars[tok.at(1)] = std::stod(tok.at(2));
        } else if (tok[0] == "text") {
            cur.texts[tok.at(1)] = tok.at(2);
        } else if (tok[0] == "expect_tensor") {
            Expect e;
            e.kind = Expect::tensor;
            e.label = tok.at(1);
            e.tensor_value = read_tensor_block(in, std::stoi(tok.at(2)), std::stoi(tok.at(3)));
            cur.expects.push_back(std::move(e));
        } else if (tok[0] == "expect_scalar") {
            Expect e;
            e.kind = Expect::scalar;
            e.label = tok.at(1);
            e.scalar_value = std::stod(tok.at(2));
            cur.expects.push_back(std::move(e));
        } else if (tok[0] == "expect_text") {
            Expect e;
            e.kind = Expect::text;
            e.label = tok.at(1);
            e.text_value = tok.at(2);
            cur.expects.push_back(std::move(e));
        } else if (tok[0] == "end") {
            if (cur.expects.empty()) throw data_error("golden case '" + cur.name + "' has no expectations");
            cases.push_back(cur);
            in_case = false;
        } else {
            throw data_error("golden fixture: unknown directive '" + tok[0] + "'");
        }
    }
    return cases;
}

Report run_goldens(const std::string& fixture_path) {
    Report report;
    for (const GoldenCase& c : load_cases(fixture_path)) {
        ++report.total;
        std::string verdict = "PASS";
        double max_dev = 0.0;
        std::string why;
        try {
            const Actual actual = evaluate_case(c);
            for (const Expect& e : c.expects) {
                double dev = 0.0;
                if (e.kind == Expect::tensor) {
                    auto it = actual.tensors.find(e.label);
                    if (it == actual.tensors.end()) throw data_error("case produced no tensor '" + e.label + "'");
                    dev = tensor_max_dev(it->second, e.tensor_value);
                } else if (e.kind == Expect::scalar) {
                    auto it = actual.scalars.find(e.label);
                    if (it == actual.scalars.end()) throw data_error("case produced no scalar '" + e.label + "'");
                    dev = std::abs(it->second - e.scalar_value);
                } else {
                    auto it = actual.texts.find(e.label);
                    if (it == actual.texts.end()) throw data_error("case produced no text '" + e.label + "'");
                    dev = it->second == e.text_value ? 0.0 : 1e300;
                }
                max_dev = std::max(max_dev, dev);
            }
            if (max_dev > c.tolerance) verdict = "FAIL";
        } catch (const std::exception& ex) {
            verdict = "FAIL";
            why = ex.what();
        }
        if (verdict == "FAIL") {
            ++report.failures;
            report.failed_cases.push_back(c.name);
        }
        std::ostringstream os;
        os << verdict << " " << c.name << " max_dev=" << max_dev;
        if (!why.empty()) os << " (" << why << ")";
        report.lines.push_back(os.str());
    }
    return report;
}

}  // namespace golden
