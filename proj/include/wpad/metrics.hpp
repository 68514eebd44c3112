#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wpad/errors.hpp"

namespace wpad {

// One classifier output: score is the probability (or any monotone score)
// of the positive class. Positives are the attack/fake samples (label 1).
struct ScoredSample {
    double score = 0.0;
    int label = 0;
};

struct RocPoint {
    double fpr = 0.0, tpr = 0.0;
};

struct CmcPoint {
    std::size_t rank = 0;
    double rate = 0.0;
};

// TP = attack detected as attack.
struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct EvalReport {
    double accuracy = 0.0;
    Confusion confusion;
    std::vector<RocPoint> roc;   // empty when only one class is present
    std::optional<double> auc;   // unset when only one class is present
    std::vector<CmcPoint> cmc;   // filled separately by cmc()
    double error_rate = 0.0;     // 1 - accuracy
};

// Binary evaluation: accuracy/confusion at threshold 0.5, exact ROC from a
// sweep over every distinct score (with the +inf sentinel contributing the
// (0,0) endpoint), and trapezoidal AUC. Tied scores are grouped so that the
// trapezoid equals the Mann-Whitney statistic with half credit for ties.
inline EvalReport evaluate(std::span<const ScoredSample> samples) {
    if (samples.empty()) throw DataError("evaluate: no samples");

    EvalReport rep;
    std::size_t pos = 0, neg = 0;
    for (const auto& s : samples) {
        if (s.label != 0 && s.label != 1) {
            throw DataError("evaluate: labels must be 0 or 1");
        }
        const bool predicted_attack = s.score > 0.5;
        if (s.label == 1) {
            ++pos;
            predicted_attack ? ++rep.confusion.tp : ++rep.confusion.fn;
        } else {
            ++neg;
            predicted_attack ? ++rep.confusion.fp : ++rep.confusion.tn;
        }
    }
    rep.accuracy = static_cast<double>(rep.confusion.tp + rep.confusion.tn) /
                   static_cast<double>(samples.size());
    rep.error_rate = 1.0 - rep.accuracy;

    if (pos == 0 || neg == 0) return rep;  // single-class input: no ROC/AUC

    std::vector<ScoredSample> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end(), [](const ScoredSample& a, const ScoredSample& b) {
        return a.score > b.score;
    });

    rep.roc.push_back({0.0, 0.0});
    std::uint64_t tp = 0, fp = 0, area2 = 0;  // area2 = 2 * AUC * pos * neg, exact integer
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        std::uint64_t dtp = 0, dfp = 0;
        while (j < sorted.size() && sorted[j].score == sorted[i].score) {
            sorted[j].label == 1 ? ++dtp : ++dfp;
            ++j;
        }
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        rep.roc.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                           static_cast<double>(tp) / static_cast<double>(pos)});
        i = j;
    }
    rep.auc = static_cast<double>(area2) /
              (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return rep;
}

// Cumulative match characteristic for a K-class identification task.
// score_matrix[p][c] is probe p's score for class c; ranking ties are broken
// toward the lower class index. Returns (rank, rate) for ranks 1..K, where
// rate(r) is the fraction of probes whose true class is within the top r.
inline std::vector<CmcPoint> cmc(const std::vector<std::vector<double>>& score_matrix,
                                 const std::vector<int>& true_class) {
    if (score_matrix.empty() || score_matrix.size() != true_class.size()) {
        throw DataError("cmc: need one score row and one true class per probe");
    }
    const std::size_t k = score_matrix[0].size();
    if (k < 2) throw DataError("cmc: need at least 2 classes");

    std::vector<std::size_t> hits_at_rank(k, 0);
    for (std::size_t p = 0; p < score_matrix.size(); ++p) {
        const auto& row = score_matrix[p];
        if (row.size() != k) {
            throw DataError("cmc: probe " + std::to_string(p) + " is missing class scores");
        }
        const int t = true_class[p];
        if (t < 0 || static_cast<std::size_t>(t) >= k) {
            throw DataError("cmc: true class " + std::to_string(t) + " out of range");
        }
        const double st = row[static_cast<std::size_t>(t)];
        std::size_t rank = 1;
        for (std::size_t c = 0; c < k; ++c) {
            if (static_cast<int>(c) == t) continue;
            if (row[c] > st || (row[c] == st && static_cast<int>(c) < t)) ++rank;
        }
        ++hits_at_rank[rank - 1];
    }

    std::vector<CmcPoint> out(k);
    std::size_t cum = 0;
    for (std::size_t r = 0; r < k; ++r) {
        cum += hits_at_rank[r];
        out[r] = {r + 1, static_cast<double>(cum) / static_cast<double>(score_matrix.size())};
    }
    return out;
}

}  // namespace wpad
