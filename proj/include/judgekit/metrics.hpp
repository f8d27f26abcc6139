#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "judgekit/criteria.hpp"
#include "judgekit/dataset.hpp"
#include "judgekit/error.hpp"
#include "judgekit/pipeline.hpp"

namespace judgekit {

namespace metricdetail {

inline void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw MetricError("correlation inputs differ in length");
    if (x.size() < 2) throw MetricError("correlation needs at least 2 observations");
}

inline bool is_constant(std::span<const double> v) {
    for (double d : v) {
        if (d != v.front()) return false;
    }
    return true;
}

}  // namespace metricdetail

/// Product-moment correlation. Constant input is an undefined-correlation
/// error, never a silent 0.
inline double pearson(std::span<const double> x, std::span<const double> y) {
    metricdetail::check_pair(x, y);
    if (metricdetail::is_constant(x) || metricdetail::is_constant(y))
        throw MetricError("undefined correlation: constant input vector");
    const size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Average ranks: tied values receive the mean of the rank positions they
/// span (1-based).
inline std::vector<double> average_ranks(std::span<const double> v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

/// Spearman rho with average-rank tie handling: pearson over rank transforms.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    metricdetail::check_pair(x, y);
    if (metricdetail::is_constant(x) || metricdetail::is_constant(y))
        throw MetricError("undefined correlation: constant input vector");
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

/// Kendall tau-b: (C - D) / sqrt((n0 - n1)(n0 - n2)), where n1 and n2 are
/// tied-pair counts in x and y. Final scores live on a three-point scale, so
/// the tie-aware normalization is load-bearing.
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    metricdetail::check_pair(x, y);
    const size_t n = x.size();

    auto tied_pairs = [](std::span<const double> v) {
        std::vector<double> sorted(v.begin(), v.end());
        std::sort(sorted.begin(), sorted.end());
        double t = 0;
        size_t i = 0;
        while (i < sorted.size()) {
            size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            double g = static_cast<double>(j - i + 1);
            t += g * (g - 1) / 2.0;
            i = j + 1;
        }
        return t;
    };

    const double n0 = static_cast<double>(n) * (static_cast<double>(n) - 1) / 2.0;
    const double n1 = tied_pairs(x);
    const double n2 = tied_pairs(y);
    if (n1 == n0 || n2 == n0)
        throw MetricError("undefined correlation: all pairs tied in one vector");

    double s = 0;  // concordant minus discordant
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double dx = x[i] - x[j], dy = y[i] - y[j];
            double prod = dx * dy;
            if (prod > 0) {
                s += 1;
            } else if (prod < 0) {
                s -= 1;
            }
        }
    }
    return s / std::sqrt((n0 - n1) * (n0 - n2));
}

// ---------------------------------------------------------------------------
// Classification metrics per label, positive class = "label present".
// ---------------------------------------------------------------------------

struct Confusion {
    uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    uint64_t total() const { return tp + fp + fn + tn; }

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Rates derived from a confusion matrix. A zero denominator yields an empty
/// optional ("undefined"), never a coerced 0 or 1. When precision and recall
/// are both a defined 0, F1 is 0 by convention.
struct RateSet {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;

    friend bool operator==(const RateSet&, const RateSet&) = default;
};

inline RateSet label_metrics(const Confusion& c) {
    if (c.total() == 0) throw MetricError("confusion matrix with zero evaluated cases");
    RateSet r;
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (r.precision && r.recall) {
        double p = *r.precision, q = *r.recall;
        r.f1 = (p + q > 0) ? 2 * p * q / (p + q) : 0.0;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Report assembly.
// ---------------------------------------------------------------------------

/// Whether correlations are computed on per-case final scores (default,
/// matching one-correlation-per-task tables) or on concatenated per-label
/// presence indicators.
enum class CorrelationBasis { final_scores, label_indicators };

struct CorrelationSet {
    std::optional<double> spearman;
    std::optional<double> pearson;
    std::optional<double> kendall;

    friend bool operator==(const CorrelationSet&, const CorrelationSet&) = default;
};

struct LabelReport {
    std::string label;
    Confusion confusion;
    RateSet rates;

    friend bool operator==(const LabelReport&, const LabelReport&) = default;
};

struct SplitReport {
    std::string split_name;
    std::string method;
    size_t evaluated = 0;
    size_t failed = 0;
    CorrelationSet correlations;
    std::vector<LabelReport> labels;

    friend bool operator==(const SplitReport&, const SplitReport&) = default;
};

struct MetricReport {
    std::string task;
    std::vector<SplitReport> splits;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Correlations over two paired score vectors, degenerate inputs reported as
/// undefined instead of aborting the report.
inline CorrelationSet correlation_set(std::span<const double> x, std::span<const double> y) {
    CorrelationSet out;
    try {
        out.spearman = spearman(x, y);
    } catch (const MetricError&) {}
    try {
        out.pearson = pearson(x, y);
    } catch (const MetricError&) {}
    try {
        out.kendall = kendall_tau_b(x, y);
    } catch (const MetricError&) {}
    return out;
}

struct ReportOptions {
    std::string split_name = "eval";
    std::string method;
    size_t failed = 0;
    CorrelationBasis basis = CorrelationBasis::final_scores;
};

/// Builds the per-split block of a report: correlations of model final
/// scores against human final scores, plus one confusion matrix per label.
/// Every record must have a human-annotated case; annotation gaps are errors,
/// not zeros.
inline SplitReport build_report(const std::vector<ScoreRecord>& records,
                                const std::vector<Case>& cases, const CriteriaSet& criteria,
                                const ReportOptions& options = {}) {
    if (records.empty()) throw MetricError("no score records to report on");
    std::map<std::string, const Case*> by_id;
    for (const Case& c : cases) by_id[c.id] = &c;

    SplitReport report;
    report.split_name = options.split_name;
    report.method = options.method;
    report.failed = options.failed;
    report.evaluated = records.size();

    std::vector<double> model_scores, human_scores;
    std::vector<double> model_indicators, human_indicators;
    std::map<std::string, Confusion> confusion;

    for (const ScoreRecord& r : records) {
        auto it = by_id.find(r.case_id);
        if (it == by_id.end())
            throw MetricError("record case \"" + r.case_id + "\" is missing from the dataset");
        const Case& c = *it->second;
        if (!c.human_labels || !c.human_score)
            throw MetricError("case \"" + c.id + "\" lacks a human annotation");
        model_scores.push_back(static_cast<double>(r.final));
        human_scores.push_back(static_cast<double>(*c.human_score));
        for (const LabelSpec& label : criteria.labels()) {
            bool predicted = r.present_labels.count(label.name) > 0;
            bool actual = c.human_labels->count(label.name) > 0;
            Confusion& conf = confusion[label.name];
            if (predicted && actual) {
                ++conf.tp;
            } else if (predicted) {
                ++conf.fp;
            } else if (actual) {
                ++conf.fn;
            } else {
                ++conf.tn;
            }
            model_indicators.push_back(predicted ? 1.0 : 0.0);
            human_indicators.push_back(actual ? 1.0 : 0.0);
        }
    }

    report.correlations = options.basis == CorrelationBasis::final_scores
                              ? correlation_set(model_scores, human_scores)
                              : correlation_set(model_indicators, human_indicators);
    for (const LabelSpec& label : criteria.labels()) {
        const Confusion& conf = confusion[label.name];
        report.labels.push_back({label.name, conf, label_metrics(conf)});
    }
    return report;
}

/// Alignment between two independently annotated copies of one dataset,
/// matched by case id: the inter-annotator agreement measure.
inline CorrelationSet human_alignment(const std::vector<Case>& a, const std::vector<Case>& b) {
    std::map<std::string, int> scores_b;
    for (const Case& c : b) {
        if (!c.human_score) throw MetricError("case \"" + c.id + "\" lacks a human score");
        scores_b[c.id] = *c.human_score;
    }
    std::vector<double> xs, ys;
    for (const Case& c : a) {
        auto it = scores_b.find(c.id);
        if (it == scores_b.end()) continue;
        if (!c.human_score) throw MetricError("case \"" + c.id + "\" lacks a human score");
        xs.push_back(static_cast<double>(*c.human_score));
        ys.push_back(static_cast<double>(it->second));
    }
    if (xs.empty()) throw MetricError("annotation sets share no case ids");
    return correlation_set(xs, ys);
}

}  // namespace judgekit
