#pragma once

// Brute-force reference implementations used as test oracles. These use
// definitional formulas and deliberately different algorithms from the
// library, so agreement between the two is evidence rather than tautology.

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace oracles {

/// Pearson via the raw-sums formula (n·Σxy − Σx·Σy) / sqrt(...).
inline double pearson_direct(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Fractional ranks by counting smaller and equal elements, not by sorting:
/// rank_i = (#smaller) + 1 + (#equal - 1) / 2.
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
    std::vector<double> ranks(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        size_t smaller = 0, equal = 0;
        for (size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++smaller;
            if (v[j] == v[i]) ++equal;
        }
        ranks[i] = static_cast<double>(smaller) + 1.0 + (static_cast<double>(equal) - 1.0) / 2.0;
    }
    return ranks;
}

inline double spearman_definitional(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson_direct(fractional_ranks(x), fractional_ranks(y));
}

/// Kendall tau-b by classifying every pair as concordant, discordant, or tied
/// in x only / y only, then (C − D) / sqrt((C + D + Ty)(C + D + Tx)).
inline double kendall_definitional(const std::vector<double>& x, const std::vector<double>& y) {
    double concordant = 0, discordant = 0, tied_x_only = 0, tied_y_only = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        for (size_t j = i + 1; j < x.size(); ++j) {
            double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) {
                ++tied_x_only;
            } else if (dy == 0) {
                ++tied_y_only;
            } else if (dx * dy > 0) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    return (concordant - discordant) / std::sqrt((concordant + discordant + tied_x_only) *
                                                 (concordant + discordant + tied_y_only));
}

/// Three-branch scoring rule coded over label-name sets instead of specs.
inline int final_score_definitional(const std::set<std::string>& present,
                                    const std::set<std::string>& unacceptable,
                                    const std::set<std::string>& acceptable) {
    size_t bad = 0, soft = 0;
    for (const std::string& name : present) {
        bad += unacceptable.count(name);
        soft += acceptable.count(name);
    }
    if (bad > 0) return 0;
    return soft > 0 ? 1 : 2;
}

}  // namespace oracles
