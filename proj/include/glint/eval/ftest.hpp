#pragma once

// Two-sided variance-ratio (F) test on prediction residuals. Lower residual
// variance means better; the verdict is reported from A's point of view and
// mapped onto the conventional {1, -, 0} table symbols.

#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <string>
#include <vector>

#include "glint/core/error.hpp"

namespace glint::eval {

enum class Verdict { Superior, Indistinguishable, Inferior };

inline std::string verdict_symbol(Verdict v) {
    switch (v) {
        case Verdict::Superior: return "1";
        case Verdict::Inferior: return "0";
        default: return "-";
    }
}

struct FTestResult {
    double ratio = 1.0;  // var(a) / var(b)
    Verdict verdict = Verdict::Indistinguishable;
    double critical_hi = 0.0;  // upper quantile at the chosen confidence
    double critical_lo = 0.0;
};

inline double sample_variance(const std::vector<double>& x) {
    if (x.size() < 2) throw InputError("f_test: need at least 2 residuals");
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline FTestResult f_test(const std::vector<double>& residuals_a,
                          const std::vector<double>& residuals_b,
                          double confidence = 0.95) {
    double va = sample_variance(residuals_a);
    double vb = sample_variance(residuals_b);
    if (vb == 0.0 && va == 0.0) {
        // both perfect: indistinguishable by construction
        return {1.0, Verdict::Indistinguishable, 0.0, 0.0};
    }
    if (vb == 0.0) throw NumericError("f_test: zero variance in denominator");

    FTestResult r;
    r.ratio = va / vb;
    double alpha = 1.0 - confidence;
    boost::math::fisher_f dist(static_cast<double>(residuals_a.size() - 1),
                               static_cast<double>(residuals_b.size() - 1));
    // two-sided: reject equality when the ratio leaves [F_{a/2}, F_{1-a/2}]
    r.critical_lo = boost::math::quantile(dist, alpha / 2.0);
    r.critical_hi = boost::math::quantile(dist, 1.0 - alpha / 2.0);
    if (r.ratio > r.critical_hi)
        r.verdict = Verdict::Inferior;  // a's residuals spread wider
    else if (r.ratio < r.critical_lo)
        r.verdict = Verdict::Superior;
    else
        r.verdict = Verdict::Indistinguishable;
    return r;
}

}  // namespace glint::eval
