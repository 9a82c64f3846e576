#pragma once

// Rank and linear correlation metrics used throughout evaluation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "glint/core/error.hpp"

namespace glint::eval {

// Pearson correlation on raw values
inline double plcc(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw InputError("plcc: length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
    const std::size_t n = a.size();
    if (n < 3) throw InputError("plcc: need at least 3 samples");
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw NumericError("plcc: correlation undefined for constant input");
    if (a == b) return 1.0;  // exact for identical vectors
    return sab / std::sqrt(saa * sbb);
}

// mid-ranks: ties receive the average of the ranks they span (1-based)
inline std::vector<double> midranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Spearman rank-order correlation: Pearson on mid-ranks
inline double srocc(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw InputError("srocc: length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
    if (a.size() < 3) throw InputError("srocc: need at least 3 samples");
    return plcc(midranks(a), midranks(b));
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw InputError("median of empty vector");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace glint::eval
