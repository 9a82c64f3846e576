#pragma once

// Group maximum differentiation pair selection: the defender's scores are
// split into equal-frequency quality levels; inside each level the attacker
// nominates the images it rates farthest apart.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "glint/core/error.hpp"

namespace glint::eval {

struct GmadPair {
    std::string low_img;   // attacker's minimum within the level
    std::string high_img;  // attacker's maximum within the level
    int level = 0;         // 0-based defender quality level
    double attacker_gap = 0.0;
};

inline std::vector<GmadPair> gmad_pairs(
    const std::map<std::string, double>& defender,
    const std::map<std::string, double>& attacker, int n_levels = 6) {
    if (n_levels < 1) throw ConfigError("gmad: n_levels must be positive");
    if (defender.size() != attacker.size())
        throw InputError("gmad: score maps cover different corpora");
    for (const auto& [id, s] : defender)
        if (!attacker.count(id))
            throw InputError("gmad: attacker missing score for " + id);
    if (defender.size() < 2 * static_cast<std::size_t>(n_levels))
        throw InputError("gmad: corpus of " + std::to_string(defender.size()) +
                         " images cannot fill " + std::to_string(n_levels) +
                         " levels with pairs");

    // sort by defender score, ties broken by id so binning is deterministic
    std::vector<std::string> ids;
    ids.reserve(defender.size());
    for (const auto& [id, s] : defender) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) {
        double da = defender.at(a), db = defender.at(b);
        return da != db ? da < db : a < b;
    });

    const std::size_t n = ids.size();
    std::vector<GmadPair> out;
    for (int lvl = 0; lvl < n_levels; ++lvl) {
        // equal-frequency partition: level l covers [l*n/L, (l+1)*n/L)
        std::size_t lo = n * static_cast<std::size_t>(lvl) /
                         static_cast<std::size_t>(n_levels);
        std::size_t hi = n * static_cast<std::size_t>(lvl + 1) /
                         static_cast<std::size_t>(n_levels);
        GmadPair p;
        p.level = lvl;
        p.low_img = p.high_img = ids[lo];
        double amin = attacker.at(ids[lo]), amax = amin;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            double a = attacker.at(ids[i]);
            // attacker-score ties resolve to the lexicographically lowest id
            if (a < amin || (a == amin && ids[i] < p.low_img)) {
                amin = a;
                p.low_img = ids[i];
            }
            if (a > amax || (a == amax && ids[i] < p.high_img)) {
                amax = a;
                p.high_img = ids[i];
            }
        }
        p.attacker_gap = amax - amin;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace glint::eval
