#pragma once

// Semantic distance vs. label agreement: for every pair of pristine images
// with a shared (type, level) MOS grid, correlate their quality vectors and
// aggregate the correlations into fixed-width distance bins.

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "glint/core/error.hpp"
#include "glint/eval/correlation.hpp"
#include "glint/eval/svg.hpp"
#include "glint/saqt/embedding.hpp"

namespace glint::eval {

struct AnalysisEntry {
    std::string id;
    saqt::SemanticEmbedding embedding;
    std::vector<double> mos;  // flattened (type, level) grid, shared layout
};

struct DistanceQualityBin {
    int index = 0;
    double center = 0.0;
    std::size_t pairs = 0;
    double mean_plcc = 0.0;
    double std_plcc = 0.0;
};

struct DistanceQualityTable {
    double bin_width = 0.07;
    std::vector<DistanceQualityBin> bins;
    std::size_t skipped_pairs = 0;

    void save_csv(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw IoError("cannot write analysis csv " + path);
        f << "bin_center,pairs,mean_plcc,std_plcc\n";
        for (const auto& b : bins)
            f << b.center << "," << b.pairs << "," << b.mean_plcc << ","
              << b.std_plcc << "\n";
    }
    void save_plot(const std::string& path) const {
        PlotSeries s;
        for (const auto& b : bins) {
            s.x.push_back(b.center);
            s.y.push_back(b.mean_plcc);
            s.yerr.push_back(b.std_plcc);
        }
        write_svg_plot(path, s, "Label agreement vs semantic distance",
                       "semantic distance (bin center)", "mean PLCC");
    }
};

inline int distance_bin(double d, double width = 0.07) {
    return static_cast<int>(std::floor(d / width));
}

inline DistanceQualityTable analyze_distance_quality(
    const std::vector<AnalysisEntry>& entries, double bin_width = 0.07) {
    if (entries.size() < 2)
        throw InputError("distance-quality analysis needs at least 2 entries");
    std::map<int, std::vector<double>> by_bin;
    DistanceQualityTable table;
    table.bin_width = bin_width;
    std::size_t grid = 0;
    for (const auto& e : entries) grid = std::max(grid, e.mos.size());
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            const auto& a = entries[i];
            const auto& b = entries[j];
            if (a.mos.size() != grid || b.mos.size() != grid || grid < 3) {
                ++table.skipped_pairs;  // incomplete grid: skip with accounting
                continue;
            }
            double d = saqt::semantic_distance(a.embedding, b.embedding);
            double r;
            try {
                r = plcc(a.mos, b.mos);
            } catch (const NumericError&) {
                ++table.skipped_pairs;  // constant vector, correlation undefined
                continue;
            }
            by_bin[distance_bin(d, bin_width)].push_back(r);
        }
    for (const auto& [idx, vals] : by_bin) {
        DistanceQualityBin b;
        b.index = idx;
        b.center = (static_cast<double>(idx) + 0.5) * bin_width;
        b.pairs = vals.size();
        double m = 0.0;
        for (double v : vals) m += v;
        m /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - m) * (v - m);
        b.mean_plcc = m;
        b.std_plcc = std::sqrt(var / static_cast<double>(vals.size()));
        table.bins.push_back(b);
    }
    return table;
}

}  // namespace glint::eval
