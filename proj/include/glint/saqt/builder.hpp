#pragma once

// Dataset construction: match each high-quality image to its semantically
// nearest labeled pristine image, degrade it over the (family, level) grid,
// and copy the matched pristine's MOS for each cell verbatim.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "glint/core/error.hpp"
#include "glint/data/distortions.hpp"
#include "glint/data/image.hpp"
#include "glint/io/hash.hpp"
#include "glint/saqt/embedding.hpp"

namespace glint::saqt {

using json = nlohmann::json;

struct CorpusEntry {
    std::string id;
    std::string path;
    // MOS per (family, level 1..5), already rescaled to [0,9]
    std::map<std::string, std::vector<double>> mos;
};

struct MosRescale {
    double src_min = 0.0, src_max = 9.0;
    double dst_min = 0.0, dst_max = 9.0;
    double apply(double v) const {
        if (src_max == src_min) return dst_min;
        return dst_min + (v - src_min) / (src_max - src_min) * (dst_max - dst_min);
    }
};

struct LabeledCorpus {
    std::vector<CorpusEntry> entries;
    MosRescale rescale;  // map used to bring native MOS into [0,9]

    double mos_at(std::size_t idx, const std::string& family, int level) const {
        const auto& e = entries.at(idx);
        auto it = e.mos.find(family);
        if (it == e.mos.end() ||
            static_cast<int>(it->second.size()) < level)
            throw DataError("missing MOS for (" + e.id + ", " + family + ", " +
                            std::to_string(level) + ")");
        return it->second[static_cast<std::size_t>(level - 1)];
    }

    void validate(const std::vector<std::string>& families) const {
        for (std::size_t i = 0; i < entries.size(); ++i)
            for (const auto& f : families)
                for (int l = 1; l <= 5; ++l) {
                    double m = mos_at(i, f, l);
                    if (m < 0.0 || m > 9.0)
                        throw DataError("MOS out of [0,9] at (" + entries[i].id +
                                        ", " + f + ", " + std::to_string(l) + ")");
                }
    }
};

// Corpus file: {"entries":[{"id","path","mos":{family:[5 values]}}],
// "native_range":[lo,hi] (optional; min-max of values when absent)}
inline LabeledCorpus load_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open corpus " + path);
    json j = json::parse(f);
    LabeledCorpus corpus;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& je : j.at("entries")) {
        CorpusEntry e;
        e.id = je.at("id").get<std::string>();
        e.path = je.value("path", "");
        for (const auto& [fam, arr] : je.at("mos").items()) {
            std::vector<double> v = arr.get<std::vector<double>>();
            for (double x : v) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            e.mos[fam] = std::move(v);
        }
        corpus.entries.push_back(std::move(e));
    }
    if (j.contains("native_range")) {
        corpus.rescale.src_min = j["native_range"][0].get<double>();
        corpus.rescale.src_max = j["native_range"][1].get<double>();
    } else {
        corpus.rescale.src_min = lo;
        corpus.rescale.src_max = hi;
    }
    // values outside [0,9] are native-scale: rescale them in place
    if (corpus.rescale.src_min < 0.0 || corpus.rescale.src_max > 9.0)
        for (auto& e : corpus.entries)
            for (auto& [fam, v] : e.mos)
                for (double& x : v) x = corpus.rescale.apply(x);
    return corpus;
}

struct ManifestRecord {
    std::string image_path;
    std::string hq_id;
    std::string matched_pristine_id;
    double semantic_distance = 0.0;
    std::string family;
    int level = 1;
    double label = 0.0;
    std::uint64_t seed = 0;

    json to_json() const {
        return json{{"image_path", image_path},
                    {"hq_id", hq_id},
                    {"matched_pristine_id", matched_pristine_id},
                    {"semantic_distance", semantic_distance},
                    {"type", family},
                    {"level", level},
                    {"label", label},
                    {"seed", seed}};
    }
    static ManifestRecord from_json(const json& j) {
        ManifestRecord r;
        r.image_path = j.at("image_path");
        r.hq_id = j.at("hq_id");
        r.matched_pristine_id = j.at("matched_pristine_id");
        r.semantic_distance = j.at("semantic_distance");
        r.family = j.at("type");
        r.level = j.at("level");
        r.label = j.at("label");
        r.seed = j.at("seed");
        return r;
    }
};

struct DatasetManifest {
    json header;  // config hash, extractor tag, rescale map
    std::vector<ManifestRecord> records;

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw IoError("cannot write manifest " + path);
        f << header.dump() << "\n";
        for (const auto& r : records) f << r.to_json().dump() << "\n";
    }
    static DatasetManifest load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw IoError("cannot read manifest " + path);
        DatasetManifest m;
        std::string line;
        if (!std::getline(f, line)) throw DataError("manifest empty: " + path);
        m.header = json::parse(line);
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            m.records.push_back(ManifestRecord::from_json(json::parse(line)));
        }
        return m;
    }
};

// labels for one matched (hq, pristine) pair across the spec grid; the
// degradation itself is the caller's business when images are not written
inline std::vector<ManifestRecord> transfer_labels(
    const std::string& hq_id, std::size_t matched_idx, double distance,
    const LabeledCorpus& corpus, const std::vector<DistortionSpec>& specs) {
    std::vector<ManifestRecord> out;
    out.reserve(specs.size());
    for (const auto& s : specs) {
        ManifestRecord r;
        r.hq_id = hq_id;
        r.matched_pristine_id = corpus.entries.at(matched_idx).id;
        r.semantic_distance = distance;
        r.family = s.family;
        r.level = s.level;
        r.label = corpus.mos_at(matched_idx, s.family, s.level);  // exact copy
        r.seed = s.seed;
        out.push_back(std::move(r));
    }
    return out;
}

struct BuildConfig {
    std::vector<std::string> families;
    int level_lo = 1, level_hi = 5;
    std::uint64_t seed = 0;
    std::string out_dir;        // degraded PNGs land here; empty = labels only
    bool write_images = true;
};

struct BuildStats {
    std::size_t hq_images = 0;
    std::size_t failed_files = 0;
    double distance_mean = 0.0;
    double distance_std = 0.0;
};

inline std::vector<std::string> list_images(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw InputError("no images found in " + dir);
    return out;
}

inline std::pair<DatasetManifest, BuildStats> build_dataset(
    const std::string& hq_dir, const LabeledCorpus& corpus,
    const DistortionBank& bank, const EmbeddingExtractor& extractor,
    const BuildConfig& cfg) {
    corpus.validate(cfg.families);

    std::vector<SemanticEmbedding> pristine_embeds;
    for (const auto& e : corpus.entries) {
        if (e.path.empty())
            throw DataError("corpus entry " + e.id + " has no image path");
        pristine_embeds.push_back(extractor(load_image(e.path), e.id));
    }

    auto specs = bank.enumerate_specs(cfg.families, cfg.level_lo, cfg.level_hi,
                                      cfg.seed);

    DatasetManifest manifest;
    BuildStats stats;
    std::vector<double> distances;

    namespace fs = std::filesystem;
    if (cfg.write_images && !cfg.out_dir.empty())
        fs::create_directories(cfg.out_dir);

    for (const auto& hq_path : list_images(hq_dir)) {
        std::string hq_id = fs::path(hq_path).stem().string();
        try {
            auto img = load_image(hq_path);
            auto emb = extractor(img, hq_id);
            auto [idx, dist] = match_pristine(emb, pristine_embeds);
            distances.push_back(dist);
            auto records = transfer_labels(hq_id, idx, dist, corpus, specs);
            for (std::size_t k = 0; k < records.size(); ++k) {
                const auto& s = specs[k];
                if (cfg.write_images && !cfg.out_dir.empty()) {
                    auto degraded = bank.apply(img, s, hq_id);
                    std::string name = hq_id + "_" + s.family + "_l" +
                                       std::to_string(s.level) + ".png";
                    std::string path = (fs::path(cfg.out_dir) / name).string();
                    save_png(degraded.data, path);
                    records[k].image_path = path;
                } else {
                    records[k].image_path = hq_path;
                }
                manifest.records.push_back(std::move(records[k]));
            }
            ++stats.hq_images;
        } catch (const Error& e) {
            // continue-on-error with accounting
            ++stats.failed_files;
        }
    }

    // deterministic record order: (hq id, family, level)
    std::sort(manifest.records.begin(), manifest.records.end(),
              [](const ManifestRecord& a, const ManifestRecord& b) {
                  return std::tie(a.hq_id, a.family, a.level) <
                         std::tie(b.hq_id, b.family, b.level);
              });

    if (!distances.empty()) {
        double n = static_cast<double>(distances.size());
        double mean = 0.0;
        for (double d : distances) mean += d;
        mean /= n;
        double var = 0.0;
        for (double d : distances) var += (d - mean) * (d - mean);
        stats.distance_mean = mean;
        stats.distance_std = std::sqrt(var / n);
    }

    json cfg_json = {{"families", cfg.families},
                     {"levels", {cfg.level_lo, cfg.level_hi}},
                     {"seed", cfg.seed},
                     {"extractor", extractor.tag()}};
    manifest.header = {
        {"config_hash", config_hash(cfg_json.dump())},
        {"extractor_tag", extractor.tag()},
        {"rescale",
         {{"src_min", corpus.rescale.src_min},
          {"src_max", corpus.rescale.src_max},
          {"dst_min", corpus.rescale.dst_min},
          {"dst_max", corpus.rescale.dst_max}}},
        {"families", cfg.families},
        {"levels", {cfg.level_lo, cfg.level_hi}},
        {"seed", cfg.seed},
        {"distance_mean", stats.distance_mean},
        {"distance_std", stats.distance_std}};
    return {std::move(manifest), stats};
}

}  // namespace glint::saqt
