#pragma once

// Split protocols and report assembly: repeated 8:2 partitions keyed by
// content id (so no pristine source leaks across the boundary on synthetic
// sets), cross-corpus evaluation, and median-of-repeats reporting.

#include <algorithm>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glint/core/error.hpp"
#include "glint/eval/correlation.hpp"

namespace glint::eval {

using json = nlohmann::json;

struct EvalItem {
    std::string id;          // unique per image
    std::string content_id;  // pristine/source id; equals id for authentic sets
    std::string path;
    double label = 0.0;
};

struct DatasetView {
    std::string tag;
    std::vector<EvalItem> items;

    std::vector<std::string> content_ids() const {
        std::set<std::string> s;
        for (const auto& it : items) s.insert(it.content_id);
        return {s.begin(), s.end()};
    }
};

struct SplitPlan {
    int repeat_index = 0;
    std::vector<std::size_t> train;  // indices into DatasetView::items
    std::vector<std::size_t> test;
};

// 8:2 over content ids (floor on the test side), seeded shuffle per repeat
inline SplitPlan make_split(const DatasetView& ds, int repeat_index,
                            std::uint64_t seed, double test_fraction = 0.2) {
    auto contents = ds.content_ids();
    if (contents.size() < 5)
        throw ProtocolError("split: need at least 5 content ids, have " +
                            std::to_string(contents.size()));
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(repeat_index));
    std::shuffle(contents.begin(), contents.end(), rng);
    std::size_t n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(contents.size()) * test_fraction));
    if (n_test == 0) throw ProtocolError("split: empty test side");
    std::set<std::string> test_contents(contents.begin(),
                                        contents.begin() + n_test);
    SplitPlan plan;
    plan.repeat_index = repeat_index;
    for (std::size_t i = 0; i < ds.items.size(); ++i)
        (test_contents.count(ds.items[i].content_id) ? plan.test : plan.train)
            .push_back(i);
    return plan;
}

struct EvalReport {
    std::string model_tag;
    std::string protocol;  // "single" or "cross"
    std::vector<std::string> dataset_tags;
    std::vector<double> srocc_per_repeat;
    std::vector<double> plcc_per_repeat;
    double srocc_median = 0.0;
    double plcc_median = 0.0;

    void finalize() {
        srocc_median = median(srocc_per_repeat);
        plcc_median = median(plcc_per_repeat);
    }

    json to_json() const {
        return json{{"model_tag", model_tag},
                    {"protocol", protocol},
                    {"dataset_tags", dataset_tags},
                    {"srocc_per_repeat", srocc_per_repeat},
                    {"plcc_per_repeat", plcc_per_repeat},
                    {"srocc_median", srocc_median},
                    {"plcc_median", plcc_median}};
    }
};

// a trained predictor maps an item to a score
using Predictor = std::function<double(const EvalItem&)>;
// a model factory trains on the given items and returns a predictor
using ModelFactory = std::function<Predictor(const std::vector<EvalItem>& train,
                                             std::uint64_t seed)>;

inline std::pair<double, double> score_items(const Predictor& model,
                                             const DatasetView& ds,
                                             const std::vector<std::size_t>& idx) {
    std::vector<double> pred, truth;
    pred.reserve(idx.size());
    for (std::size_t i : idx) {
        pred.push_back(model(ds.items[i]));
        truth.push_back(ds.items[i].label);
    }
    return {srocc(pred, truth), plcc(pred, truth)};
}

inline EvalReport run_protocol(const ModelFactory& factory,
                               const DatasetView& ds, int n_repeats = 10,
                               std::uint64_t seed = 0,
                               const std::string& model_tag = "model") {
    EvalReport rep;
    rep.model_tag = model_tag;
    rep.protocol = "single";
    rep.dataset_tags = {ds.tag};
    for (int r = 0; r < n_repeats; ++r) {
        auto plan = make_split(ds, r, seed);
        std::vector<EvalItem> train;
        for (std::size_t i : plan.train) train.push_back(ds.items[i]);
        auto model = factory(train, seed + 1000 + static_cast<std::uint64_t>(r));
        auto [s, p] = score_items(model, ds, plan.test);
        rep.srocc_per_repeat.push_back(s);
        rep.plcc_per_repeat.push_back(p);
    }
    rep.finalize();
    return rep;
}

// evaluate one trained predictor on unseen corpora; the per-repeat slots hold
// one entry per target dataset here
inline EvalReport cross_eval(const Predictor& model,
                             const std::string& source_tag,
                             const std::vector<DatasetView>& targets,
                             const std::string& model_tag = "model") {
    if (targets.empty()) throw ProtocolError("cross_eval: no targets");
    EvalReport rep;
    rep.model_tag = model_tag;
    rep.protocol = "cross";
    for (const auto& t : targets) {
        if (t.tag == source_tag)
            throw ProtocolError("cross_eval: target '" + t.tag +
                                "' overlaps the training source");
        std::vector<std::size_t> all(t.items.size());
        std::iota(all.begin(), all.end(), 0);
        auto [s, p] = score_items(model, t, all);
        rep.dataset_tags.push_back(t.tag);
        rep.srocc_per_repeat.push_back(s);
        rep.plcc_per_repeat.push_back(p);
    }
    rep.finalize();
    return rep;
}

// labels CSV adapter: image_path,label[,content_id,type,level]; header optional
inline DatasetView load_dataset_csv(const std::string& csv_path,
                                    const std::string& tag) {
    std::ifstream f(csv_path);
    if (!f) throw IoError("cannot open labels csv " + csv_path);
    DatasetView ds;
    ds.tag = tag;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (first && cols.size() >= 2 && cols[0] == "image_path") {
            first = false;
            continue;  // header row
        }
        first = false;
        if (cols.size() < 2)
            throw DataError("labels csv: malformed row '" + line + "'");
        EvalItem it;
        it.path = cols[0];
        it.id = cols[0];
        try {
            it.label = std::stod(cols[1]);
        } catch (const std::exception&) {
            throw DataError("labels csv: bad label in row '" + line + "'");
        }
        it.content_id = cols.size() >= 3 && !cols[2].empty() ? cols[2] : it.id;
        ds.items.push_back(std::move(it));
    }
    if (ds.items.empty()) throw DataError("labels csv: no rows in " + csv_path);
    return ds;
}

}  // namespace glint::eval
