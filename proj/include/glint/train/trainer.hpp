#pragma once

// Training loop: L1 objective, random-crop augmentation, cosine-annealed
// Adam steps, periodic validation and best-checkpoint retention.

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "glint/core/error.hpp"
#include "glint/data/image.hpp"
#include "glint/eval/correlation.hpp"
#include "glint/nn/model.hpp"
#include "glint/train/checkpoint.hpp"
#include "glint/train/optim.hpp"

namespace glint::train {

using json = nlohmann::json;

inline double l1_loss(const std::vector<double>& pred,
                      const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw InputError("l1_loss: length mismatch or empty");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        s += std::fabs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

inline ImageTensor crop(const ImageTensor& x, int top, int left, int size) {
    ImageTensor out;
    out.h = out.w = size;
    out.data.resize(3, static_cast<Eigen::Index>(size) * size);
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j)
            out.data.col(static_cast<Eigen::Index>(i) * size + j) =
                x.data.col(static_cast<Eigen::Index>(top + i) * x.w + left + j);
    return out;
}

inline ImageTensor random_crop(const ImageTensor& x, int size,
                               std::mt19937_64& rng) {
    if (x.h < size || x.w < size)
        throw InputError("random_crop: image " + std::to_string(x.h) + "x" +
                         std::to_string(x.w) + " smaller than crop " +
                         std::to_string(size));
    std::uniform_int_distribution<int> dt(0, x.h - size), dl(0, x.w - size);
    int top = dt(rng), left = dl(rng);
    return crop(x, top, left, size);
}

inline ImageTensor random_crop(const ImageTensor& x, int size,
                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_crop(x, size, rng);
}

// mean score over seeded random crops of the model's input size
template <typename Model>
double infer_patch_averaged(const Model& model, const ImageTensor& x,
                            int n_patches, std::uint64_t seed) {
    if (n_patches < 1) throw InputError("infer: need at least one patch");
    std::mt19937_64 rng(seed);
    double acc = 0.0;
    for (int i = 0; i < n_patches; ++i)
        acc += model.score(random_crop(x, model.input_size(), rng));
    return acc / n_patches;
}

struct TrainItem {
    std::string id;
    ImageTensor image;
    double label = 0.0;
};

struct TrainConfig {
    int epochs = 300;
    int batch_size = 32;
    double initial_lr = 1e-5;
    double lr_floor = 0.0;
    double weight_decay = 1e-5;
    int crop_size = 224;
    int eval_interval_epochs = 5;
    int val_patches = 10;
    std::uint64_t seed = 0;
    std::string mode = "finetune";
    int stop_after_epoch = -1;  // pause mid-schedule (resume continues it)

    static TrainConfig finetune() { return {}; }
    static TrainConfig pretrain() {
        TrainConfig c;
        c.epochs = 6;
        c.batch_size = 192;
        c.initial_lr = 5e-5;
        c.mode = "pretrain";
        return c;
    }
};

struct TrainLogEntry {
    int epoch = 0;
    double loss = 0.0;
    double val_srocc = 0.0;
    double val_plcc = 0.0;
    double lr = 0.0;
    bool validated = false;

    json to_json() const {
        json j{{"epoch", epoch}, {"loss", loss}, {"lr", lr}};
        j["val_srocc"] = validated ? json(val_srocc) : json(nullptr);
        j["val_plcc"] = validated ? json(val_plcc) : json(nullptr);
        return j;
    }
};

struct TrainResult {
    Checkpoint best;
    Checkpoint last;
    std::vector<TrainLogEntry> log;
    double best_val_srocc = -2.0;
};

template <typename Model>
TrainResult fit(Model& model, const std::vector<TrainItem>& train_set,
                  const std::vector<TrainItem>& val_set, const TrainConfig& cfg,
                  const std::string& log_path = "",
                  const std::string& config_hash_tag = "",
                  const Checkpoint* resume = nullptr) {
    if (train_set.empty()) throw InputError("train: empty training set");

    Adam opt(AdamConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
    int start_epoch = 0;
    TrainResult result;
    if (resume) {
        resume->restore(model.params(), &opt);
        start_epoch = resume->epoch + 1;
        result.best = *resume;
        result.best_val_srocc = resume->best_metric;
    }

    const std::size_t n = train_set.size();
    const std::size_t batches =
        (n + static_cast<std::size_t>(cfg.batch_size) - 1) /
        static_cast<std::size_t>(cfg.batch_size);
    const std::size_t total_steps = batches * static_cast<std::size_t>(cfg.epochs);

    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path, resume ? std::ios::app : std::ios::out);
        if (!log_file) throw IoError("cannot write training log " + log_path);
    }

    auto validate = [&](std::uint64_t seed) {
        std::vector<double> pred, truth;
        for (const auto& it : val_set) {
            pred.push_back(
                infer_patch_averaged(model, it.image, cfg.val_patches, seed));
            truth.push_back(it.label);
        }
        return std::pair{eval::srocc(pred, truth), eval::plcc(pred, truth)};
    };

    int last_completed = start_epoch - 1;
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        // epoch-scoped rng so a resumed run replays the same sample order,
        // crops and dropout masks
        std::mt19937_64 rng(cfg.seed ^
                            (0x9e3779b97f4a7c15ULL *
                             (static_cast<std::uint64_t>(epoch) + 1)));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        double lr = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::size_t lo = b * static_cast<std::size_t>(cfg.batch_size);
            std::size_t hi = std::min(n, lo + static_cast<std::size_t>(cfg.batch_size));
            model.params().zero_grad();
            std::vector<ag::Var> losses;
            std::vector<std::string> batch_ids;
            for (std::size_t i = lo; i < hi; ++i) {
                const auto& item = train_set[order[i]];
                batch_ids.push_back(item.id);
                auto patch = item.image.h == model.input_size() &&
                                     item.image.w == model.input_size()
                                 ? item.image
                                 : random_crop(item.image, model.input_size(),
                                               rng);
                auto pred = model.forward(patch, &rng);
                auto target = ag::leaf(ag::Mat::Constant(1, 1, item.label));
                losses.push_back(ag::abs_op(ag::sub(pred, target)));
            }
            auto batch_loss = losses[0];
            for (std::size_t i = 1; i < losses.size(); ++i)
                batch_loss = ag::add(batch_loss, losses[i]);
            batch_loss =
                ag::scale(batch_loss, 1.0 / static_cast<double>(losses.size()));
            double loss_val = batch_loss->val(0, 0);
            if (!std::isfinite(loss_val)) {
                std::string ids;
                for (const auto& id : batch_ids) ids += id + " ";
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch ids: " + ids);
            }
            ag::backward(batch_loss);
            std::size_t global_step =
                static_cast<std::size_t>(epoch) * batches + b;
            lr = cosine_lr(global_step, total_steps, cfg.initial_lr,
                           cfg.lr_floor);
            opt.step(model.params(), lr);
            epoch_loss += loss_val;
        }
        epoch_loss /= static_cast<double>(batches);

        TrainLogEntry entry;
        entry.epoch = epoch;
        entry.loss = epoch_loss;
        entry.lr = lr;
        bool last_epoch = epoch + 1 == cfg.epochs;
        if (!val_set.empty() &&
            ((epoch + 1) % cfg.eval_interval_epochs == 0 || last_epoch)) {
            auto [s, p] = validate(cfg.seed + 7777);
            entry.validated = true;
            entry.val_srocc = s;
            entry.val_plcc = p;
            if (s > result.best_val_srocc) {
                result.best_val_srocc = s;
                result.best = Checkpoint::capture(model.params(), opt, epoch, s,
                                                  config_hash_tag);
            }
        }
        result.log.push_back(entry);
        if (log_file) log_file << entry.to_json().dump() << "\n";
        last_completed = epoch;
        if (cfg.stop_after_epoch >= 0 && epoch >= cfg.stop_after_epoch) break;
    }

    result.last = Checkpoint::capture(model.params(), opt, last_completed,
                                      result.best_val_srocc, config_hash_tag);
    if (result.best.epoch < 0) result.best = result.last;
    return result;
}

}  // namespace glint::train
