#pragma once

// Adam with decoupled weight decay and the cosine-annealed learning rate
// used by both training recipes.

#include <cmath>
#include <map>
#include <string>

#include "glint/core/error.hpp"
#include "glint/nn/module.hpp"

namespace glint::train {

// lr(0) = initial, lr(total_steps) = floor, half-cosine in between
inline double cosine_lr(std::size_t step, std::size_t total_steps,
                        double initial, double floor = 0.0) {
    if (total_steps == 0) return initial;
    double t = std::min(1.0, static_cast<double>(step) /
                                 static_cast<double>(total_steps));
    return floor + 0.5 * (initial - floor) * (1.0 + std::cos(M_PI * t));
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled: p -= lr * wd * p
};

class Adam {
public:
    struct Slot {
        ag::Mat m, v;
    };

    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::uint64_t step_count() const { return t_; }
    std::map<std::string, Slot>& slots() { return slots_; }
    const std::map<std::string, Slot>& slots() const { return slots_; }
    void set_step_count(std::uint64_t t) { t_ = t; }

    void step(nn::ParamStore& params, double lr) {
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (const auto& p : params.all()) {
            if (!p->trainable) continue;
            auto& node = *p->node;
            if (node.grad.size() == 0) continue;  // unreached this step
            auto& slot = slots_[p->name];
            if (slot.m.size() == 0) {
                slot.m = ag::Mat::Zero(node.val.rows(), node.val.cols());
                slot.v = ag::Mat::Zero(node.val.rows(), node.val.cols());
            }
            slot.m = cfg_.beta1 * slot.m + (1.0 - cfg_.beta1) * node.grad;
            slot.v = cfg_.beta2 * slot.v.array().matrix() +
                     (1.0 - cfg_.beta2) * node.grad.cwiseProduct(node.grad);
            ag::Mat mhat = slot.m / bc1;
            ag::Mat vhat = slot.v / bc2;
            node.val -= lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps))
                                 .matrix();
            if (cfg_.weight_decay != 0.0)
                node.val -= lr * cfg_.weight_decay * node.val;
        }
    }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::map<std::string, Slot> slots_;
};

}  // namespace glint::train
