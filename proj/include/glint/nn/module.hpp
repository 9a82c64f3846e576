#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "glint/core/autograd.hpp"
#include "glint/core/error.hpp"

namespace glint::nn {

struct Parameter {
    std::string name;
    ag::Var node;
    bool trainable = true;
};

// Flat registry of named parameters. Modules register into a shared store
// with dotted prefixes so checkpoints, freezing and the optimizer all work
// off one namespace.
class ParamStore {
public:
    ag::Var add(const std::string& name, ag::Mat init, bool trainable = true) {
        if (by_name_.count(name)) throw ConfigError("duplicate parameter " + name);
        auto p = std::make_shared<Parameter>();
        p->name = name;
        p->node = ag::leaf(std::move(init), true);
        p->trainable = trainable;
        order_.push_back(p);
        by_name_[name] = p;
        return p->node;
    }

    Parameter& at(const std::string& name) {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw ConfigError("unknown parameter " + name);
        return *it->second;
    }
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    const std::vector<std::shared_ptr<Parameter>>& all() const { return order_; }

    void zero_grad() {
        for (auto& p : order_) p->node->zero_grad();
    }

    // marks every parameter whose name starts with the prefix as frozen
    void freeze_prefix(const std::string& prefix) {
        for (auto& p : order_)
            if (p->name.rfind(prefix, 0) == 0) p->trainable = false;
    }

    std::size_t count_scalars() const {
        std::size_t n = 0;
        for (const auto& p : order_) n += p->node->val.size();
        return n;
    }

private:
    std::vector<std::shared_ptr<Parameter>> order_;
    std::map<std::string, std::shared_ptr<Parameter>> by_name_;
};

// ---- initializers ------------------------------------------------------

inline ag::Mat randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                     double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    ag::Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
    return m;
}

inline ag::Mat xavier(std::mt19937_64& rng, Eigen::Index fan_out,
                      Eigen::Index fan_in) {
    double s = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    return randn(rng, fan_out, fan_in, s);
}

inline ag::Mat kaiming(std::mt19937_64& rng, Eigen::Index fan_out,
                       Eigen::Index fan_in) {
    double s = std::sqrt(2.0 / static_cast<double>(fan_in));
    return randn(rng, fan_out, fan_in, s);
}

// ---- reusable layers ---------------------------------------------------

struct Linear {
    ag::Var W, b;

    Linear() = default;
    Linear(ParamStore& ps, const std::string& prefix, std::mt19937_64& rng,
           int in, int out) {
        W = ps.add(prefix + ".weight", xavier(rng, out, in));
        b = ps.add(prefix + ".bias", ag::Mat::Zero(1, out));
    }
    ag::Var operator()(const ag::Var& x) const { return ag::linear(x, W, b); }
};

struct Conv2d {
    ag::Var W, b;
    int k = 0, stride = 1, pad = 0;

    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& prefix, std::mt19937_64& rng,
           int in_ch, int out_ch, int k_, int stride_, int pad_) {
        k = k_;
        stride = stride_;
        pad = pad_;
        W = ps.add(prefix + ".weight",
                   kaiming(rng, out_ch, static_cast<Eigen::Index>(in_ch) * k * k));
        b = ps.add(prefix + ".bias", ag::Mat::Zero(out_ch, 1));
    }
    ag::Var operator()(const ag::Var& x) const {
        return ag::conv2d(x, W, b, k, stride, pad);
    }
};

struct LayerNorm {
    ag::Var gamma, beta;

    LayerNorm() = default;
    LayerNorm(ParamStore& ps, const std::string& prefix, int d) {
        gamma = ps.add(prefix + ".gamma", ag::Mat::Ones(1, d));
        beta = ps.add(prefix + ".beta", ag::Mat::Zero(1, d));
    }
    ag::Var operator()(const ag::Var& x) const {
        return ag::layernorm_rows(x, gamma, beta);
    }
};

}  // namespace glint::nn
