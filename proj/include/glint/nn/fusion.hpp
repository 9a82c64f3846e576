#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "glint/core/autograd.hpp"
#include "glint/core/error.hpp"
#include "glint/nn/module.hpp"

namespace glint::nn {

// Channel-wise self-attention. Tokens are transposed so channels act as the
// attention sequence; each channel vector has length N, so the Q/K/V
// projections map N -> N. The softmax scale stays 1/sqrt(d) with d the
// embedding dimension.
class Cwsa {
public:
    Cwsa() = default;
    Cwsa(ParamStore& ps, const std::string& prefix, std::mt19937_64& rng,
         int n_tokens, int scale_dim)
        : q_(ps, prefix + ".q", rng, n_tokens, n_tokens),
          k_(ps, prefix + ".k", rng, n_tokens, n_tokens),
          v_(ps, prefix + ".v", rng, n_tokens, n_tokens),
          n_tokens_(n_tokens),
          scale_(1.0 / std::sqrt(static_cast<double>(scale_dim))) {}

    // (N, C) -> (N, C), residual form
    ag::Var operator()(const ag::Var& z) const {
        if (!z->val.allFinite()) throw NumericError("cwsa: non-finite input");
        if (z->val.rows() != n_tokens_)
            throw DimensionError("cwsa built for N=" + std::to_string(n_tokens_) +
                                 ", got N=" + std::to_string(z->val.rows()));
        auto zt = ag::transpose(z);  // (C, N): channels as tokens
        auto Q = q_(zt), K = k_(zt), V = v_(zt);
        auto attn = ag::softmax_rows(
            ag::scale(ag::matmul(Q, ag::transpose(K)), scale_));
        auto out = ag::add(ag::matmul(attn, V), zt);
        return ag::transpose(out);
    }

    int n_tokens() const { return n_tokens_; }

private:
    Linear q_, k_, v_;
    int n_tokens_ = 0;
    double scale_ = 1.0;
};

// Spatial interaction enhancement: reshape tokens to 2D maps, 3x3 stride-1
// convolution from 2d to d channels (pad 1 keeps the grid), flatten back.
class Siem {
public:
    Siem() = default;
    Siem(ParamStore& ps, const std::string& prefix, std::mt19937_64& rng,
         int in_dim, int out_dim, int pad = 1)
        : conv_(ps, prefix + ".conv", rng, in_dim, out_dim, 3, 1, pad),
          in_dim_(in_dim) {}

    // (N, 2d) tokens on an (gh, gw) grid -> (N, d)
    ag::Var operator()(const ag::Var& z, int gh, int gw) const {
        if (z->val.rows() != static_cast<Eigen::Index>(gh) * gw)
            throw DimensionError("siem: N=" + std::to_string(z->val.rows()) +
                                 " does not factor as " + std::to_string(gh) +
                                 "x" + std::to_string(gw));
        if (z->val.cols() != in_dim_)
            throw DimensionError("siem: expected " + std::to_string(in_dim_) +
                                 " channels, got " +
                                 std::to_string(z->val.cols()));
        auto maps = ag::tokens_to_maps(z, gh, gw);
        return ag::maps_to_tokens(conv_(maps));
    }

private:
    Conv2d conv_;
    int in_dim_ = 0;
};

// Two-layer MLP head: mean over tokens, d -> d, GELU, dropout, d -> 1.
class PredictionHead {
public:
    PredictionHead() = default;
    PredictionHead(ParamStore& ps, const std::string& prefix,
                   std::mt19937_64& rng, int d, double dropout = 0.1)
        : fc1_(ps, prefix + ".fc1", rng, d, d),
          fc2_(ps, prefix + ".fc2", rng, d, 1),
          dropout_(dropout) {}

    // train-mode dropout draws its mask from `rng` when provided
    ag::Var operator()(const ag::Var& tokens, std::mt19937_64* rng = nullptr) const {
        if (!tokens->val.allFinite())
            throw NumericError("prediction head: non-finite input");
        auto pooled = ag::mean_rows(tokens);  // (1, d)
        auto h = ag::gelu(fc1_(pooled));
        if (rng && dropout_ > 0.0) {
            std::bernoulli_distribution keep(1.0 - dropout_);
            ag::Mat mask(1, h->val.cols());
            for (Eigen::Index i = 0; i < mask.cols(); ++i)
                mask(0, i) = keep(*rng) ? 1.0 / (1.0 - dropout_) : 0.0;
            h = ag::mul(h, ag::leaf(std::move(mask)));
        }
        return fc2_(h);  // (1, 1)
    }

private:
    Linear fc1_, fc2_;
    double dropout_ = 0.1;
};

struct FusionStage {
    Cwsa cwsa;
    Siem siem;
};

// f_1 = seed; per stage: concat(f_i, inject_i) -> CWSA -> SIEM -> f_{i+1}
inline ag::Var progressive_integrate(const ag::Var& seed,
                                     const std::vector<ag::Var>& injected,
                                     const std::vector<FusionStage>& stages,
                                     int gh, int gw) {
    if (injected.empty() || injected.size() != stages.size())
        throw ConfigError("progressive_integrate: stage/input count mismatch");
    ag::Var f = seed;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (injected[i]->val.rows() != f->val.rows())
            throw DimensionError(
                "progressive_integrate: token count mismatch at stage " +
                std::to_string(i + 1) + " (" + std::to_string(f->val.rows()) +
                " vs " + std::to_string(injected[i]->val.rows()) + ")");
        auto z = ag::concat_cols({f, injected[i]});
        auto zhat = stages[i].cwsa(z);
        f = stages[i].siem(zhat, gh, gw);
    }
    return f;
}

}  // namespace glint::nn
