#pragma once

// Semantic embeddings: penultimate global-pooled features of a small
// classification-style CNN, 2048-dimensional. The extractor is pluggable;
// its tag is persisted with every artifact so analyses declare which
// embedding space they used.

#include <Eigen/Dense>
#include <random>
#include <string>

#include "glint/core/error.hpp"
#include "glint/data/image.hpp"
#include "glint/nn/backbones.hpp"
#include "glint/nn/module.hpp"

namespace glint::saqt {

struct SemanticEmbedding {
    Eigen::VectorXd vector;  // length 2048
    std::string source_id;
    std::string extractor_tag;
};

class EmbeddingExtractor {
public:
    static constexpr int kDim = 2048;
    static constexpr int kInputSize = 128;

    explicit EmbeddingExtractor(std::uint64_t seed = 17,
                                std::string tag = "glint-cnn-v1") :
        tag_(std::move(tag)) {
        nn::BackboneConfig bc;
        bc.cnn_stage_count = 3;
        bc.cnn_stage_channels = {64, 128, 256};
        bc.stem_channels = 32;
        std::mt19937_64 rng(seed);
        stages_ = std::make_unique<nn::ConvStages>(params_, "net", rng, bc);
        head_ = nn::Conv2d(params_, "net.head", rng, 256, kDim, 1, 1, 0);
    }

    const std::string& tag() const { return tag_; }
    nn::ParamStore& params() { return params_; }

    SemanticEmbedding operator()(const ImageTensor& img,
                                 const std::string& source_id = "") const {
        if (!img.valid()) throw InputError("embedding: invalid image");
        ImageTensor in =
            (img.h == kInputSize && img.w == kInputSize)
                ? img
                : resize(img, kInputSize, kInputSize);
        auto x = ag::leaf(in.data);
        x->ch = 3;
        x->sh = in.h;
        x->sw = in.w;
        auto feats = stages_->forward(x);
        auto maps = head_(feats.back());  // (2048, s*s)
        SemanticEmbedding e;
        e.vector = maps->val.rowwise().mean();  // global average pool
        e.source_id = source_id;
        e.extractor_tag = tag_;
        if (!e.vector.allFinite())
            throw NumericError("embedding: non-finite output for " + source_id);
        return e;
    }

private:
    nn::ParamStore params_;
    std::unique_ptr<nn::ConvStages> stages_;
    nn::Conv2d head_;
    std::string tag_;
};

// Eq.-style cosine distance: 1 - <a,b>/(|a||b|), in [0,2], symmetric
inline double semantic_distance(const SemanticEmbedding& a,
                                const SemanticEmbedding& b) {
    double na = a.vector.norm(), nb = b.vector.norm();
    if (na == 0.0 || nb == 0.0)
        throw NumericError("semantic_distance: zero-norm embedding");
    if (a.vector == b.vector) return 0.0;  // exact for duplicated content
    double d = 1.0 - a.vector.dot(b.vector) / (na * nb);
    return std::clamp(d, 0.0, 2.0);
}

// exact linear-scan argmin; ties resolved to the lowest index
inline std::pair<std::size_t, double> match_pristine(
    const SemanticEmbedding& query,
    const std::vector<SemanticEmbedding>& corpus) {
    if (corpus.empty()) throw InputError("match_pristine: empty corpus");
    std::size_t best = 0;
    double best_d = semantic_distance(query, corpus[0]);
    for (std::size_t i = 1; i < corpus.size(); ++i) {
        double d = semantic_distance(query, corpus[i]);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return {best, best_d};
}

}  // namespace glint::saqt
