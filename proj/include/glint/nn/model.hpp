#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "glint/core/autograd.hpp"
#include "glint/core/error.hpp"
#include "glint/data/image.hpp"
#include "glint/nn/backbones.hpp"
#include "glint/nn/fusion.hpp"
#include "glint/nn/module.hpp"

namespace glint::nn {

enum class FusionOrder { ClfeToVgfe, VgfeToClfe };

inline FusionOrder fusion_order_from_string(const std::string& s) {
    if (s == "clfe_to_vgfe") return FusionOrder::ClfeToVgfe;
    if (s == "vgfe_to_clfe") return FusionOrder::VgfeToClfe;
    throw ConfigError("unknown fusion order '" + s + "'");
}

struct ModelConfig {
    BackboneConfig backbone;
    FusionOrder fusion_order = FusionOrder::ClfeToVgfe;
    double dropout = 0.1;
    int siem_padding = 1;
    int input_size = 224;  // square input the CWSA projections are sized for
};

// The full scoring model: VGFE + CLFE extraction, CLFE-side channel
// attention and 3d->d projection, progressive CWSA/SIEM fusion, MLP head.
// CWSA projections act on channel vectors of length N, so an instance is
// built for a fixed input size; patch-based inference always feeds crops of
// that size.
class GlintModel {
public:
    GlintModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.backbone.validate();
        const auto& bc = cfg_.backbone;
        if (cfg_.input_size % bc.patch_size != 0)
            throw ConfigError("input size not divisible by patch size");
        grid_side_ = cfg_.input_size / bc.patch_size;
        const int n = grid_side_ * grid_side_;
        const int d = bc.embed_dim;

        std::mt19937_64 rng(seed);
        params_ = std::make_shared<ParamStore>();
        BackboneConfig vit_cfg = bc;
        vit_cfg.base_size = cfg_.input_size;
        vgfe_ = std::make_unique<Vgfe>(*params_, "vgfe", rng, vit_cfg);
        cnn_ = std::make_unique<ConvStages>(*params_, "cnn", rng, bc);
        for (int j = 1; j <= bc.cnn_stage_count; ++j)
            stage_embeds_.emplace_back(*params_,
                                       "clfe.embed" + std::to_string(j), rng,
                                       bc, j);
        clfe_cwsa_ = std::make_unique<Cwsa>(
            *params_, "clfe.cwsa", rng, n, d);
        clfe_proj_ = Linear(*params_, "clfe.proj", rng,
                            bc.cnn_stage_count * d, d);
        const int n_stages = static_cast<int>(bc.vit_block_indices.size());
        for (int i = 0; i < n_stages; ++i) {
            FusionStage st;
            st.cwsa = Cwsa(*params_, "fusion.stage" + std::to_string(i + 1) +
                                         ".cwsa",
                           rng, n, d);
            st.siem = Siem(*params_, "fusion.stage" + std::to_string(i + 1) +
                                         ".siem",
                           rng, 2 * d, d, cfg_.siem_padding);
            fusion_.push_back(std::move(st));
        }
        head_ = std::make_unique<PredictionHead>(*params_, "head", rng, d,
                                                 cfg_.dropout);
        apply_freezing();
    }

    GlintModel(const GlintModel&) = delete;
    GlintModel& operator=(const GlintModel&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return *params_; }
    const ParamStore& params() const { return *params_; }
    int input_size() const { return cfg_.input_size; }
    int grid_side() const { return grid_side_; }

    // Eq. 7: embed the three stage features, concat to (N, 3d), CWSA,
    // linear 3d -> d
    ag::Var clfe_forward(const ag::Var& x) const {
        auto stage_feats = cnn_->forward(x);
        if (stage_feats.size() != stage_embeds_.size())
            throw ConfigError("clfe: stage count mismatch");
        std::vector<ag::Var> grids;
        for (std::size_t j = 0; j < stage_feats.size(); ++j)
            grids.push_back(stage_embeds_[j](stage_feats[j]));
        auto cat = ag::concat_cols(grids);
        return clfe_proj_((*clfe_cwsa_)(cat));
    }

    std::vector<ag::Var> vgfe_forward(const ag::Var& x) const {
        return vgfe_->forward(x);
    }

    // end-to-end scalar score node; rng enables dropout (training mode)
    ag::Var forward(const ImageTensor& img, std::mt19937_64* rng = nullptr) const {
        if (img.h != cfg_.input_size || img.w != cfg_.input_size)
            throw DimensionError("model built for " +
                                 std::to_string(cfg_.input_size) + "x" +
                                 std::to_string(cfg_.input_size) + ", got " +
                                 std::to_string(img.h) + "x" +
                                 std::to_string(img.w));
        auto x = normalize_input(img, cfg_.backbone);
        auto globals = vgfe_forward(x);
        auto f_l = clfe_forward(x);

        ag::Var seed;
        std::vector<ag::Var> injected;
        if (cfg_.fusion_order == FusionOrder::ClfeToVgfe) {
            seed = f_l;
            injected = globals;
        } else {
            seed = globals.front();
            injected.assign(globals.begin() + 1, globals.end());
            injected.push_back(f_l);
        }
        auto fused = progressive_integrate(seed, injected, fusion_, grid_side_,
                                           grid_side_);
        return (*head_)(fused, rng);
    }

    double score(const ImageTensor& img) const {
        auto s = forward(img);
        double v = s->val(0, 0);
        if (!std::isfinite(v)) throw NumericError("model produced non-finite score");
        return v;
    }

private:
    void apply_freezing() {
        const int fp = cfg_.backbone.frozen_prefix;
        if (fp <= 0) return;
        params_->freeze_prefix("vgfe.patch_embed");
        params_->freeze_prefix("vgfe.pos_embed");
        params_->freeze_prefix("vgfe.cls_token");
        params_->freeze_prefix("cnn.stem");
        params_->freeze_prefix("cnn.stage1");
        for (int extra = 1; extra < fp; ++extra) {
            params_->freeze_prefix("vgfe.block" + std::to_string(extra) + ".");
            params_->freeze_prefix("cnn.stage" + std::to_string(extra + 1) + ".");
        }
    }

    ModelConfig cfg_;
    int grid_side_ = 0;
    std::shared_ptr<ParamStore> params_;
    std::unique_ptr<Vgfe> vgfe_;
    std::unique_ptr<ConvStages> cnn_;
    std::vector<StageEmbed> stage_embeds_;
    std::unique_ptr<Cwsa> clfe_cwsa_;
    Linear clfe_proj_;
    std::vector<FusionStage> fusion_;
    std::unique_ptr<PredictionHead> head_;
};

// downsized configuration used by gradient checks and overfit runs
inline ModelConfig surrogate_config() {
    ModelConfig cfg;
    cfg.backbone.vit_block_indices = {1};
    cfg.backbone.cnn_stage_count = 1;
    cfg.backbone.cnn_stage_channels = {32};
    cfg.backbone.patch_size = 8;
    cfg.backbone.embed_dim = 8;
    cfg.backbone.heads = 2;
    cfg.backbone.mlp_ratio = 2;
    cfg.backbone.stem_channels = 8;
    cfg.backbone.frozen_prefix = 0;
    cfg.backbone.base_size = 32;
    cfg.input_size = 32;
    return cfg;
}

}  // namespace glint::nn
