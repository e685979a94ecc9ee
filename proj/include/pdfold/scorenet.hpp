#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdfold/autodiff.hpp"
#include "pdfold/rna.hpp"

namespace pdfold {

// The fixed position feature family: 24 sinusoids of geometric frequency over
// the absolute index, 24 over the relative index i/L, five polynomial-style
// terms and five shifted sigmoids of i/L.
constexpr int kPsiCount = 58;
constexpr const char* kPsiFamilyTag = "sin24-rsin24-poly5-sig5/v1";

struct ScoreNetConfig {
    int d = 10;              // embedding width
    int psi_count = kPsiCount;
    int encoder_layers = 2;
    int heads = 2;
    int ff_width = 64;
    std::uint64_t init_seed = 1;

    void validate() const;
};

struct EncoderLayerParams {
    std::vector<Mat> wq, wk, wv;  // one projection per head, d x d/heads
    Mat wo, bo;                   // d x d, 1 x d
    Mat ff_w1, ff_b1, ff_w2, ff_b2;
};

struct ScoreNetParams {
    ScoreNetConfig config;
    Mat embed_w, embed_b;  // 4 x d, 1 x d
    Mat pos_w1, pos_b1, pos_w2, pos_b2, pos_w3, pos_b3;
    std::vector<EncoderLayerParams> layers;
    Mat head_w1, head_b1, head_w2, head_b2;  // 6d x d, 1 x d, d x 1, 1 x 1

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) draws in enumeration order.
    static ScoreNetParams init(const ScoreNetConfig& cfg);

    // Visits every tensor with a stable name, in a fixed order shared by
    // initialization, serialization and optimizer updates.
    template <typename F>
    void for_each_tensor(F&& f) {
        f("embed.w", embed_w);
        f("embed.b", embed_b);
        f("pos.w1", pos_w1);
        f("pos.b1", pos_b1);
        f("pos.w2", pos_w2);
        f("pos.b2", pos_b2);
        f("pos.w3", pos_w3);
        f("pos.b3", pos_b3);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "enc" + std::to_string(l) + ".";
            for (std::size_t h = 0; h < layers[l].wq.size(); ++h) {
                const std::string hp = p + "h" + std::to_string(h) + ".";
                f(hp + "wq", layers[l].wq[h]);
                f(hp + "wk", layers[l].wk[h]);
                f(hp + "wv", layers[l].wv[h]);
            }
            f(p + "wo", layers[l].wo);
            f(p + "bo", layers[l].bo);
            f(p + "ff.w1", layers[l].ff_w1);
            f(p + "ff.b1", layers[l].ff_b1);
            f(p + "ff.w2", layers[l].ff_w2);
            f(p + "ff.b2", layers[l].ff_b2);
        }
        f("head.w1", head_w1);
        f("head.b1", head_b1);
        f("head.w2", head_w2);
        f("head.b2", head_b2);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        const_cast<ScoreNetParams*>(this)->for_each_tensor(
            [&](const std::string& name, Mat& m) { f(name, static_cast<const Mat&>(m)); });
    }
};

Mat position_features(int length);  // L x kPsiCount

struct ScoreNetVars {
    ad::Var embed_w, embed_b;
    ad::Var pos_w1, pos_b1, pos_w2, pos_b2, pos_w3, pos_b3;
    struct Layer {
        std::vector<ad::Var> wq, wk, wv;
        ad::Var wo, bo, ff_w1, ff_b1, ff_w2, ff_b2;
    };
    std::vector<Layer> layers;
    ad::Var head_w1, head_b1, head_w2, head_b2;

    // Same order and names as ScoreNetParams::for_each_tensor.
    template <typename F>
    void for_each_var(F&& f) {
        f("embed.w", embed_w);
        f("embed.b", embed_b);
        f("pos.w1", pos_w1);
        f("pos.b1", pos_b1);
        f("pos.w2", pos_w2);
        f("pos.b2", pos_b2);
        f("pos.w3", pos_w3);
        f("pos.b3", pos_b3);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "enc" + std::to_string(l) + ".";
            for (std::size_t h = 0; h < layers[l].wq.size(); ++h) {
                const std::string hp = p + "h" + std::to_string(h) + ".";
                f(hp + "wq", layers[l].wq[h]);
                f(hp + "wk", layers[l].wk[h]);
                f(hp + "wv", layers[l].wv[h]);
            }
            f(p + "wo", layers[l].wo);
            f(p + "bo", layers[l].bo);
            f(p + "ff.w1", layers[l].ff_w1);
            f(p + "ff.b1", layers[l].ff_b1);
            f(p + "ff.w2", layers[l].ff_w2);
            f(p + "ff.b2", layers[l].ff_b2);
        }
        f("head.w1", head_w1);
        f("head.b1", head_b1);
        f("head.w2", head_w2);
        f("head.b2", head_b2);
    }
};

ScoreNetVars lift_score_params(ad::Tape& t, const ScoreNetParams& p);

// Position embedding rows P_i = MLP(psi(i)); depends on i and i/L only, so
// any length works without re-instantiation.
ad::Var position_embedding(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg,
                           int length);

// Sequence embedding + encoder stack (self-attention, feed-forward, residual
// connections) concatenated with the position embedding into L x 3d features.
ad::Var encode(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg,
               ad::Var onehot, ad::Var pos_emb);

// Pairwise-concatenated features through the kernel-size-1 scoring stack,
// symmetrized to 0.5 * (raw + raw^T).
ad::Var score(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg, ad::Var features);

ad::Var score_forward(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg,
                      const RnaSequence& seq);

// Convenience value-only evaluation (builds a throwaway tape).
Mat score_matrix(const ScoreNetParams& params, const RnaSequence& seq);

}  // namespace pdfold
