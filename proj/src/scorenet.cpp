#include "pdfold/scorenet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "pdfold/io.hpp"

namespace pdfold {

void ScoreNetConfig::validate() const {
    if (d < 2) throw std::invalid_argument("ScoreNetConfig: d must be >= 2");
    if (psi_count != kPsiCount)
        throw std::invalid_argument("ScoreNetConfig: psi_count is fixed at " +
                                    std::to_string(kPsiCount) + " by the feature family");
    if (encoder_layers < 0) throw std::invalid_argument("ScoreNetConfig: negative encoder_layers");
    if (heads < 1 || d % heads != 0)
        throw std::invalid_argument("ScoreNetConfig: heads must divide d");
    if (ff_width < 1) throw std::invalid_argument("ScoreNetConfig: ff_width must be >= 1");
}

namespace {

Mat uniform_init(int rows, int cols, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = dist(rng);
    return m;
}

}  // namespace

ScoreNetParams ScoreNetParams::init(const ScoreNetConfig& cfg) {
    cfg.validate();
    const int d = cfg.d;
    const int dh = d / cfg.heads;
    const int hidden = 5 * d;
    std::mt19937_64 rng(cfg.init_seed);

    ScoreNetParams p;
    p.config = cfg;
    p.embed_w = uniform_init(4, d, 4, rng);
    p.embed_b = uniform_init(1, d, 4, rng);
    p.pos_w1 = uniform_init(kPsiCount, hidden, kPsiCount, rng);
    p.pos_b1 = uniform_init(1, hidden, kPsiCount, rng);
    p.pos_w2 = uniform_init(hidden, hidden, hidden, rng);
    p.pos_b2 = uniform_init(1, hidden, hidden, rng);
    p.pos_w3 = uniform_init(hidden, d, hidden, rng);
    p.pos_b3 = uniform_init(1, d, hidden, rng);
    p.layers.resize(cfg.encoder_layers);
    for (auto& layer : p.layers) {
        layer.wq.resize(cfg.heads);
        layer.wk.resize(cfg.heads);
        layer.wv.resize(cfg.heads);
        for (int h = 0; h < cfg.heads; ++h) {
            layer.wq[h] = uniform_init(d, dh, d, rng);
            layer.wk[h] = uniform_init(d, dh, d, rng);
            layer.wv[h] = uniform_init(d, dh, d, rng);
        }
        layer.wo = uniform_init(d, d, d, rng);
        layer.bo = uniform_init(1, d, d, rng);
        layer.ff_w1 = uniform_init(d, cfg.ff_width, d, rng);
        layer.ff_b1 = uniform_init(1, cfg.ff_width, d, rng);
        layer.ff_w2 = uniform_init(cfg.ff_width, d, cfg.ff_width, rng);
        layer.ff_b2 = uniform_init(1, d, cfg.ff_width, rng);
    }
    p.head_w1 = uniform_init(6 * d, d, 6 * d, rng);
    p.head_b1 = uniform_init(1, d, 6 * d, rng);
    p.head_w2 = uniform_init(d, 1, d, rng);
    p.head_b2 = uniform_init(1, 1, d, rng);
    return p;
}

Mat position_features(int length) {
    if (length < 1) throw std::invalid_argument("position_features: length must be >= 1");
    Mat f(length, kPsiCount);
    for (int i = 0; i < length; ++i) {
        const double r = static_cast<double>(i) / static_cast<double>(length);
        int c = 0;
        for (int m = 0; m < 24; ++m)
            f(i, c++) = std::sin(i / std::pow(10000.0, 2.0 * m / 24.0));
        for (int m = 0; m < 24; ++m)
            f(i, c++) = std::sin(r / std::pow(10000.0, 2.0 * m / 24.0));
        f(i, c++) = 1.0;
        f(i, c++) = r;
        f(i, c++) = r * r;
        f(i, c++) = r * r * r;
        f(i, c++) = std::log(1.0 + i);
        for (double center : {0.1, 0.3, 0.5, 0.7, 0.9})
            f(i, c++) = 1.0 / (1.0 + std::exp(-10.0 * (r - center)));
    }
    return f;
}

ScoreNetVars lift_score_params(ad::Tape& t, const ScoreNetParams& p) {
    ScoreNetVars v;
    v.embed_w = t.leaf(p.embed_w);
    v.embed_b = t.leaf(p.embed_b);
    v.pos_w1 = t.leaf(p.pos_w1);
    v.pos_b1 = t.leaf(p.pos_b1);
    v.pos_w2 = t.leaf(p.pos_w2);
    v.pos_b2 = t.leaf(p.pos_b2);
    v.pos_w3 = t.leaf(p.pos_w3);
    v.pos_b3 = t.leaf(p.pos_b3);
    for (const auto& layer : p.layers) {
        ScoreNetVars::Layer lv;
        for (const auto& w : layer.wq) lv.wq.push_back(t.leaf(w));
        for (const auto& w : layer.wk) lv.wk.push_back(t.leaf(w));
        for (const auto& w : layer.wv) lv.wv.push_back(t.leaf(w));
        lv.wo = t.leaf(layer.wo);
        lv.bo = t.leaf(layer.bo);
        lv.ff_w1 = t.leaf(layer.ff_w1);
        lv.ff_b1 = t.leaf(layer.ff_b1);
        lv.ff_w2 = t.leaf(layer.ff_w2);
        lv.ff_b2 = t.leaf(layer.ff_b2);
        v.layers.push_back(std::move(lv));
    }
    v.head_w1 = t.leaf(p.head_w1);
    v.head_b1 = t.leaf(p.head_b1);
    v.head_w2 = t.leaf(p.head_w2);
    v.head_b2 = t.leaf(p.head_b2);
    return v;
}

namespace {

// rows x 1 of ones, to broadcast a 1 x w bias over rows via matmul.
ad::Var broadcast_bias(ad::Tape& t, ad::Var bias, int rows) {
    ad::Var ones = t.leaf(Mat::full(rows, 1, 1.0));
    return ad::matmul(ones, bias);
}

ad::Var linear(ad::Tape& t, ad::Var x, ad::Var w, ad::Var b) {
    ad::Var y = ad::matmul(x, w);
    return ad::add(y, broadcast_bias(t, b, t.value(y).rows()));
}

}  // namespace

ad::Var position_embedding(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg,
                           int length) {
    cfg.validate();
    ad::Var feats = t.leaf(position_features(length));
    ad::Var h1 = ad::relu(linear(t, feats, v.pos_w1, v.pos_b1));
    ad::Var h2 = ad::relu(linear(t, h1, v.pos_w2, v.pos_b2));
    return linear(t, h2, v.pos_w3, v.pos_b3);
}

ad::Var encode(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg,
               ad::Var onehot, ad::Var pos_emb) {
    const int dh = cfg.d / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ad::Var seq_emb = linear(t, onehot, v.embed_w, v.embed_b);
    ad::Var x = ad::add(seq_emb, pos_emb);
    for (const auto& layer : v.layers) {
        ad::Var heads_cat;
        for (std::size_t h = 0; h < layer.wq.size(); ++h) {
            ad::Var q = ad::matmul(x, layer.wq[h]);
            ad::Var k = ad::matmul(x, layer.wk[h]);
            ad::Var val = ad::matmul(x, layer.wv[h]);
            ad::Var att = ad::softmax_rows(
                ad::affine(ad::matmul(q, ad::transpose(k)), att_scale, 0.0));
            ad::Var head_out = ad::matmul(att, val);
            heads_cat = h == 0 ? head_out : ad::concat_cols(heads_cat, head_out);
        }
        x = ad::add(x, linear(t, heads_cat, layer.wo, layer.bo));
        ad::Var ff = ad::relu(linear(t, x, layer.ff_w1, layer.ff_b1));
        x = ad::add(x, linear(t, ff, layer.ff_w2, layer.ff_b2));
    }
    return ad::concat_cols(ad::concat_cols(seq_emb, x), pos_emb);
}

ad::Var score(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg, ad::Var features) {
    const int L = t.value(features).rows();
    if (t.value(features).cols() != 3 * cfg.d)
        throw std::invalid_argument("score: features must be L x 3d");
    ad::Var pairs = ad::pair_concat(features);  // L^2 x 6d
    ad::Var h = ad::relu(linear(t, pairs, v.head_w1, v.head_b1));
    ad::Var raw = ad::reshape(linear(t, h, v.head_w2, v.head_b2), L, L);
    return ad::affine(ad::add(raw, ad::transpose(raw)), 0.5, 0.0);
}

ad::Var score_forward(ad::Tape& t, const ScoreNetVars& v, const ScoreNetConfig& cfg,
                      const RnaSequence& seq) {
    ad::Var onehot = t.leaf(one_hot(seq));
    ad::Var pos = position_embedding(t, v, cfg, seq.length());
    ad::Var feats = encode(t, v, cfg, onehot, pos);
    return score(t, v, cfg, feats);
}

Mat score_matrix(const ScoreNetParams& params, const RnaSequence& seq) {
    ad::Tape t;
    ScoreNetVars v = lift_score_params(t, params);
    return t.value(score_forward(t, v, params.config, seq));
}

}  // namespace pdfold
