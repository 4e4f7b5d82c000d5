#ifndef CEGATE_BACKBONE_HPP
#define CEGATE_BACKBONE_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cegate/check.hpp"
#include "cegate/params.hpp"
#include "cegate/rng.hpp"
#include "cegate/tensor.hpp"
#include "cegate/toolbox.hpp"

namespace cegate {

struct BackboneConfig {
    std::size_t image_size = 32;
    std::size_t channels = 3;
    std::size_t patch_size = 4;
    std::size_t depth = 4;
    std::size_t dim = 32;
    std::size_t heads = 1;
    std::size_t mlp_ratio = 2;
    std::size_t num_classes = 5;

    std::size_t grid_side() const { return image_size / patch_size; }
    std::size_t tokens() const { return grid_side() * grid_side(); }
    std::size_t patch_dim() const { return patch_size * patch_size * channels; }
    std::size_t mlp_hidden() const { return mlp_ratio * dim; }

    void validate() const {
        check(image_size > 0 && patch_size > 0 && channels > 0,
              "backbone config: sizes must be positive");
        check(image_size % patch_size == 0,
              "backbone config: image_size " + std::to_string(image_size) +
                  " not divisible by patch_size " + std::to_string(patch_size));
        check(depth >= 1 && dim >= 1 && heads >= 1 && mlp_ratio >= 1 && num_classes >= 2,
              "backbone config: invalid depth/dim/heads/ratio/classes");
        check(dim % heads == 0, "backbone config: dim " + std::to_string(dim) +
                                    " not divisible by heads " + std::to_string(heads));
    }
};

struct TransformerBlock {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor w1, b1, w2, b2;
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;

    ParamList params(const std::string& prefix) const {
        return {{prefix + ".wq", wq},       {prefix + ".bq", bq},
                {prefix + ".wk", wk},       {prefix + ".bk", bk},
                {prefix + ".wv", wv},       {prefix + ".bv", bv},
                {prefix + ".wo", wo},       {prefix + ".bo", bo},
                {prefix + ".w1", w1},       {prefix + ".b1", b1},
                {prefix + ".w2", w2},       {prefix + ".b2", b2},
                {prefix + ".ln1_g", ln1_g}, {prefix + ".ln1_b", ln1_b},
                {prefix + ".ln2_g", ln2_g}, {prefix + ".ln2_b", ln2_b}};
    }
};

struct Head {
    Tensor w, b;

    ParamList params() const { return {{"head.w", w}, {"head.b", b}}; }
};

struct EncodeResult {
    std::vector<Tensor> layer_tokens;  // T_1 ... T_{I+1}
    Tensor logits;                     // l x C
};

// Pre-norm transformer block with optional toolbox hooks on the Q/V
// projections (spatial), beside the MLP (semantic), and on the block output
// (frequency).
inline Tensor block_forward(const TransformerBlock& blk, const Tensor& x,
                            const BlockHooks& hooks, std::size_t heads) {
    const std::size_t d = x.cols();
    check(d == blk.wq.rows(), "block_forward: token dim " + std::to_string(d) +
                                  " does not match block weights");
    const std::size_t head_dim = d / heads;

    Tensor h = layer_norm(x, blk.ln1_g, blk.ln1_b);
    Tensor q = add_rowvec(hooks.spatial
                              ? spatial_forward(h, blk.wq, hooks.spatial->a_q,
                                                hooks.spatial->b_q)
                              : matmul(h, blk.wq),
                          blk.bq);
    Tensor k = add_rowvec(matmul(h, blk.wk), blk.bk);
    Tensor v = add_rowvec(hooks.spatial
                              ? spatial_forward(h, blk.wv, hooks.spatial->a_v,
                                                hooks.spatial->b_v)
                              : matmul(h, blk.wv),
                          blk.bv);

    std::vector<Tensor> head_outs;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (std::size_t hd = 0; hd < heads; ++hd) {
        Tensor qh = slice_cols(q, hd * head_dim, head_dim);
        Tensor kh = slice_cols(k, hd * head_dim, head_dim);
        Tensor vh = slice_cols(v, hd * head_dim, head_dim);
        Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
        head_outs.push_back(matmul(attn, vh));
    }
    Tensor msa = add_rowvec(matmul(heads == 1 ? head_outs[0] : concat_cols(head_outs),
                                   blk.wo),
                            blk.bo);
    Tensor t_attn = add(x, msa);

    Tensor h2 = layer_norm(t_attn, blk.ln2_g, blk.ln2_b);
    Tensor mlp = add_rowvec(
        matmul(gelu(add_rowvec(matmul(h2, blk.w1), blk.b1)), blk.w2), blk.b2);
    Tensor out = add(t_attn, mlp);
    if (hooks.semantic) out = add(out, semantic_forward(t_attn, *hooks.semantic));
    if (hooks.frequency) out = frequency_forward(out, *hooks.frequency);
    return out;
}

class Backbone {
public:
    BackboneConfig cfg;
    Tensor patch_w;  // patch_dim x d
    Tensor patch_b;  // d
    Tensor pos_emb;  // l x d
    std::vector<TransformerBlock> blocks;
    Head head;

    static Backbone init(const BackboneConfig& cfg, Rng& rng) {
        cfg.validate();
        Backbone bb;
        bb.cfg = cfg;
        auto gaussian = [&](Shape shape, double std_dev) {
            std::vector<double> v(numel(shape));
            for (auto& x : v) x = std_dev * rng.gaussian();
            return Tensor(std::move(shape), std::move(v));
        };
        const std::size_t d = cfg.dim;
        bb.patch_w = gaussian({cfg.patch_dim(), d}, 0.02);
        bb.patch_b = Tensor::zeros({d});
        bb.pos_emb = gaussian({cfg.tokens(), d}, 0.02);
        for (std::size_t i = 0; i < cfg.depth; ++i) {
            TransformerBlock blk;
            blk.wq = gaussian({d, d}, 0.02);
            blk.bq = Tensor::zeros({d});
            blk.wk = gaussian({d, d}, 0.02);
            blk.bk = Tensor::zeros({d});
            blk.wv = gaussian({d, d}, 0.02);
            blk.bv = Tensor::zeros({d});
            blk.wo = gaussian({d, d}, 0.02);
            blk.bo = Tensor::zeros({d});
            blk.w1 = gaussian({d, cfg.mlp_hidden()}, 0.02);
            blk.b1 = Tensor::zeros({cfg.mlp_hidden()});
            blk.w2 = gaussian({cfg.mlp_hidden(), d}, 0.02);
            blk.b2 = Tensor::zeros({d});
            blk.ln1_g = Tensor::full({d}, 1.0);
            blk.ln1_b = Tensor::zeros({d});
            blk.ln2_g = Tensor::full({d}, 1.0);
            blk.ln2_b = Tensor::zeros({d});
            bb.blocks.push_back(std::move(blk));
        }
        bb.head.w = gaussian({d, cfg.num_classes}, 0.02);
        bb.head.b = Tensor::zeros({cfg.num_classes});
        cegate::set_trainable(bb.all_params(), true);
        return bb;
    }

    // Backbone parameters alpha (everything except the head phi).
    ParamList backbone_params() const {
        ParamList out{{"backbone.patch_w", patch_w},
                      {"backbone.patch_b", patch_b},
                      {"backbone.pos_emb", pos_emb}};
        for (std::size_t i = 0; i < blocks.size(); ++i)
            append_params(out, blocks[i].params("backbone.block" + std::to_string(i)));
        return out;
    }

    ParamList head_params() const { return head.params(); }

    ParamList all_params() const {
        ParamList out = backbone_params();
        append_params(out, head_params());
        return out;
    }

    void freeze() { cegate::set_trainable(backbone_params(), false); }
    void set_trainable(bool flag) { cegate::set_trainable(backbone_params(), flag); }

    // Flattened per-patch pixels projected to d, before the positional add.
    Tensor patch_tokens(const std::vector<double>& image) const {
        check(image.size() == cfg.image_size * cfg.image_size * cfg.channels,
              "patch_tokens: image size mismatch, expected " +
                  std::to_string(cfg.image_size * cfg.image_size * cfg.channels) +
                  " values, got " + std::to_string(image.size()));
        const std::size_t gp = cfg.grid_side(), p = cfg.patch_size, c = cfg.channels;
        const std::size_t w = cfg.image_size;
        std::vector<double> patches(cfg.tokens() * cfg.patch_dim());
        for (std::size_t py = 0; py < gp; ++py)
            for (std::size_t px = 0; px < gp; ++px) {
                const std::size_t tok = py * gp + px;
                std::size_t slot = 0;
                for (std::size_t dy = 0; dy < p; ++dy)
                    for (std::size_t dx = 0; dx < p; ++dx)
                        for (std::size_t ch = 0; ch < c; ++ch)
                            patches[tok * cfg.patch_dim() + slot++] =
                                image[((py * p + dy) * w + (px * p + dx)) * c + ch];
            }
        Tensor patch_mat({cfg.tokens(), cfg.patch_dim()}, std::move(patches));
        return add_rowvec(matmul(patch_mat, patch_w), patch_b);
    }

    Tensor patch_embed(const std::vector<double>& image) const {
        return add(patch_tokens(image), pos_emb);
    }

    EncodeResult encode(const std::vector<double>& image,
                        const Toolbox* toolbox = nullptr) const {
        EncodeResult result;
        Tensor t = patch_embed(image);
        result.layer_tokens.push_back(t);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            BlockHooks hooks = toolbox ? toolbox->hooks(i) : BlockHooks{};
            t = block_forward(blocks[i], t, hooks, cfg.heads);
            result.layer_tokens.push_back(t);
        }
        result.logits = add_rowvec(matmul(t, head.w), head.b);
        return result;
    }
};

}  // namespace cegate

#endif
