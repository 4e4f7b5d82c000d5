#ifndef CEGATE_TOOLBOX_HPP
#define CEGATE_TOOLBOX_HPP

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cegate/check.hpp"
#include "cegate/fourier.hpp"
#include "cegate/params.hpp"
#include "cegate/rng.hpp"
#include "cegate/tensor.hpp"

namespace cegate {

// Module categories; the enum order is the deterministic tie-break order.
enum class ModuleKind : int { Spatial = 0, Semantic = 1, Frequency = 2 };

constexpr std::array<ModuleKind, 3> kAllKinds{ModuleKind::Spatial, ModuleKind::Semantic,
                                              ModuleKind::Frequency};

inline std::string to_string(ModuleKind k) {
    switch (k) {
        case ModuleKind::Spatial: return "Spatial";
        case ModuleKind::Semantic: return "Semantic";
        case ModuleKind::Frequency: return "Frequency";
    }
    return "?";
}

inline ModuleKind kind_from_string(const std::string& s) {
    for (ModuleKind k : kAllKinds)
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown module kind: " + s);
}

struct ModuleId {
    std::size_t layer = 0;
    ModuleKind kind = ModuleKind::Spatial;

    auto operator<=>(const ModuleId&) const = default;
};

inline std::string to_string(const ModuleId& id) {
    return "(" + std::to_string(id.layer) + ", " + to_string(id.kind) + ")";
}

// ---------------------------------------------------------------------------
// Module parameter blocks. All three are exact identities at initialization:
// the B factors, up-projections, and expert up-projections start at zero.
// ---------------------------------------------------------------------------

// Low-rank update on the Q and V projections: W = W0 + A.B with A in d x r
// (random init) and B in r x d (zero init).
struct SpatialModule {
    std::size_t rank = 0;
    Tensor a_q, b_q;
    Tensor a_v, b_v;

    static SpatialModule init(std::size_t dim, std::size_t rank, Rng& rng) {
        check(rank >= 1 && rank < dim,
              "spatial module rank must satisfy 1 <= r < d, got r=" +
                  std::to_string(rank) + ", d=" + std::to_string(dim));
        SpatialModule m;
        m.rank = rank;
        auto gaussian = [&](Shape shape, double std_dev) {
            std::vector<double> v(numel(shape));
            for (auto& x : v) x = std_dev * rng.gaussian();
            return Tensor(std::move(shape), std::move(v));
        };
        m.a_q = gaussian({dim, rank}, 0.02);
        m.b_q = Tensor::zeros({rank, dim});
        m.a_v = gaussian({dim, rank}, 0.02);
        m.b_v = Tensor::zeros({rank, dim});
        return m;
    }

    ParamList params(const std::string& prefix) const {
        return {{prefix + ".a_q", a_q},
                {prefix + ".b_q", b_q},
                {prefix + ".a_v", a_v},
                {prefix + ".b_v", b_v}};
    }
};

// x.(W0 + A.B) computed without materializing the merged weight.
inline Tensor spatial_forward(const Tensor& x, const Tensor& w0, const Tensor& a,
                              const Tensor& b) {
    return add(matmul(x, w0), matmul(matmul(x, a), b));
}

// W0 + A.B as a plain matrix.
inline Tensor merge_lora(const Tensor& w0, const Tensor& a, const Tensor& b) {
    return add(w0, matmul(a, b));
}

// Parallel bottleneck adapter beside the MLP: GELU(t.W_down).W_up.
struct SemanticModule {
    Tensor w_down, w_up;

    static SemanticModule init(std::size_t dim, std::size_t bottleneck, Rng& rng) {
        check(bottleneck >= 1 && bottleneck < dim,
              "semantic bottleneck must satisfy 1 <= d_hat < d");
        SemanticModule m;
        std::vector<double> v(dim * bottleneck);
        for (auto& x : v) x = 0.02 * rng.gaussian();
        m.w_down = Tensor({dim, bottleneck}, std::move(v));
        m.w_up = Tensor::zeros({bottleneck, dim});
        return m;
    }

    ParamList params(const std::string& prefix) const {
        return {{prefix + ".w_down", w_down}, {prefix + ".w_up", w_up}};
    }
};

inline Tensor semantic_forward(const Tensor& t_attn, const SemanticModule& m) {
    return matmul(gelu(matmul(t_attn, m.w_down)), m.w_up);
}

// ---------------------------------------------------------------------------
// Frequency split: per channel, reshape the l tokens to a sqrt(l) x sqrt(l)
// grid, project onto the low-frequency bins, and take hf as the complement.
// lf + hf == input exactly by construction.
// ---------------------------------------------------------------------------

inline std::size_t token_grid_side(std::size_t tokens) {
    auto g = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(tokens))));
    check(g * g == tokens, "token count " + std::to_string(tokens) +
                               " is not a perfect square; frequency modules need a "
                               "square token grid");
    return g;
}

namespace detail {

// Applies the low-pass projection to every feature channel of a token matrix.
inline std::vector<double> low_pass_tokens(const std::vector<double>& tokens,
                                           std::size_t g, std::size_t dim,
                                           const std::vector<bool>& mask) {
    std::vector<double> out(tokens.size());
    RealGrid grid{g, g, std::vector<double>(g * g)};
    const std::size_t l = g * g;
    for (std::size_t ch = 0; ch < dim; ++ch) {
        for (std::size_t t = 0; t < l; ++t) grid.values[t] = tokens[t * dim + ch];
        RealGrid lp = low_pass_filter(grid, mask);
        for (std::size_t t = 0; t < l; ++t) out[t * dim + ch] = lp.values[t];
    }
    return out;
}

}  // namespace detail

inline std::pair<Tensor, Tensor> frequency_split(const Tensor& x, double rho) {
    check(x.is_matrix(), "frequency_split: need [l x d] tokens");
    const std::size_t l = x.rows(), d = x.cols();
    const std::size_t g = token_grid_side(l);
    const std::vector<bool> mask = low_pass_mask(g, rho);

    std::vector<double> lf_vals = detail::low_pass_tokens(x.data(), g, d, mask);
    std::vector<double> hf_vals(x.size());
    for (std::size_t i = 0; i < hf_vals.size(); ++i)
        hf_vals[i] = x.data()[i] - lf_vals[i];

    bool trace = detail::tracing({&x});
    Tensor lf = detail::make_result(x.shape(), std::move(lf_vals), trace);
    Tensor hf = detail::make_result(x.shape(), std::move(hf_vals), trace);
    if (trace) {
        auto xd = x.ptr(), lfd = lf.ptr(), hfd = hf.ptr();
        active_tape()->record({lfd, hfd}, [xd, lfd, hfd, g, d, mask] {
            if (!xd->needs_grad) return;
            xd->ensure_grad();
            const std::size_t n = xd->data.size();
            // lf = P x, hf = (I - P) x with P a symmetric projection, so
            // dx = P d_lf + (I - P) d_hf = P (d_lf - d_hf) + d_hf.
            std::vector<double> diff(n, 0.0);
            const bool has_lf = !lfd->grad.empty();
            const bool has_hf = !hfd->grad.empty();
            for (std::size_t i = 0; i < n; ++i) {
                double gl = has_lf ? lfd->grad[i] : 0.0;
                double gh = has_hf ? hfd->grad[i] : 0.0;
                diff[i] = gl - gh;
            }
            std::vector<double> proj = detail::low_pass_tokens(diff, g, d, mask);
            for (std::size_t i = 0; i < n; ++i) {
                double gh = has_hf ? hfd->grad[i] : 0.0;
                xd->grad[i] += proj[i] + gh;
            }
        });
    }
    return {lf, hf};
}

// Fourier-split mixture of three bottleneck experts (raw / low / high) with a
// per-token softmax router over the raw tokens.
struct FrequencyModule {
    double cutoff = 0.3;
    double scale = 0.1;
    Tensor down[3];  // raw, low, high
    Tensor up[3];
    Tensor router;  // d x 3

    static FrequencyModule init(std::size_t dim, std::size_t bottleneck, double cutoff,
                                double scale, Rng& rng) {
        check(bottleneck >= 1 && bottleneck < dim,
              "frequency bottleneck must satisfy 1 <= d_hat_f < d");
        check(cutoff > 0.0 && cutoff < 1.0, "frequency cutoff must be in (0, 1)");
        FrequencyModule m;
        m.cutoff = cutoff;
        m.scale = scale;
        auto gaussian = [&](Shape shape, double std_dev) {
            std::vector<double> v(numel(shape));
            for (auto& x : v) x = std_dev * rng.gaussian();
            return Tensor(std::move(shape), std::move(v));
        };
        for (int e = 0; e < 3; ++e) {
            m.down[e] = gaussian({dim, bottleneck}, 0.02);
            m.up[e] = Tensor::zeros({bottleneck, dim});
        }
        m.router = gaussian({dim, 3}, 0.02);
        return m;
    }

    ParamList params(const std::string& prefix) const {
        static const char* expert_names[3] = {"raw", "low", "high"};
        ParamList out;
        for (int e = 0; e < 3; ++e) {
            out.push_back({prefix + ".down_" + expert_names[e], down[e]});
            out.push_back({prefix + ".up_" + expert_names[e], up[e]});
        }
        out.push_back({prefix + ".router", router});
        return out;
    }
};

inline Tensor frequency_forward(const Tensor& t, const FrequencyModule& m) {
    auto [lf, hf] = frequency_split(t, m.cutoff);
    Tensor experts[3] = {
        matmul(gelu(matmul(t, m.down[0])), m.up[0]),
        matmul(gelu(matmul(lf, m.down[1])), m.up[1]),
        matmul(gelu(matmul(hf, m.down[2])), m.up[2]),
    };
    Tensor weights = softmax_rows(matmul(t, m.router));
    Tensor mix;
    for (int e = 0; e < 3; ++e) {
        Tensor weighted = mul_colvec(experts[e], slice_cols(weights, e, 1));
        mix = mix.defined() ? add(mix, weighted) : weighted;
    }
    return add(t, scale(mix, m.scale));
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct ToolboxDims {
    std::size_t spatial_rank = 64;
    std::size_t semantic_dim = 64;
    std::size_t frequency_dim = 32;
    double cutoff = 0.3;
    double adapter_scale = 0.1;
};

struct BlockHooks {
    const SpatialModule* spatial = nullptr;
    const SemanticModule* semantic = nullptr;
    const FrequencyModule* frequency = nullptr;
};

// Per-layer module instances plus the activation (gradient gating) state.
// Every attached module always participates in the forward pass; activation
// only controls which parameters receive gradients.
class Toolbox {
public:
    struct Layer {
        std::optional<SpatialModule> spatial;
        std::optional<SemanticModule> semantic;
        std::optional<FrequencyModule> frequency;
    };

    static Toolbox attach(std::size_t depth, std::size_t dim, std::size_t tokens,
                          const ToolboxDims& dims, const std::vector<ModuleKind>& kinds,
                          Rng& rng) {
        Toolbox tb;
        tb.kinds_ = kinds;
        for (ModuleKind k : kinds)
            if (k == ModuleKind::Frequency) token_grid_side(tokens);
        tb.layers_.resize(depth);
        for (std::size_t i = 0; i < depth; ++i) {
            for (ModuleKind k : kinds) {
                switch (k) {
                    case ModuleKind::Spatial:
                        tb.layers_[i].spatial =
                            SpatialModule::init(dim, dims.spatial_rank, rng);
                        break;
                    case ModuleKind::Semantic:
                        tb.layers_[i].semantic =
                            SemanticModule::init(dim, dims.semantic_dim, rng);
                        break;
                    case ModuleKind::Frequency:
                        tb.layers_[i].frequency = FrequencyModule::init(
                            dim, dims.frequency_dim, dims.cutoff, dims.adapter_scale,
                            rng);
                        break;
                }
            }
        }
        tb.set_all_trainable(false);
        return tb;
    }

    std::size_t depth() const { return layers_.size(); }

    std::vector<ModuleId> ids() const {
        std::vector<ModuleId> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            for (ModuleKind k : kAllKinds)
                if (has_module({i, k})) out.push_back({i, k});
        return out;
    }

    bool has_module(const ModuleId& id) const {
        if (id.layer >= layers_.size()) return false;
        const Layer& l = layers_[id.layer];
        switch (id.kind) {
            case ModuleKind::Spatial: return l.spatial.has_value();
            case ModuleKind::Semantic: return l.semantic.has_value();
            case ModuleKind::Frequency: return l.frequency.has_value();
        }
        return false;
    }

    ParamList module_params(const ModuleId& id) const {
        check(has_module(id), "unknown module id " + to_string(id));
        const std::string prefix =
            "toolbox.layer" + std::to_string(id.layer) + "." + to_string(id.kind);
        const Layer& l = layers_[id.layer];
        switch (id.kind) {
            case ModuleKind::Spatial: return l.spatial->params(prefix);
            case ModuleKind::Semantic: return l.semantic->params(prefix);
            case ModuleKind::Frequency: return l.frequency->params(prefix);
        }
        return {};
    }

    ParamList all_params() const {
        ParamList out;
        for (const auto& id : ids()) append_params(out, module_params(id));
        return out;
    }

    // Gradient gating: exactly the modules in `active` become trainable.
    void set_active(const std::set<ModuleId>& active) {
        for (const auto& id : active)
            check(has_module(id), "set_active: unknown module id " + to_string(id));
        for (const auto& id : ids())
            set_trainable(module_params(id), active.contains(id));
        active_ = active;
    }

    void set_all_trainable(bool flag) {
        std::set<ModuleId> active;
        if (flag)
            for (const auto& id : ids()) active.insert(id);
        set_active(active);
    }

    const std::set<ModuleId>& active() const { return active_; }

    BlockHooks hooks(std::size_t layer) const {
        check(layer < layers_.size(), "hooks: layer out of range");
        const Layer& l = layers_[layer];
        BlockHooks h;
        if (l.spatial) h.spatial = &*l.spatial;
        if (l.semantic) h.semantic = &*l.semantic;
        if (l.frequency) h.frequency = &*l.frequency;
        return h;
    }

    const std::vector<ModuleKind>& kinds() const { return kinds_; }

private:
    std::vector<Layer> layers_;
    std::vector<ModuleKind> kinds_;
    std::set<ModuleId> active_;
};

}  // namespace cegate

#endif
