#ifndef CEGATE_FISHER_HPP
#define CEGATE_FISHER_HPP

#include <algorithm>
#include <cstddef>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cegate/check.hpp"
#include "cegate/params.hpp"
#include "cegate/tensor.hpp"
#include "cegate/toolbox.hpp"

namespace cegate {

struct GateConfig {
    std::size_t top_k = 18;
    std::size_t accumulation_steps = 100;  // M
    std::size_t selection_count = 10;
    std::size_t total_iterations = 30000;  // T

    // re-selection interval N
    std::size_t interval() const {
        check(selection_count >= 1, "gate config: selection_count must be >= 1");
        std::size_t n = total_iterations / selection_count;
        check(n >= 1, "gate config: interval floor(T / selection_count) must be >= 1");
        return n;
    }

    void validate(std::size_t module_count) const {
        check(top_k >= 1, "gate config: top_k must be >= 1");
        check(accumulation_steps >= 1, "gate config: accumulation_steps must be >= 1");
        (void)interval();
        (void)module_count;
    }
};

// Per-module, per-parameter running sum of squared gradients (the empirical
// diagonal Fisher, before the 1/M averaging applied on read-out).
class FisherAccumulator {
public:
    void reset(const std::vector<std::pair<ModuleId, ParamList>>& modules) {
        modules_ = modules;
        sums_.clear();
        for (const auto& [id, params] : modules_) {
            auto& buffers = sums_[id];
            for (const auto& p : params)
                buffers.emplace_back(p.tensor.size(), 0.0);
        }
        samples_seen_ = 0;
    }

    void reset(const Toolbox& toolbox) {
        std::vector<std::pair<ModuleId, ParamList>> modules;
        for (const auto& id : toolbox.ids())
            modules.emplace_back(id, toolbox.module_params(id));
        reset(modules);
    }

    // Adds the squared current gradient of every tracked parameter.
    void add_sample() {
        for (const auto& [id, params] : modules_) {
            auto& buffers = sums_[id];
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                const Tensor& t = params[pi].tensor;
                if (!t.has_grad()) continue;
                const auto& g = t.grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    buffers[pi][i] += g[i] * g[i];
            }
        }
        ++samples_seen_;
    }

    std::size_t samples_seen() const { return samples_seen_; }

    // Averaged per-parameter Fisher values for one module.
    std::vector<std::vector<double>> fisher(const ModuleId& id) const {
        check(samples_seen_ > 0, "fisher read-out before any accumulation");
        auto it = sums_.find(id);
        check(it != sums_.end(), "fisher: unknown module id " + to_string(id));
        auto out = it->second;
        for (auto& buf : out)
            for (auto& v : buf) v /= static_cast<double>(samples_seen_);
        return out;
    }

    const std::vector<std::pair<ModuleId, ParamList>>& modules() const {
        return modules_;
    }

private:
    std::vector<std::pair<ModuleId, ParamList>> modules_;
    std::map<ModuleId, std::vector<std::vector<double>>> sums_;
    std::size_t samples_seen_ = 0;
};

struct ImportanceTable {
    std::map<ModuleId, double> raw;         // S_hat
    std::map<ModuleId, double> normalized;  // S
    std::vector<ModuleId> selected;         // ordered by (normalized desc, tie rule)
};

// Per-sample forward/backward; squared gradients accumulate, parameters never
// move, and all touched gradients are zeroed before the next sample.
inline void accumulate_fisher(std::span<const std::function<Tensor()>> sample_losses,
                              const ParamList& touched, FisherAccumulator& acc) {
    check(!sample_losses.empty(), "accumulate_fisher: empty sample set");
    for (const auto& make_loss : sample_losses) {
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = make_loss();
        }
        tape.backward(loss);
        acc.add_sample();
        cegate::zero_grads(touched);
    }
}

// S_hat_i^z: sum of the averaged squared gradients over the module parameters.
inline std::map<ModuleId, double> aggregate_module_scores(const FisherAccumulator& acc) {
    std::map<ModuleId, double> raw;
    for (const auto& [id, params] : acc.modules()) {
        (void)params;
        double total = 0.0;
        for (const auto& buf : acc.fisher(id))
            for (double v : buf) total += v;
        raw[id] = total;
    }
    return raw;
}

// S_i^z: divide by the per-kind total over layers; a kind with zero total mass
// normalizes to all zeros so dead pathways cannot be selected.
inline std::map<ModuleId, double> normalize_scores(const std::map<ModuleId, double>& raw) {
    std::map<ModuleKind, double> kind_total;
    for (const auto& [id, v] : raw) kind_total[id.kind] += v;
    std::map<ModuleId, double> out;
    for (const auto& [id, v] : raw) {
        double total = kind_total[id.kind];
        out[id] = (total > 0.0) ? v / total : 0.0;
    }
    return out;
}

// Top-k over all kinds and layers; ties break by (layer asc, kind order).
// Zero-score modules are never selected.
inline std::vector<ModuleId> select_top_k(const std::map<ModuleId, double>& normalized,
                                          std::size_t k) {
    check(k >= 1, "select_top_k: k must be >= 1");
    if (k > normalized.size()) {
        std::cerr << "[cegate] warning: top_k " << k << " exceeds module count "
                  << normalized.size() << "; clamping\n";
        k = normalized.size();
    }
    std::vector<std::pair<ModuleId, double>> entries;
    for (const auto& [id, score] : normalized)
        if (score > 0.0) entries.emplace_back(id, score);
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        if (a.first.layer != b.first.layer) return a.first.layer < b.first.layer;
        return a.first.kind < b.first.kind;
    });
    if (entries.size() > k) entries.resize(k);
    std::vector<ModuleId> out;
    for (const auto& [id, score] : entries) {
        (void)score;
        out.push_back(id);
    }
    return out;
}

// One gating event: measure Fisher over M fresh samples with every module
// gradient-enabled, then gate the gradient flow to the Top-k set.
inline ImportanceTable gating_step(Toolbox& toolbox,
                                   const std::function<std::function<Tensor()>()>& draw_sample_loss,
                                   const GateConfig& cfg, FisherAccumulator& acc,
                                   const ParamList& other_trainable = {}) {
    acc.reset(toolbox);
    toolbox.set_all_trainable(true);

    std::vector<std::function<Tensor()>> losses;
    losses.reserve(cfg.accumulation_steps);
    for (std::size_t i = 0; i < cfg.accumulation_steps; ++i)
        losses.push_back(draw_sample_loss());
    ParamList touched = toolbox.all_params();
    append_params(touched, other_trainable);
    accumulate_fisher(losses, touched, acc);

    ImportanceTable table;
    table.raw = aggregate_module_scores(acc);
    table.normalized = normalize_scores(table.raw);
    table.selected = select_top_k(table.normalized, cfg.top_k);
    toolbox.set_active({table.selected.begin(), table.selected.end()});
    return table;
}

// KL divergence between categorical distributions: sum p log(p/q).
inline double kl_categorical(std::span<const double> p, std::span<const double> q) {
    check(p.size() == q.size(), "kl_categorical: support size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        check_numeric(q[i] > 0.0, "kl_categorical: q has zero mass where p > 0");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

}  // namespace cegate

#endif
