#ifndef CEGATE_OPTIM_HPP
#define CEGATE_OPTIM_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cegate/check.hpp"
#include "cegate/params.hpp"

namespace cegate {

struct OptimConfig {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const {
        check(learning_rate > 0.0, "optimizer: learning_rate must be > 0");
        check(beta1 >= 0.0 && beta1 < 1.0, "optimizer: beta1 must be in [0, 1)");
        check(beta2 >= 0.0 && beta2 < 1.0, "optimizer: beta2 must be in [0, 1)");
        check(eps > 0.0, "optimizer: eps must be > 0");
        check(weight_decay >= 0.0, "optimizer: weight_decay must be >= 0");
    }
};

// AdamW with decoupled weight decay. Moments are keyed by canonical parameter
// name, so they survive gating events that toggle which parameters receive
// gradients, and they serialize into checkpoints.
class AdamW {
public:
    struct Slot {
        std::size_t step = 0;
        std::vector<double> m;
        std::vector<double> v;
    };

    explicit AdamW(const OptimConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

    const OptimConfig& config() const { return cfg_; }

    // Applies one update to every parameter that carries a gradient buffer.
    // Parameters without gradients (frozen or unselected) are untouched and
    // their moments are left as-is.
    void step(const ParamList& params) {
        for (const auto& np : params) {
            if (!np.tensor.requires_grad() || !np.tensor.has_grad()) continue;
            const auto& g = np.tensor.grad();
            auto& w = np.tensor.data();
            Slot& slot = slots_[np.name];
            if (slot.m.empty()) {
                slot.m.assign(w.size(), 0.0);
                slot.v.assign(w.size(), 0.0);
            }
            check(slot.m.size() == w.size(),
                  "optimizer: moment size mismatch for '" + np.name + "'");
            ++slot.step;
            const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(slot.step));
            const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(slot.step));
            for (std::size_t i = 0; i < w.size(); ++i) {
                slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g[i];
                slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                double m_hat = slot.m[i] / bc1;
                double v_hat = slot.v[i] / bc2;
                w[i] -= cfg_.learning_rate *
                        (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * w[i]);
            }
        }
    }

    const std::map<std::string, Slot>& slots() const { return slots_; }
    std::map<std::string, Slot>& slots() { return slots_; }

private:
    OptimConfig cfg_;
    std::map<std::string, Slot> slots_;
};

}  // namespace cegate

#endif
