#ifndef CEGATE_PARAMS_HPP
#define CEGATE_PARAMS_HPP

#include <string>
#include <vector>

#include "cegate/tensor.hpp"

namespace cegate {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

inline void append_params(ParamList& out, const ParamList& more) {
    out.insert(out.end(), more.begin(), more.end());
}

inline std::size_t param_count(const ParamList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.size();
    return n;
}

inline std::size_t trainable_param_count(const ParamList& params) {
    std::size_t n = 0;
    for (const auto& p : params)
        if (p.tensor.requires_grad()) n += p.tensor.size();
    return n;
}

inline void set_trainable(const ParamList& params, bool flag) {
    for (const auto& p : params) {
        Tensor t = p.tensor;
        t.set_requires_grad(flag);
    }
}

inline void zero_grads(const ParamList& params) {
    for (const auto& p : params) p.tensor.zero_grad();
}

}  // namespace cegate

#endif
