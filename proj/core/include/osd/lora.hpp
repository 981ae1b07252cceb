#pragma once

#include <optional>
#include <string>

#include "osd/nn.hpp"

namespace osd {

// Low-rank additive adapter over a frozen base weight:
//   effective(x) = base(x) + scale * up(down(x))
// `up` starts at zero so a freshly attached adapter is a no-op.
struct LoraAdapter {
    std::string down;  // param name, [r, d_in]
    std::string up;    // param name, [d_out, r]
    double scale = 1.0;
    int rank = 0;

    static LoraAdapter create(ParamStore& ps, const std::string& name, int d_in, int d_out, int rank, double scale,
                              Rng& rng);
};

// base linear with optional adapter (nullptr = plain base)
ad::Var lora_linear(Binder& bind, ad::Var x, const LinearLayer& base, const LoraAdapter* adapter);

// base conv with optional adapter; the conv kernel is treated as a
// [cout, cin*kh*kw] matrix for the low-rank delta
ad::Var lora_conv2d(Binder& bind, ad::Var x, const Conv2dLayer& base, const LoraAdapter* adapter);

}  // namespace osd
