#include "resim/optim.hpp"

#include <cmath>

#include "resim/error.hpp"

namespace resim {

void adam_step(AdamState& state, std::span<const ParamGroupRef> groups) {
  ++state.t;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, double(state.t));
  const double bc2 = 1.0 - std::pow(b2, double(state.t));

  for (const auto& ref : groups) {
    auto it = state.groups.find(ref.name);
    if (it == state.groups.end()) throw ConfigError("adam_step: unknown group " + ref.name);
    AdamState::Group& g = it->second;
    if (g.frozen) continue;
    if (ref.values.size() != ref.grads.size() || ref.values.size() != g.m.size())
      throw ShapeError("adam_step: size mismatch in group " + ref.name);

    for (size_t i = 0; i < ref.values.size(); ++i) {
      double grad = ref.grads[i];
      if (!std::isfinite(grad))
        throw NumericalError("adam_step: non-finite gradient in group " + ref.name);
      g.m[i] = b1 * g.m[i] + (1.0 - b1) * grad;
      g.v[i] = b2 * g.v[i] + (1.0 - b2) * grad * grad;
      double m_hat = g.m[i] / bc1;
      double v_hat = g.v[i] / bc2;
      ref.values[i] -= g.lr * m_hat / (std::sqrt(v_hat) + state.cfg.eps);
    }
  }
}

}  // namespace resim
