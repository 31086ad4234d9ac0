// Markov-limit master equation d rho/dt = -i[H, rho] + G (L rho L^dag - {L^dag L, rho}/2).
#pragma once

#include <vector>

#include "hfd/model.hpp"
#include "hfd/types.hpp"

namespace hfd::oracles {

struct DensitySeries {
  std::vector<double> times;
  std::vector<MatX> rho;
};

inline DensitySeries lindblad_oracle(const SystemSpec& spec, double rate, double dt, double horizon) {
  if (!(dt > 0.0) || !(horizon > 0.0)) throw InvalidArgument("lindblad_oracle: dt and horizon must be positive");
  const MatX& h = spec.hamiltonian;
  const MatX& l = spec.lindblad;
  const MatX ldag = l.adjoint();
  const MatX ldl = ldag * l;
  auto f = [&](const MatX& r) -> MatX {
    MatX out = -kI * (h * r - r * h);
    out += rate * (l * r * ldag - 0.5 * (ldl * r + r * ldl));
    return out;
  };
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  DensitySeries out;
  MatX rho = spec.initial_state * spec.initial_state.adjoint();
  out.times.push_back(0.0);
  out.rho.push_back(rho);
  for (std::size_t n = 0; n < steps; ++n) {
    const MatX k1 = f(rho);
    const MatX k2 = f(rho + 0.5 * dt * k1);
    const MatX k3 = f(rho + 0.5 * dt * k2);
    const MatX k4 = f(rho + dt * k3);
    rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.times.push_back(dt * static_cast<double>(n + 1));
    out.rho.push_back(rho);
  }
  return out;
}

}  // namespace hfd::oracles
