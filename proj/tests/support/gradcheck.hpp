#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include <torch/torch.h>

namespace texunwarp::test {

/// Largest per-input relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// between autograd and central differences of the scalar `f`. Inputs must
/// be double tensors.
inline double gradcheck(const std::function<torch::Tensor(const std::vector<torch::Tensor>&)>& f,
                        std::vector<torch::Tensor> inputs, double h = 1e-6) {
  for (auto& t : inputs) t = t.detach().clone().requires_grad_(true);
  const torch::Tensor out = f(inputs);
  const auto analytic = torch::autograd::grad({out}, inputs);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    torch::Tensor base = inputs[k].detach().clone();
    torch::Tensor numeric = torch::zeros_like(base);
    auto flat = base.view(-1);
    auto nflat = numeric.view(-1);
    for (int64_t i = 0; i < flat.numel(); ++i) {
      auto eval = [&](double delta) {
        torch::NoGradGuard guard;
        std::vector<torch::Tensor> args;
        for (std::size_t j = 0; j < inputs.size(); ++j) args.push_back(inputs[j].detach().clone());
        args[k].view(-1)[i] += delta;
        return f(args).item<double>();
      };
      nflat[i] = (eval(h) - eval(-h)) / (2.0 * h);
    }
    const torch::Tensor a = analytic[k].defined() ? analytic[k] : torch::zeros_like(numeric);
    const double scale = std::max(a.norm().item<double>(), numeric.norm().item<double>());
    if (scale == 0.0) continue;
    worst = std::max(worst, (a - numeric).norm().item<double>() / scale);
  }
  return worst;
}

}  // namespace texunwarp::test
