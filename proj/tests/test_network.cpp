#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gradband/network.hpp"

using namespace gradband;

namespace {

std::vector<LossSample> random_batch(const Arch& arch, std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<LossSample> batch(n);
  for (int i = 0; i < n; ++i) {
    batch[i].input.resize(arch.inputs);
    for (auto& x : batch[i].input) x = u(rng);
    batch[i].action = i == n - 1 ? -1 : static_cast<int>(rng() % arch.actions);
    batch[i].target_return = u(rng);
    batch[i].advantage = u(rng);
  }
  return batch;
}

}  // namespace

TEST_CASE("param_count matches the flat layout") {
  const Arch a{5, 3, 2, 4};
  CHECK(a.param_count() == 3 * 5 + 3 + 2 * 3 + 2 + 4 * 2 + 4 + 2 + 1);
}

TEST_CASE("forward yields a probability distribution") {
  const Arch arch{7, 6, 5, 4};
  std::mt19937_64 rng(3);
  const auto params = init_params(arch, rng);
  Activations act(arch);
  std::vector<double> in(7, 0.3);
  forward(arch, params, in, act);
  CHECK(std::accumulate(act.probs.begin(), act.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  for (double p : act.probs) CHECK(p > 0.0);
}

TEST_CASE("analytic loss gradient matches central finite differences") {
  // Two hidden units per layer keep every parameter's influence visible.
  const Arch arch{4, 2, 2, 4};
  std::mt19937_64 rng(11);
  auto params = init_params(arch, rng);
  const auto batch = random_batch(arch, rng, 6);
  const LossWeights w{0.05, 0.5};

  std::vector<double> grad(params.size());
  a3c_loss(arch, params, batch, w, grad);

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double h = 1e-6;
    const double keep = params[i];
    params[i] = keep + h;
    const double up = a3c_loss(arch, params, batch, w, {});
    params[i] = keep - h;
    const double down = a3c_loss(arch, params, batch, w, {});
    params[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double rel = std::abs(fd - grad[i]) / std::max(1e-8, std::max(std::abs(fd), std::abs(grad[i])));
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-4);
}
