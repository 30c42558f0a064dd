#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gradband {

// Layer sizes of the policy/value network:
// inputs -> hidden1 (tanh) -> hidden2 (tanh) -> {actions logits, 1 value}.
struct Arch {
  int inputs = 0;
  int hidden1 = 0;
  int hidden2 = 0;
  int actions = 4;

  std::size_t param_count() const noexcept;
  friend bool operator==(const Arch&, const Arch&) = default;
};

// Per-sample forward state, reused by backward().
struct Activations {
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<double> logits;
  std::vector<double> probs;
  double value = 0.0;

  explicit Activations(const Arch& arch = {});
};

// Parameter layout (flat): W1[h1][in], b1[h1], W2[h2][h1], b2[h2],
// Wp[actions][h2], bp[actions], wv[h2], bv.
std::vector<double> init_params(const Arch& arch, std::mt19937_64& rng);

void forward(const Arch& arch, std::span<const double> params, std::span<const double> input, Activations& act);

// Accumulates d(loss)/d(params) into `grad` given the loss gradient with respect
// to the logits and the value output of one sample.
void backward(const Arch& arch, std::span<const double> params, std::span<const double> input,
              const Activations& act, std::span<const double> dlogits, double dvalue, std::span<double> grad);

// One actor-critic sample. `advantage` is a constant of the loss (no gradient
// flows through it). action < 0 marks a critic-only sample.
struct LossSample {
  std::vector<double> input;
  int action = -1;
  double target_return = 0.0;
  double advantage = 0.0;
};

struct LossWeights {
  double entropy_coef = 0.01;
  double value_coef = 0.5;
};

// Mean over samples of
//   -log pi(a|s) * A  -  entropy_coef * H(pi(.|s))  +  value_coef * (R - V(s))^2
// Writes the gradient into `grad` (overwritten) when it is non-empty.
double a3c_loss(const Arch& arch, std::span<const double> params, std::span<const LossSample> batch,
                const LossWeights& weights, std::span<double> grad);

// Loss and logit/value gradient for one sample given its forward pass.
double sample_loss_terms(const Activations& act, int action, double target_return, double advantage,
                         const LossWeights& weights, std::span<double> dlogits, double& dvalue);

}  // namespace gradband
