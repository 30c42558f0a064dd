#include "gradband/network.hpp"

#include <algorithm>
#include <cmath>

namespace gradband {

std::size_t Arch::param_count() const noexcept {
  const auto in = static_cast<std::size_t>(inputs);
  const auto a = static_cast<std::size_t>(hidden1);
  const auto b = static_cast<std::size_t>(hidden2);
  const auto k = static_cast<std::size_t>(actions);
  return a * in + a + b * a + b + k * b + k + b + 1;
}

Activations::Activations(const Arch& arch)
    : h1(static_cast<std::size_t>(arch.hidden1)),
      h2(static_cast<std::size_t>(arch.hidden2)),
      logits(static_cast<std::size_t>(arch.actions)),
      probs(static_cast<std::size_t>(arch.actions)) {}

namespace {

struct Offsets {
  std::size_t w1, b1, w2, b2, wp, bp, wv, bv;
};

Offsets offsets(const Arch& arch) {
  Offsets o{};
  const auto in = static_cast<std::size_t>(arch.inputs);
  const auto a = static_cast<std::size_t>(arch.hidden1);
  const auto b = static_cast<std::size_t>(arch.hidden2);
  const auto k = static_cast<std::size_t>(arch.actions);
  o.w1 = 0;
  o.b1 = o.w1 + a * in;
  o.w2 = o.b1 + a;
  o.b2 = o.w2 + b * a;
  o.wp = o.b2 + b;
  o.bp = o.wp + k * b;
  o.wv = o.bp + k;
  o.bv = o.wv + b;
  return o;
}

void fill_uniform(std::span<double> w, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w) v = dist(rng);
}

}  // namespace

std::vector<double> init_params(const Arch& arch, std::mt19937_64& rng) {
  std::vector<double> p(arch.param_count(), 0.0);
  const auto o = offsets(arch);
  std::span<double> all(p);
  // Glorot-uniform trunk; near-zero policy head so the initial policy is close
  // to uniform; zero value head.
  fill_uniform(all.subspan(o.w1, o.b1 - o.w1), std::sqrt(6.0 / (arch.inputs + arch.hidden1)), rng);
  fill_uniform(all.subspan(o.w2, o.b2 - o.w2), std::sqrt(6.0 / (arch.hidden1 + arch.hidden2)), rng);
  fill_uniform(all.subspan(o.wp, o.bp - o.wp), 0.01 * std::sqrt(6.0 / (arch.hidden2 + arch.actions)), rng);
  return p;
}

void forward(const Arch& arch, std::span<const double> params, std::span<const double> input, Activations& act) {
  const auto o = offsets(arch);
  const int in = arch.inputs;
  const double* w1 = params.data() + o.w1;
  const double* b1 = params.data() + o.b1;
  for (int i = 0; i < arch.hidden1; ++i) {
    const double* row = w1 + static_cast<std::size_t>(i) * in;
    const double* x = input.data();
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int j = 0; j < in; ++j) s += row[j] * x[j];
    s += b1[i];
    act.h1[static_cast<std::size_t>(i)] = std::tanh(s);
  }
  const double* w2 = params.data() + o.w2;
  const double* b2 = params.data() + o.b2;
  for (int i = 0; i < arch.hidden2; ++i) {
    const double* row = w2 + static_cast<std::size_t>(i) * arch.hidden1;
    const double* x = act.h1.data();
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int j = 0; j < arch.hidden1; ++j) s += row[j] * x[j];
    s += b2[i];
    act.h2[static_cast<std::size_t>(i)] = std::tanh(s);
  }
  const double* wp = params.data() + o.wp;
  const double* bp = params.data() + o.bp;
  double max_logit = -INFINITY;
  for (int k = 0; k < arch.actions; ++k) {
    const double* row = wp + static_cast<std::size_t>(k) * arch.hidden2;
    const double* x = act.h2.data();
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int j = 0; j < arch.hidden2; ++j) s += row[j] * x[j];
    s += bp[k];
    act.logits[static_cast<std::size_t>(k)] = s;
    max_logit = std::max(max_logit, s);
  }
  double z = 0.0;
  for (int k = 0; k < arch.actions; ++k) {
    const double e = std::exp(act.logits[static_cast<std::size_t>(k)] - max_logit);
    act.probs[static_cast<std::size_t>(k)] = e;
    z += e;
  }
  for (auto& p : act.probs) p /= z;
  const double* wv = params.data() + o.wv;
  double v = params[o.bv];
  for (int j = 0; j < arch.hidden2; ++j) v += wv[j] * act.h2[static_cast<std::size_t>(j)];
  act.value = v;
}

void backward(const Arch& arch, std::span<const double> params, std::span<const double> input,
              const Activations& act, std::span<const double> dlogits, double dvalue, std::span<double> grad) {
  const auto o = offsets(arch);
  const int h1n = arch.hidden1;
  const int h2n = arch.hidden2;
  thread_local std::vector<double> dh2, dh1;
  dh2.assign(static_cast<std::size_t>(h2n), 0.0);
  dh1.assign(static_cast<std::size_t>(h1n), 0.0);

  // Heads.
  for (int k = 0; k < arch.actions; ++k) {
    const double g = dlogits[static_cast<std::size_t>(k)];
    if (g == 0.0) continue;
    const double* row = params.data() + o.wp + static_cast<std::size_t>(k) * h2n;
    double* grow = grad.data() + o.wp + static_cast<std::size_t>(k) * h2n;
    for (int j = 0; j < h2n; ++j) {
      grow[j] += g * act.h2[static_cast<std::size_t>(j)];
      dh2[static_cast<std::size_t>(j)] += g * row[j];
    }
    grad[o.bp + static_cast<std::size_t>(k)] += g;
  }
  if (dvalue != 0.0) {
    for (int j = 0; j < h2n; ++j) {
      grad[o.wv + static_cast<std::size_t>(j)] += dvalue * act.h2[static_cast<std::size_t>(j)];
      dh2[static_cast<std::size_t>(j)] += dvalue * params[o.wv + static_cast<std::size_t>(j)];
    }
    grad[o.bv] += dvalue;
  }

  // Second hidden layer.
  for (int i = 0; i < h2n; ++i) {
    const double h = act.h2[static_cast<std::size_t>(i)];
    const double g = dh2[static_cast<std::size_t>(i)] * (1.0 - h * h);
    if (g == 0.0) continue;
    const double* row = params.data() + o.w2 + static_cast<std::size_t>(i) * h1n;
    double* grow = grad.data() + o.w2 + static_cast<std::size_t>(i) * h1n;
    for (int j = 0; j < h1n; ++j) {
      grow[j] += g * act.h1[static_cast<std::size_t>(j)];
      dh1[static_cast<std::size_t>(j)] += g * row[j];
    }
    grad[o.b2 + static_cast<std::size_t>(i)] += g;
  }

  // First hidden layer.
  const int in = arch.inputs;
  for (int i = 0; i < h1n; ++i) {
    const double h = act.h1[static_cast<std::size_t>(i)];
    const double g = dh1[static_cast<std::size_t>(i)] * (1.0 - h * h);
    if (g == 0.0) continue;
    double* grow = grad.data() + o.w1 + static_cast<std::size_t>(i) * in;
    for (int j = 0; j < in; ++j) grow[j] += g * input[static_cast<std::size_t>(j)];
    grad[o.b1 + static_cast<std::size_t>(i)] += g;
  }
}

double sample_loss_terms(const Activations& act, int action, double target_return, double advantage,
                         const LossWeights& weights, std::span<double> dlogits, double& dvalue) {
  const double td = target_return - act.value;
  double loss = weights.value_coef * td * td;
  dvalue = -2.0 * weights.value_coef * td;
  std::fill(dlogits.begin(), dlogits.end(), 0.0);
  if (action < 0) return loss;

  const auto k = static_cast<std::size_t>(action);
  double entropy = 0.0;
  for (double p : act.probs)
    if (p > 0.0) entropy -= p * std::log(p);
  loss += -std::log(std::max(act.probs[k], 1e-300)) * advantage - weights.entropy_coef * entropy;
  for (std::size_t j = 0; j < act.probs.size(); ++j) {
    const double p = act.probs[j];
    const double logp = p > 0.0 ? std::log(p) : 0.0;
    // d(-log pi_a)/dz_j = pi_j - [j == a];  d(-H)/dz_j = pi_j (log pi_j + H).
    dlogits[j] = (p - (j == k ? 1.0 : 0.0)) * advantage + weights.entropy_coef * p * (logp + entropy);
  }
  return loss;
}

double a3c_loss(const Arch& arch, std::span<const double> params, std::span<const LossSample> batch,
                const LossWeights& weights, std::span<double> grad) {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  Activations act(arch);
  std::vector<double> dlogits(static_cast<std::size_t>(arch.actions));
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& s : batch) {
    forward(arch, params, s.input, act);
    double dvalue = 0.0;
    total += sample_loss_terms(act, s.action, s.target_return, s.advantage, weights, dlogits, dvalue);
    if (grad.empty()) continue;
    for (auto& g : dlogits) g *= scale;
    backward(arch, params, s.input, act, dlogits, dvalue * scale, grad);
  }
  return total * scale;
}

}  // namespace gradband
