#pragma once

// Scale-invariance property suite over randomly initialized critics.
//
// Fixtures use the exact batch-norm operator (eps = 0). With eps > 0 the
// invariance only holds up to a residual proportional to eps / var.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <vector>

#include "crossq/nn/invariance.hpp"
#include "crossq/nn/mlp.hpp"
#include "crossq/random.hpp"

namespace crossq::experiment {

struct SelfcheckOptions {
  int seeds = 50;
  std::vector<Index> widths = {16, 64};
  Index batch = 32;
  Index input_dim = 4;
  std::vector<double> scales = {0.5, 2.0, 10.0};
  double bn_eps = 0.0;
  double tolerance = 1e-5;
};

struct SelfcheckResult {
  double max_output_deviation = 0.0;
  double max_gradient_deviation = 0.0;
  int fixtures = 0;
  double seconds = 0.0;
  double tolerance = 0.0;

  bool outputs_ok() const { return max_output_deviation < tolerance; }
  bool gradients_ok() const { return max_gradient_deviation < tolerance; }
  bool passed() const { return outputs_ok() && gradients_ok(); }
};

/// Critic-shaped fixture: two dense + batch-norm hidden blocks of `width`
/// units, scalar output, inputs and upstream gradients drawn N(0, 1).
struct CriticFixture {
  nn::Mlp<double> net;
  Tensor<double> x;
  Tensor<double> upstream;
};

inline CriticFixture make_critic_fixture(std::uint64_t seed, Index width, Index batch, Index input_dim,
                                         double bn_eps) {
  Rng rng = make_rng(seed, Stream::init);
  nn::NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.hidden = {width, width};
  spec.output_dim = 1;
  spec.bn_eps = bn_eps;
  CriticFixture f{nn::Mlp<double>(spec, rng), Tensor<double>(batch, input_dim), Tensor<double>(batch, 1)};
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index i = 0; i < f.x.size(); ++i) f.x.data()[i] = gauss(rng);
  for (Index i = 0; i < f.upstream.size(); ++i) f.upstream.data()[i] = gauss(rng);
  return f;
}

inline SelfcheckResult run_selfcheck(const SelfcheckOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SelfcheckResult r;
  r.tolerance = opt.tolerance;
  for (int s = 0; s < opt.seeds; ++s) {
    for (const Index w : opt.widths) {
      const auto f = make_critic_fixture(static_cast<std::uint64_t>(s), w, opt.batch, opt.input_dim, opt.bn_eps);
      for (const double c : opt.scales) {
        r.max_output_deviation = std::max(r.max_output_deviation, nn::scale_invariance_check(f.net, f.x, c));
        r.max_gradient_deviation =
            std::max(r.max_gradient_deviation, nn::gradient_scaling_check(f.net, f.x, f.upstream, c));
      }
      ++r.fixtures;
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace crossq::experiment
