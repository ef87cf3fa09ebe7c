#pragma once

#include <random>

#include "crossq/nn/mlp.hpp"
#include "crossq/random.hpp"

namespace testing_helpers {

template <typename T = double>
crossq::Tensor<T> gaussian(crossq::Index rows, crossq::Index cols, crossq::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  crossq::Tensor<T> t(rows, cols);
  for (crossq::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(dist(rng));
  return t;
}

/// A BN network with randomized affine parameters, biases and running stats,
/// so that no quantity sits at its initial value.
inline crossq::nn::Mlp<double> random_bn_net(std::uint64_t seed, crossq::Index in, std::vector<crossq::Index> hidden,
                                             crossq::Index out, double eps) {
  crossq::nn::NetworkSpec spec;
  spec.input_dim = in;
  spec.hidden = std::move(hidden);
  spec.output_dim = out;
  spec.bn_eps = eps;
  crossq::Rng rng(seed);
  crossq::nn::Mlp<double> net(spec, rng);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& b : net.blocks()) {
    b.dense.bias = gaussian(1, b.dense.out_features(), rng, 0.3);
    if (b.bn) {
      for (crossq::Index j = 0; j < b.bn->features(); ++j) {
        b.bn->gamma(0, j) = u(rng);
        b.bn->running_var(0, j) = u(rng);
      }
      b.bn->beta = gaussian(1, b.bn->features(), rng, 0.3);
      b.bn->running_mean = gaussian(1, b.bn->features(), rng, 0.3);
    }
  }
  return net;
}

}  // namespace testing_helpers

#include <filesystem>
#include <gtest/gtest.h>

namespace testing_helpers {

/// Fresh, empty directory named after the running test.
inline std::filesystem::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const auto dir = std::filesystem::temp_directory_path() / "crossq_tests" /
                   (std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_helpers
