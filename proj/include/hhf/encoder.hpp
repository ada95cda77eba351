#pragma once

#include <array>
#include <random>
#include <span>
#include <vector>

#include "hhf/params.hpp"

namespace hhf {

// Activations of one window kept for the backward pass.
struct EncoderTape {
  std::vector<double> x;
  std::array<std::vector<double>, 5> a;  // a[0] stem output, a[i+1] block i output
  struct Block {
    std::vector<double> e_in, r1, e_r1, s, e_s;
  };
  std::array<Block, 4> blocks;
  std::vector<double> f0, z1, h1, drop1, feat, c1pre, c1, drop2;
  double logit = 0;
};

// Windowed convolutional encoder: stem convolution, four blocks of
// (residual unit -> ELU -> strided conv), two FC layers to the feature
// vector, and a separate two-layer classifier giving one logit per window.
class EncoderNet {
 public:
  EncoderNet() = default;
  EncoderNet(const ModelConfig& cfg, ParamStore& store);  // registers parameters

  void init(ParamStore& store, std::mt19937_64& rng) const;

  // window_uv has 3840 samples; returns the window logit, fills tape.feat.
  double forward(const ParamStore& store, std::span<const double> window_uv, bool train, std::mt19937_64* rng,
                 EncoderTape& tape) const;
  // Accumulates parameter gradients. d_features may be empty.
  void backward(ParamStore& store, EncoderTape& tape, std::span<const double> d_features, double d_logit) const;

 private:
  struct BlockIdx {
    std::size_t res1_w, res1_b, res2_w, res2_b, down_w, down_b;
  };
  ModelConfig cfg_;
  std::size_t conv0_w_ = 0, conv0_b_ = 0;
  std::array<BlockIdx, 4> blocks_{};
  std::size_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0;
  std::size_t cls1_w_ = 0, cls1_b_ = 0, cls2_w_ = 0, cls2_b_ = 0;
};

double elu(double x);
double elu_grad(double pre);  // derivative from the pre-activation

}  // namespace hhf
