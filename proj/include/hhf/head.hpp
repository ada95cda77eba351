#pragma once

#include <random>
#include <span>
#include <vector>

#include "hhf/params.hpp"

namespace hhf {

struct HeadTape {
  std::size_t seq = 0;
  std::vector<bool> mask;  // true = padding position
  std::size_t n_valid = 0;
  std::vector<double> features;   // seq x feat_dim input
  std::vector<std::vector<double>> x;  // layer inputs; x[n_layers] is the final sequence
  struct Layer {
    std::vector<double> q, k, v, p, o, y, drop_a, s1, ln1_mean, ln1_rstd, x1, u, g, z, drop_f, s2, ln2_mean,
        ln2_rstd;
    std::vector<double> dp;  // d logit / d attention, filled when capture_attention_grad is set
  };
  std::vector<Layer> layers;
  std::vector<double> pooled, z1, h1, drop1;
  double logit = 0;
  bool capture_attention_grad = false;
};

// Sequential head: optional input projection, sinusoidal positional
// encoding, post-norm transformer encoder layers with key-padding mask, mean
// pooling over unmasked positions and two FC layers to one logit.
class HeadNet {
 public:
  HeadNet() = default;
  HeadNet(const ModelConfig& cfg, ParamStore& store);

  void init(ParamStore& store, std::mt19937_64& rng) const;

  // features: seq x feat_dim row-major, mask.size() == seq.
  double forward(const ParamStore& store, std::span<const double> features, const std::vector<bool>& mask, bool train,
                 std::mt19937_64* rng, HeadTape& tape) const;
  // Accumulates gradients of head parameters; fills d_features when non-null.
  void backward(ParamStore& store, HeadTape& tape, double d_logit, std::vector<double>* d_features) const;

  std::size_t head_dim() const { return cfg_.d_model / cfg_.n_heads; }

 private:
  struct LayerIdx {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, ff1_w, ff1_b, ff2_w, ff2_b, ln2_g, ln2_b;
  };
  ModelConfig cfg_;
  bool project_ = false;
  std::size_t in_w_ = 0, in_b_ = 0;
  std::vector<LayerIdx> layers_;
  std::size_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0;
};

std::vector<double> sinusoidal_encoding(std::size_t seq, std::size_t dim);
double gelu(double x);
double gelu_grad(double x);

}  // namespace hhf
