#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hhf/common.hpp"

namespace hhf {

struct ModelConfig {
  std::size_t enc_first_kernel = 7;
  std::size_t enc_filters = 64;  // E_c, shared by every convolution
  std::array<std::size_t, 4> enc_strides{4, 4, 5, 8};  // E_s
  std::size_t enc_hidden = 128;
  double dropout_p = 0.1;
  std::size_t feat_dim = 128;
  std::size_t cls_hidden = 64;
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t n_layers = 3;
  std::size_t ff_dim = 256;
  std::size_t head_hidden = 64;
  std::size_t seq_len = 720;
  double input_scale = 1e-3;  // uV -> mV

  void validate() const;
  std::size_t encoder_out_len() const;  // time steps after the four blocks
  std::size_t res_hidden() const { return enc_filters / 2 > 0 ? enc_filters / 2 : 1; }

  std::map<std::string, std::string> to_kv() const;
  // Applies recognised keys; unknown keys are ignored.
  void apply_kv(const std::map<std::string, std::string>& kv);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

// Named parameter tensors. Values are kept on the 32-bit float grid so a
// checkpoint round trip is exact.
class ParamStore {
 public:
  std::size_t add(const std::string& name, std::vector<std::size_t> shape);
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::span<Param> all() { return params_; }
  std::span<const Param> all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;

  void zero_grad();
  void round_to_float();

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> by_name_;
};

inline double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
void init_uniform_fan_in(Param& p, std::size_t fan_in, std::mt19937_64& rng);
// U(-sqrt(6/fan_in), sqrt(6/fan_in)), variance preserving for rectifier-like units.
void init_he_uniform(Param& p, std::size_t fan_in, std::mt19937_64& rng);

// Mean over the batch of -[w y log s(z) + (1 - y) log(1 - s(z))].
double weighted_bce(std::span<const double> logits, std::span<const double> labels, double pos_weight);
// d loss / d logit for one element of a batch of size n.
double weighted_bce_grad(double logit, double label, double pos_weight, std::size_t n);

double sigmoid(double z);
double softplus(double x);

}  // namespace hhf
