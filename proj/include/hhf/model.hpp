#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "hhf/encoder.hpp"
#include "hhf/head.hpp"
#include "hhf/params.hpp"

namespace hhf {

// Encoder, window classifier and sequential head sharing one parameter store.
class Model {
 public:
  explicit Model(const ModelConfig& cfg = {});

  void init(std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const EncoderNet& encoder() const { return encoder_; }
  const HeadNet& head() const { return head_; }

  // Copies every enc.* and cls.* tensor from `other`; configs must agree on the
  // encoder part.
  void copy_encoder_from(const Model& other);

 private:
  ModelConfig cfg_;
  ParamStore store_;
  EncoderNet encoder_;
  HeadNet head_;
};

// Encoder-side parameters (frozen during the second step).
bool is_encoder_param(const std::string& name);

// Checkpoint = <dir>/manifest.txt (config and a name/shape/offset table) +
// <dir>/params.f32 (little-endian float32, concatenated in table order).
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace hhf
