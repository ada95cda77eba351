#include "hhf/params.hpp"

#include <cmath>
#include <sstream>

#include "hhf/sampling.hpp"

namespace hhf {

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::BadConfig, m); };
  std::size_t prod = 1;
  for (auto s : enc_strides) {
    if (s == 0) fail("zero encoder stride");
    prod *= s;
  }
  if (kWindowLen % prod != 0) fail("product of encoder strides must divide 3840");
  if (enc_filters == 0 || enc_first_kernel == 0 || enc_hidden == 0 || feat_dim == 0 || cls_hidden == 0)
    fail("zero-sized encoder layer");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (ff_dim == 0 || head_hidden == 0 || seq_len == 0) fail("zero-sized head layer");
  if (!(dropout_p >= 0 && dropout_p < 1)) fail("dropout_p outside [0, 1)");
}

std::size_t ModelConfig::encoder_out_len() const {
  std::size_t len = kWindowLen;
  for (auto s : enc_strides) len /= s;
  return len;
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  std::ostringstream strides;
  for (std::size_t i = 0; i < 4; ++i) strides << (i ? "," : "") << enc_strides[i];
  return {
      {"enc_first_kernel", std::to_string(enc_first_kernel)},
      {"enc_filters", std::to_string(enc_filters)},
      {"enc_strides", strides.str()},
      {"enc_hidden", std::to_string(enc_hidden)},
      {"dropout_p", num(dropout_p)},
      {"feat_dim", std::to_string(feat_dim)},
      {"cls_hidden", std::to_string(cls_hidden)},
      {"d_model", std::to_string(d_model)},
      {"n_heads", std::to_string(n_heads)},
      {"n_layers", std::to_string(n_layers)},
      {"ff_dim", std::to_string(ff_dim)},
      {"head_hidden", std::to_string(head_hidden)},
      {"seq_len", std::to_string(seq_len)},
      {"input_scale", num(input_scale)},
  };
}

void ModelConfig::apply_kv(const std::map<std::string, std::string>& kv) {
  auto get_size = [&](const char* key, std::size_t& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      try {
        out = std::stoull(it->second);
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadConfig, std::string(key) + "='" + it->second + "'");
      }
    }
  };
  auto get_double = [&](const char* key, double& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      try {
        out = std::stod(it->second);
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadConfig, std::string(key) + "='" + it->second + "'");
      }
    }
  };
  get_size("enc_first_kernel", enc_first_kernel);
  get_size("enc_filters", enc_filters);
  get_size("enc_hidden", enc_hidden);
  get_double("dropout_p", dropout_p);
  get_size("feat_dim", feat_dim);
  get_size("cls_hidden", cls_hidden);
  get_size("d_model", d_model);
  get_size("n_heads", n_heads);
  get_size("n_layers", n_layers);
  get_size("ff_dim", ff_dim);
  get_size("head_hidden", head_hidden);
  get_size("seq_len", seq_len);
  get_double("input_scale", input_scale);
  if (auto it = kv.find("enc_strides"); it != kv.end()) {
    std::istringstream is(it->second);
    std::string tok;
    std::size_t i = 0;
    while (std::getline(is, tok, ',')) {
      if (i >= 4) throw Error(ErrorCode::BadConfig, "enc_strides needs exactly 4 values");
      try {
        enc_strides[i++] = std::stoull(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadConfig, "enc_strides='" + it->second + "'");
      }
    }
    if (i != 4) throw Error(ErrorCode::BadConfig, "enc_strides needs exactly 4 values");
  }
}

std::size_t ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  if (by_name_.count(name)) throw Error(ErrorCode::BadConfig, "duplicate parameter " + name);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  params_.push_back({name, std::move(shape), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  by_name_[name] = params_.size() - 1;
  return params_.size() - 1;
}

std::size_t ParamStore::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error(ErrorCode::IncompatibleCheckpoint, "no parameter " + name);
  return it->second;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

void ParamStore::round_to_float() {
  for (auto& p : params_)
    for (auto& v : p.value) v = hhf::round_to_float(v);
}

void init_uniform_fan_in(Param& p, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : p.value) v = round_to_float(u(rng));
}

void init_he_uniform(Param& p, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : p.value) v = round_to_float(u(rng));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double weighted_bce(std::span<const double> logits, std::span<const double> labels, double pos_weight) {
  if (logits.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "logits/labels length");
  if (logits.empty()) return 0.0;
  long double acc = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], y = labels[i];
    // -log s(z) = softplus(-z), -log(1 - s(z)) = softplus(z)
    acc += pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
  }
  return static_cast<double>(acc / static_cast<long double>(logits.size()));
}

double weighted_bce_grad(double z, double y, double pos_weight, std::size_t n) {
  const double s = sigmoid(z);
  return (-pos_weight * y * (1.0 - s) + (1.0 - y) * s) / static_cast<double>(n);
}

}  // namespace hhf
