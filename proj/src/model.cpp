#include "hhf/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace hhf {

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  encoder_ = EncoderNet(cfg_, store_);
  head_ = HeadNet(cfg_, store_);
}

void Model::init(std::uint64_t seed) {
  std::mt19937_64 enc_rng(mix_seed(seed, "encoder"));
  std::mt19937_64 head_rng(mix_seed(seed, "head"));
  encoder_.init(store_, enc_rng);
  head_.init(store_, head_rng);
  store_.zero_grad();
}

bool is_encoder_param(const std::string& name) { return name.rfind("enc.", 0) == 0 || name.rfind("cls.", 0) == 0; }

void Model::copy_encoder_from(const Model& other) {
  for (auto& p : store_.all()) {
    if (!is_encoder_param(p.name)) continue;
    const auto& src = other.params()[other.params().index(p.name)];
    if (src.shape != p.shape) throw Error(ErrorCode::IncompatibleCheckpoint, "shape of " + p.name + " differs");
    p.value = src.value;
  }
}

namespace {

constexpr const char* kFormat = "hhf-checkpoint-1";

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream m(dir / "manifest.txt");
  m << "format " << kFormat << "\n";
  for (const auto& [k, v] : model.config().to_kv()) m << "config " << k << " " << v << "\n";
  std::size_t offset = 0;
  for (const auto& p : model.params().all()) {
    m << "param " << p.name << " " << shape_str(p.shape) << " " << offset << "\n";
    offset += p.size();
  }
  m << "total " << offset << "\n";
  if (!m) throw Error(ErrorCode::Io, "cannot write " + (dir / "manifest.txt").string());

  std::vector<std::uint32_t> bits;
  bits.reserve(offset);
  for (const auto& p : model.params().all())
    for (double v : p.value) {
      std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      if constexpr (std::endian::native == std::endian::big)
        u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
      bits.push_back(u);
    }
  std::ofstream b(dir / "params.f32", std::ios::binary);
  b.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size() * 4));
  if (!b) throw Error(ErrorCode::Io, "cannot write " + (dir / "params.f32").string());
}

Model load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream m(dir / "manifest.txt");
  if (!m) throw Error(ErrorCode::IncompatibleCheckpoint, "no manifest in " + dir.string());
  std::map<std::string, std::string> kv;
  struct Entry {
    std::string name, shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::size_t total = 0;
  bool format_ok = false;
  std::string line;
  while (std::getline(m, line)) {
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "format") {
      std::string f;
      is >> f;
      format_ok = f == kFormat;
    } else if (tag == "config") {
      std::string k, v;
      is >> k >> v;
      kv[k] = v;
    } else if (tag == "param") {
      Entry e;
      is >> e.name >> e.shape >> e.offset;
      if (!is) throw Error(ErrorCode::IncompatibleCheckpoint, "bad manifest line: " + line);
      entries.push_back(e);
    } else if (tag == "total") {
      is >> total;
    }
  }
  if (!format_ok) throw Error(ErrorCode::IncompatibleCheckpoint, "unknown checkpoint format in " + dir.string());

  ModelConfig cfg;
  cfg.apply_kv(kv);
  Model model(cfg);
  auto& store = model.params();
  if (entries.size() != store.size())
    throw Error(ErrorCode::IncompatibleCheckpoint, "checkpoint has " + std::to_string(entries.size()) +
                                                       " tensors, model expects " + std::to_string(store.size()));

  std::ifstream b(dir / "params.f32", std::ios::binary | std::ios::ate);
  if (!b) throw Error(ErrorCode::IncompatibleCheckpoint, "no params.f32 in " + dir.string());
  const auto bytes = static_cast<std::size_t>(b.tellg());
  if (bytes != total * 4) throw Error(ErrorCode::IncompatibleCheckpoint, "params.f32 size does not match manifest");
  std::vector<std::uint32_t> bits(total);
  b.seekg(0);
  b.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bytes));

  for (const auto& e : entries) {
    auto& p = store[store.index(e.name)];
    if (shape_str(p.shape) != e.shape)
      throw Error(ErrorCode::IncompatibleCheckpoint, e.name + " has shape " + e.shape + ", expected " + shape_str(p.shape));
    if (e.offset + p.size() > total) throw Error(ErrorCode::IncompatibleCheckpoint, e.name + " runs past the blob");
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::uint32_t u = bits[e.offset + i];
      if constexpr (std::endian::native == std::endian::big)
        u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
      p.value[i] = static_cast<double>(std::bit_cast<float>(u));
    }
  }
  return model;
}

}  // namespace hhf
