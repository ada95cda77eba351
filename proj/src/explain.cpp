#include "hhf/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hhf/dsp.hpp"
#include "hhf/sampling.hpp"
#include "hhf/training.hpp"

namespace hhf {

double AttentionProfile::minute_of_day(std::size_t position) const {
  const double sec = static_cast<double>(position * kStep2Segment + offset_c) / kFs;
  return std::fmod(start_time.minute_of_day + sec / 60.0, 1440.0);
}

namespace {

// Zeroes the lowest floor(ratio * N) of the N unmasked (row, col) entries.
// Entries tied with the first surviving value are all kept, so a constant
// matrix passes through unchanged.
void discard_lowest(std::vector<double>& a, std::size_t seq, const std::vector<bool>& mask, double ratio) {
  std::vector<double> vals;
  for (std::size_t i = 0; i < seq; ++i) {
    if (mask[i]) continue;
    for (std::size_t j = 0; j < seq; ++j)
      if (!mask[j]) vals.push_back(a[i * seq + j]);
  }
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(vals.size())));
  if (k == 0) return;
  if (k >= vals.size()) {
    std::fill(a.begin(), a.end(), 0.0);
    return;
  }
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(k), vals.end());
  const double cut = vals[k];
  for (auto& v : a)
    if (v < cut) v = 0.0;
}

void normalize_rows(std::vector<double>& a, std::size_t seq) {
  for (std::size_t i = 0; i < seq; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < seq; ++j) s += a[i * seq + j];
    if (s > 0)
      for (std::size_t j = 0; j < seq; ++j) a[i * seq + j] /= s;
  }
}

}  // namespace

std::vector<double> rollout(const std::vector<LayerAttention>& layers, const std::vector<bool>& mask,
                            const RolloutOptions& opt) {
  if (layers.empty()) throw Error(ErrorCode::NoAttentionCaptured, "no attention layers");
  const std::size_t seq = mask.size();
  std::size_t n_valid = 0;
  for (bool m : mask) n_valid += !m;
  if (n_valid == 0) throw Error(ErrorCode::AllMasked, "every position is padding");

  std::vector<std::vector<double>> mats;
  for (const auto& L : layers) {
    if (L.seq != seq || L.attn.size() != L.heads * seq * seq || L.grad.size() != L.attn.size())
      throw Error(ErrorCode::NoAttentionCaptured, "attention/gradient tensors missing or misshapen");
    std::vector<double> a(seq * seq, 0.0);
    for (std::size_t h = 0; h < L.heads; ++h) {
      const std::size_t o = h * seq * seq;
      for (std::size_t i = 0; i < seq * seq; ++i) a[i] += std::max(0.0, L.attn[o + i] * L.grad[o + i]);
    }
    for (std::size_t i = 0; i < seq; ++i)
      for (std::size_t j = 0; j < seq; ++j)
        a[i * seq + j] = (mask[i] || mask[j]) ? 0.0 : a[i * seq + j] / static_cast<double>(L.heads);
    if (opt.discard_before_identity) discard_lowest(a, seq, mask, opt.discard_ratio);
    normalize_rows(a, seq);
    for (std::size_t i = 0; i < seq; ++i)
      if (!mask[i]) a[i * seq + i] += 1.0;
    if (!opt.discard_before_identity) discard_lowest(a, seq, mask, opt.discard_ratio);
    normalize_rows(a, seq);
    mats.push_back(std::move(a));
  }

  // Mean pooling reads every unmasked output position equally, so the profile
  // is u^T A_L ... A_1 with u uniform over unmasked rows.
  std::vector<double> u(seq, 0.0), next(seq);
  for (std::size_t i = 0; i < seq; ++i)
    if (!mask[i]) u[i] = 1.0 / static_cast<double>(n_valid);
  for (std::size_t l = mats.size(); l-- > 0;) {
    std::fill(next.begin(), next.end(), 0.0);
    const auto& a = mats[l];
    for (std::size_t i = 0; i < seq; ++i) {
      if (u[i] == 0) continue;
      for (std::size_t j = 0; j < seq; ++j) next[j] += u[i] * a[i * seq + j];
    }
    u.swap(next);
  }
  const double total = std::accumulate(u.begin(), u.end(), 0.0);
  if (total > 0)
    for (auto& v : u) v /= total;
  return u;
}

std::vector<bool> high_attention_positions(const std::vector<double>& mass, const std::vector<bool>& mask,
                                           double discard_ratio) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mass.size(); ++i)
    if (!mask[i]) idx.push_back(i);
  const auto keep = idx.size() - static_cast<std::size_t>(std::floor(discard_ratio * static_cast<double>(idx.size())));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
  std::vector<bool> high(mass.size(), false);
  for (std::size_t i = 0; i < keep && i < idx.size(); ++i) high[idx[i]] = true;
  return high;
}

AttentionProfile grad_attention_rollout(const Model& model, const EcgRecording& rec, const RolloutOptions& opt) {
  const auto seq = rec.size() == kDaySamples ? encode_recording(model, rec, 0)
                                             : encode_recording(model, normalize_duration(rec), 0);
  ParamStore scratch = model.params();
  HeadTape tape;
  tape.capture_attention_grad = true;
  model.head().forward(scratch, seq.features, seq.mask, false, nullptr, tape);
  model.head().backward(scratch, tape, 1.0, nullptr);

  std::vector<LayerAttention> layers;
  for (const auto& L : tape.layers) {
    if (L.dp.empty()) throw Error(ErrorCode::NoAttentionCaptured, "attention gradient was not recorded");
    layers.push_back({model.config().n_heads, tape.seq, L.p, L.dp});
  }
  AttentionProfile p;
  p.exam_id = rec.exam_id();
  p.start_time = rec.start_time();
  p.offset_c = 0;
  p.mask = seq.mask;
  p.mass = rollout(layers, seq.mask, opt);
  p.high = high_attention_positions(p.mass, p.mask, opt.discard_ratio);
  return p;
}

CoverageInterval shortest_cover(const std::vector<double>& bins, int bin_min, double q) {
  const std::size_t n = bins.size();
  const double total = std::accumulate(bins.begin(), bins.end(), 0.0);
  const double need = q * total - 1e-12;
  CoverageInterval best;
  std::size_t best_len = n + 1;
  double best_mass = -1;
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0;
    for (std::size_t len = 1; len <= n && len <= best_len; ++len) {
      acc += bins[(s + len - 1) % n];
      if (acc >= need) {
        if (len < best_len || (len == best_len && acc > best_mass)) {
          best_len = len;
          best_mass = acc;
          best.begin_min = static_cast<int>(s) * bin_min;
          best.end_min = static_cast<int>((s + len) % n) * bin_min;
          best.mass = total > 0 ? acc / total : 0;
        }
        break;
      }
    }
  }
  return best;
}

CircadianDensity circadian_density(const std::vector<AttentionProfile>& profiles, int bin_min) {
  if (bin_min <= 0 || 1440 % bin_min != 0) throw Error(ErrorCode::BadConfig, "bin width must divide 1440 minutes");
  CircadianDensity d;
  d.bin_min = bin_min;
  const std::size_t nb = static_cast<std::size_t>(1440 / bin_min);
  d.mass.assign(nb, 0.0);
  std::size_t used = 0;
  for (const auto& p : profiles) {
    double total = 0;
    for (std::size_t i = 0; i < p.mass.size(); ++i)
      if (!p.mask[i]) total += p.mass[i];
    if (total <= 0) continue;
    ++used;
    for (std::size_t i = 0; i < p.mass.size(); ++i) {
      if (p.mask[i]) continue;
      const auto b = static_cast<std::size_t>(p.minute_of_day(i) / bin_min) % nb;
      d.mass[b] += p.mass[i] / total;
    }
  }
  if (used > 0)
    for (auto& m : d.mass) m /= static_cast<double>(used);
  d.cover95 = shortest_cover(d.mass, bin_min, 0.95);
  d.cover99 = shortest_cover(d.mass, bin_min, 0.99);
  return d;
}

void BeatSet::append(const BeatSet& o) {
  count += o.count;
  data.insert(data.end(), o.data.begin(), o.data.end());
  exam_id.insert(exam_id.end(), o.exam_id.begin(), o.exam_id.end());
  r_peak.insert(r_peak.end(), o.r_peak.begin(), o.r_peak.end());
}

BeatSet extract_beats(const std::vector<double>& segment_uv, std::size_t base_index, const std::string& exam_id) {
  BeatSet out;
  for (auto r : detect_r_peaks(segment_uv, kFs)) {
    if (r < kBeatHalfWidth || r + kBeatHalfWidth > segment_uv.size()) continue;
    out.data.insert(out.data.end(), segment_uv.begin() + static_cast<std::ptrdiff_t>(r - kBeatHalfWidth),
                    segment_uv.begin() + static_cast<std::ptrdiff_t>(r + kBeatHalfWidth));
    out.exam_id.push_back(exam_id);
    out.r_peak.push_back(base_index + r);
    ++out.count;
  }
  return out;
}

BeatSet extract_high_attention_beats(const EcgRecording& rec, const AttentionProfile& profile) {
  BeatSet all;
  std::vector<double> seg(kBeatSegment);
  for (std::size_t i = 0; i < profile.high.size(); ++i) {
    if (!profile.high[i] || profile.mask[i]) continue;
    const std::size_t off = i * kStep2Segment + profile.offset_c;
    if (off + kBeatSegment > rec.valid_len()) continue;
    rec.copy_uv(off, seg);
    all.append(extract_beats(seg, off, rec.exam_id()));
  }
  if (all.count == 0) throw Error(ErrorCode::NoBeatsFound, "no beats in high-attention windows of " + rec.exam_id());
  return all;
}

void write_profile_csv(const AttentionProfile& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(10);
  out << "position,wall_clock,mass,high\n";
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    const double sec = static_cast<double>(i * kStep2Segment + p.offset_c) / kFs;
    const long total_min = p.start_time.minute_of_day + static_cast<long>(sec / 60.0);
    const DateTime t{p.start_time.date + static_cast<std::int32_t>(total_min / 1440),
                     static_cast<int>(total_min % 1440)};
    out << i << "," << t.iso() << "," << p.mass[i] << "," << (p.high[i] ? 1 : 0) << "\n";
  }
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

void write_density_csv(const CircadianDensity& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(10);
  out << "bin_start,mass\n";
  for (std::size_t b = 0; b < d.mass.size(); ++b) {
    const int m = static_cast<int>(b) * d.bin_min;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d:%02d", m / 60, m % 60);
    out << buf << "," << d.mass[b] << "\n";
  }
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

void write_beats(const BeatSet& beats, const std::filesystem::path& stem) {
  auto blob = stem;
  blob += ".f32";
  auto manifest = stem;
  manifest += ".txt";
  std::ofstream b(blob, std::ios::binary);
  for (double v : beats.data) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    if constexpr (std::endian::native == std::endian::big)
      u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
    b.write(reinterpret_cast<const char*>(&u), 4);
  }
  std::ofstream m(manifest);
  m << "dtype=float32le\nrows=" << beats.count << "\ncols=" << kBeatLen << "\nunits=uV\n";
  m << "# row exam_id r_peak\n";
  for (std::size_t i = 0; i < beats.count; ++i) m << i << " " << beats.exam_id[i] << " " << beats.r_peak[i] << "\n";
  if (!b || !m) throw Error(ErrorCode::Io, "cannot write beats to " + stem.string());
}

}  // namespace hhf
