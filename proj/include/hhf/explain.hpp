#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hhf/model.hpp"
#include "hhf/recording.hpp"

namespace hhf {

struct RolloutOptions {
  double discard_ratio = 0.9;
  // Discard before adding the identity (default) or after.
  bool discard_before_identity = true;
};

// Attention probabilities and d logit / d attention of one layer.
struct LayerAttention {
  std::size_t heads = 0;
  std::size_t seq = 0;
  std::vector<double> attn;  // heads x seq x seq, rows = queries
  std::vector<double> grad;
};

struct AttentionProfile {
  std::string exam_id;
  DateTime start_time;
  std::size_t offset_c = 0;       // constant in-segment window offset
  std::vector<double> mass;       // sums to 1 over unmasked positions
  std::vector<bool> mask;         // padding positions
  std::vector<bool> high;         // positions surviving the discard ratio

  double minute_of_day(std::size_t position) const;  // wall-clock start of the window
};

// Rollout over captured layers (first layer first). `mask` marks padding.
std::vector<double> rollout(const std::vector<LayerAttention>& layers, const std::vector<bool>& mask,
                            const RolloutOptions& opt = {});

// Positions whose mass is among the top (1 - discard_ratio) of unmasked ones.
std::vector<bool> high_attention_positions(const std::vector<double>& mass, const std::vector<bool>& mask,
                                           double discard_ratio);

// Eval forward on the c = 0 step-2 plan with gradients of the logit.
AttentionProfile grad_attention_rollout(const Model& model, const EcgRecording& rec, const RolloutOptions& opt = {});

struct CoverageInterval {
  int begin_min = 0;  // inclusive, minutes of day
  int end_min = 0;    // exclusive; may be smaller than begin_min when wrapping midnight
  double mass = 0;

  bool wraps() const { return end_min <= begin_min; }
  int length_min() const { return wraps() ? end_min + 1440 - begin_min : end_min - begin_min; }
};

struct CircadianDensity {
  int bin_min = 0;
  std::vector<double> mass;  // per time-of-day bin, sums to 1
  CoverageInterval cover95;
  CoverageInterval cover99;
};

// Each profile is normalized to unit mass, binned by wall-clock time of day,
// then the profiles are averaged.
CircadianDensity circadian_density(const std::vector<AttentionProfile>& profiles, int bin_min);
// Shortest contiguous (circular) run of bins holding at least `q` of the mass.
CoverageInterval shortest_cover(const std::vector<double>& bins, int bin_min, double q);

inline constexpr std::size_t kBeatHalfWidth = 50;
inline constexpr std::size_t kBeatLen = 2 * kBeatHalfWidth;  // 100 samples
inline constexpr std::size_t kBeatSegment = 10 * kFs;        // first 10 s of a window

struct BeatSet {
  std::size_t count = 0;
  std::vector<double> data;  // count x 100, microvolts
  std::vector<std::string> exam_id;
  std::vector<std::size_t> r_peak;  // absolute sample index

  void append(const BeatSet& other);
};

// Beats (R +- 50 samples) from the first 10 s of every high-attention window.
BeatSet extract_high_attention_beats(const EcgRecording& rec, const AttentionProfile& profile);
// Beats from one segment; beats closer than 50 samples to an edge are dropped.
BeatSet extract_beats(const std::vector<double>& segment_uv, std::size_t base_index, const std::string& exam_id);

void write_profile_csv(const AttentionProfile& p, const std::filesystem::path& path);
void write_density_csv(const CircadianDensity& d, const std::filesystem::path& path);
// Raw little-endian float32 blob plus a text manifest (rows, cols, dtype).
void write_beats(const BeatSet& beats, const std::filesystem::path& stem);

}  // namespace hhf
