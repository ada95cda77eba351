#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hhf/model.hpp"
#include "hhf/recording.hpp"

namespace hhf {

// Window logits -> recording score for the encoder-only model.
enum class Aggregation { MeanLogit, MeanProb, Max };
std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

struct TrainConfig {
  int step = 1;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t patience = 8;
  std::size_t max_epochs = 0;  // 0: run until early stopping
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::MeanLogit;

  static TrainConfig for_step(int step);  // lr 1e-3 for step 1, 5e-5 for step 2
  void validate() const;
  std::map<std::string, std::string> to_kv() const;
  void apply_kv(const std::map<std::string, std::string>& kv);
};

// key=value lines, '#' starts a comment.
std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);

struct TrainItem {
  std::string exam_id;
  int label = 0;
};

// Returns a normalized (24 h) recording for an exam id.
using RecordingLookup = std::function<const EcgRecording&(const std::string&)>;

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_auroc = 0;
  bool is_best = false;
  double val_loss = 0;  // unweighted BCE of recording logits; breaks AUROC ties
};

struct TrainResult {
  Model model;  // best checkpoint
  std::vector<EpochMetrics> log;
  double best_auroc = 0;
  std::size_t best_epoch = 0;
  double pos_weight = 1;
  std::set<std::string> gradient_exam_ids;  // every recording that contributed a gradient
};

// N_neg / N_pos over the training items.
double positive_weight(const std::vector<TrainItem>& train);

struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t t = 0;
  std::vector<std::vector<double>> m, v;

  // Updates parameters selected by `trainable` and rounds them to float32.
  void step(ParamStore& store, const std::vector<bool>& trainable);
};

TrainResult train_step1(const Model& init, const std::vector<TrainItem>& train, const std::vector<TrainItem>& val,
                        const RecordingLookup& lookup, const TrainConfig& cfg, std::ostream* progress = nullptr);

// `encoder` supplies the frozen enc.* / cls.* tensors; the head is initialized
// from `head_config` (whose encoder part must match) with cfg.seed.
TrainResult train_step2(const Model& encoder, const ModelConfig& head_config, const std::vector<TrainItem>& train,
                        const std::vector<TrainItem>& val, const RecordingLookup& lookup, const TrainConfig& cfg,
                        std::ostream* progress = nullptr);

// Encoder features over the step-2 plan with offset c (eval mode).
struct FeatureSequence {
  std::vector<double> features;  // seq x feat_dim
  std::vector<bool> mask;        // true for padding windows
  std::vector<double> window_logits;
};
FeatureSequence encode_recording(const Model& model, const EcgRecording& rec, std::size_t c = 0);

// Encoder-only recording score over the c = 0 step-2 windows (a logit for
// MeanLogit/Max, a probability for MeanProb).
double encoder_recording_score(const Model& model, const EcgRecording& rec, Aggregation agg);
double aggregate_window_logits(const std::vector<double>& logits, const std::vector<bool>& masked, Aggregation agg);

// Head logit for precomputed features (eval mode).
double head_logit(const Model& model, const FeatureSequence& seq);

// Deterministic eval pipeline: normalize, c = 0 plan, encoder, head, sigmoid.
double score_recording(const Model& model, const EcgRecording& rec);

void write_metric_log(const std::vector<EpochMetrics>& log, const std::filesystem::path& path);
std::vector<EpochMetrics> read_metric_log(const std::filesystem::path& path);

}  // namespace hhf
