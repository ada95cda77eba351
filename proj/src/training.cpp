#include "hhf/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hhf/emr.hpp"
#include "hhf/metrics.hpp"
#include "hhf/sampling.hpp"

namespace hhf {

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::MeanLogit: return "mean_logit";
    case Aggregation::MeanProb: return "mean_prob";
    case Aggregation::Max: return "max";
  }
  return "?";
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean_logit") return Aggregation::MeanLogit;
  if (s == "mean_prob") return Aggregation::MeanProb;
  if (s == "max") return Aggregation::Max;
  throw Error(ErrorCode::BadConfig, "unknown aggregation '" + std::string(s) + "'");
}

TrainConfig TrainConfig::for_step(int step) {
  TrainConfig c;
  c.step = step;
  c.lr = step == 1 ? 1e-3 : 5e-5;
  return c;
}

void TrainConfig::validate() const {
  if (step != 1 && step != 2) throw Error(ErrorCode::BadConfig, "step must be 1 or 2");
  if (!(lr >= 0) || !std::isfinite(lr)) throw Error(ErrorCode::BadConfig, "lr must be finite and >= 0");
  if (batch_size == 0) throw Error(ErrorCode::BadConfig, "batch_size must be >= 1");
  if (patience == 0) throw Error(ErrorCode::BadConfig, "patience must be >= 1");
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  std::ostringstream lr_s;
  lr_s.precision(17);
  lr_s << lr;
  return {{"step", std::to_string(step)},
          {"lr", lr_s.str()},
          {"batch_size", std::to_string(batch_size)},
          {"patience", std::to_string(patience)},
          {"max_epochs", std::to_string(max_epochs)},
          {"seed", std::to_string(seed)},
          {"aggregation", std::string(to_string(aggregation))}};
}

void TrainConfig::apply_kv(const std::map<std::string, std::string>& kv) {
  auto get = [&](const char* key, auto& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      if constexpr (std::is_same_v<std::decay_t<decltype(out)>, double>) {
        out = std::stod(it->second);
      } else if constexpr (std::is_same_v<std::decay_t<decltype(out)>, int>) {
        out = std::stoi(it->second);
      } else {
        out = std::stoull(it->second);
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadConfig, std::string(key) + "='" + it->second + "'");
    }
  };
  get("step", step);
  get("lr", lr);
  get("batch_size", batch_size);
  get("patience", patience);
  get("max_epochs", max_epochs);
  get("seed", seed);
  if (auto it = kv.find("aggregation"); it != kv.end()) aggregation = parse_aggregation(it->second);
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::BadConfig, path.string() + ":" + std::to_string(n) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

double positive_weight(const std::vector<TrainItem>& train) {
  std::size_t pos = 0;
  for (const auto& t : train) pos += t.label != 0;
  if (train.empty()) throw Error(ErrorCode::EmptySplit, "training split is empty");
  if (pos == 0 || pos == train.size()) throw Error(ErrorCode::EmptySplit, "training split lacks one class");
  return static_cast<double>(train.size() - pos) / static_cast<double>(pos);
}

void Adam::step(ParamStore& store, const std::vector<bool>& trainable) {
  if (m.empty()) {
    for (const auto& p : store.all()) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!trainable[i]) continue;
    auto& p = store[i];
    auto& mi = m[i];
    auto& vi = v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k];
      mi[k] = beta1 * mi[k] + (1 - beta1) * g;
      vi[k] = beta2 * vi[k] + (1 - beta2) * g * g;
      p.value[k] = round_to_float(p.value[k] - lr * (mi[k] / c1) / (std::sqrt(vi[k] / c2) + eps));
    }
  }
}

namespace {

bool same_encoder(const ModelConfig& a, const ModelConfig& b) {
  return a.enc_first_kernel == b.enc_first_kernel && a.enc_filters == b.enc_filters &&
         a.enc_strides == b.enc_strides && a.enc_hidden == b.enc_hidden && a.feat_dim == b.feat_dim &&
         a.cls_hidden == b.cls_hidden && a.input_scale == b.input_scale;
}

std::vector<int> labels_of(const std::vector<TrainItem>& items) {
  std::vector<int> l;
  for (const auto& i : items) l.push_back(i.label);
  return l;
}

void check_splits(const std::vector<TrainItem>& train, const std::vector<TrainItem>& val) {
  if (train.empty()) throw Error(ErrorCode::EmptySplit, "training split is empty");
  if (val.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");
  const auto l = labels_of(val);
  if (std::count(l.begin(), l.end(), 1) == 0 || std::count(l.begin(), l.end(), 0) == 0)
    throw Error(ErrorCode::EmptySplit, "validation split lacks one class");
}

// Shared early-stopping bookkeeping. Returns true when training should stop.
struct EarlyStop {
  std::size_t patience;
  double best = -std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t best_epoch = 0;

  // Validation loss breaks AUROC ties, which matter once AUROC saturates.
  bool update(std::size_t epoch, double auroc, double val_loss, bool& improved) {
    improved = auroc > best + 1e-6 || (auroc >= best - 1e-6 && val_loss < best_loss);
    if (improved) {
      best = std::max(best, auroc);
      best_loss = val_loss;
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    return since_best >= patience;
  }
};

// Unweighted mean BCE of recording-level logits.
double validation_loss(const std::vector<double>& logits, const std::vector<int>& labels) {
  long double acc = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) acc += labels[i] ? softplus(-logits[i]) : softplus(logits[i]);
  return static_cast<double>(acc / static_cast<long double>(logits.size()));
}

void report(std::ostream* out, int step, const EpochMetrics& m) {
  if (!out) return;
  *out << "step" << step << " epoch " << m.epoch << " loss " << m.train_loss << " val_auroc " << m.val_auroc << " val_loss " << m.val_loss
       << (m.is_best ? " *" : "") << std::endl;
}

}  // namespace

double aggregate_window_logits(const std::vector<double>& logits, const std::vector<bool>& masked, Aggregation agg) {
  double acc = agg == Aggregation::Max ? -std::numeric_limits<double>::infinity() : 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (masked[i]) continue;
    ++n;
    switch (agg) {
      case Aggregation::MeanLogit: acc += logits[i]; break;
      case Aggregation::MeanProb: acc += sigmoid(logits[i]); break;
      case Aggregation::Max: acc = std::max(acc, logits[i]); break;
    }
  }
  if (n == 0) throw Error(ErrorCode::AllMasked, "no unpadded windows");
  return agg == Aggregation::Max ? acc : acc / static_cast<double>(n);
}

FeatureSequence encode_recording(const Model& model, const EcgRecording& rec, std::size_t c) {
  const auto& cfg = model.config();
  const auto plan = plan_step2_fixed(rec.exam_id(), c);
  FeatureSequence out;
  const std::size_t n = plan.offsets.size();
  out.features.assign(n * cfg.feat_dim, 0.0);
  out.mask.resize(n);
  out.window_logits.assign(n, 0.0);
  std::vector<double> window(kWindowLen);
  EncoderTape tape;
  for (std::size_t i = 0; i < n; ++i) {
    out.mask[i] = plan.offsets[i] >= rec.valid_len();
    if (out.mask[i]) continue;
    rec.copy_uv(plan.offsets[i], window);
    out.window_logits[i] = model.encoder().forward(model.params(), window, false, nullptr, tape);
    std::copy(tape.feat.begin(), tape.feat.end(), out.features.begin() + static_cast<std::ptrdiff_t>(i * cfg.feat_dim));
  }
  return out;
}

double encoder_recording_score(const Model& model, const EcgRecording& rec, Aggregation agg) {
  const auto seq = encode_recording(model, rec, 0);
  return aggregate_window_logits(seq.window_logits, seq.mask, agg);
}

double head_logit(const Model& model, const FeatureSequence& seq) {
  HeadTape tape;
  return model.head().forward(model.params(), seq.features, seq.mask, false, nullptr, tape);
}

double score_recording(const Model& model, const EcgRecording& rec) {
  if (rec.size() == kDaySamples) return sigmoid(head_logit(model, encode_recording(model, rec, 0)));
  return sigmoid(head_logit(model, encode_recording(model, normalize_duration(rec), 0)));
}

TrainResult train_step1(const Model& init, const std::vector<TrainItem>& train, const std::vector<TrainItem>& val,
                        const RecordingLookup& lookup, const TrainConfig& cfg, std::ostream* progress) {
  cfg.validate();
  check_splits(train, val);
  TrainResult res{init, {}, 0, 0, positive_weight(train), {}};
  Model model = init;
  auto& store = model.params();
  std::vector<bool> trainable;
  for (const auto& p : store.all()) trainable.push_back(is_encoder_param(p.name));
  Adam adam;
  adam.lr = cfg.lr;
  EarlyStop stop{cfg.patience};
  const auto val_labels = labels_of(val);

  struct Sample {
    std::size_t item;
    std::size_t offset;
  };
  std::vector<double> window(kWindowLen);
  EncoderTape tape;
  for (std::size_t epoch = 1;; ++epoch) {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto& rec = lookup(train[i].exam_id);
      const auto plan = plan_step1(train[i].exam_id, plan_seed(cfg.seed, train[i].exam_id, epoch));
      for (auto off : plan.offsets)
        if (off < rec.valid_len()) samples.push_back({i, off});
    }
    std::mt19937_64 rng(mix_seed(cfg.seed, "step1-epoch-" + std::to_string(epoch)));
    std::shuffle(samples.begin(), samples.end(), rng);

    long double loss_sum = 0;
    for (std::size_t b0 = 0; b0 < samples.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(samples.size(), b0 + cfg.batch_size);
      store.zero_grad();
      for (std::size_t s = b0; s < b1; ++s) {
        const auto& item = train[samples[s].item];
        lookup(item.exam_id).copy_uv(samples[s].offset, window);
        const double z = model.encoder().forward(store, window, true, &rng, tape);
        const double y = item.label;
        loss_sum += res.pos_weight * y * softplus(-z) + (1 - y) * softplus(z);
        model.encoder().backward(store, tape, {}, weighted_bce_grad(z, y, res.pos_weight, b1 - b0));
        res.gradient_exam_ids.insert(item.exam_id);
      }
      adam.step(store, trainable);
    }

    std::vector<double> scores(val.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < val.size(); ++i)
      scores[i] = encoder_recording_score(model, lookup(val[i].exam_id), cfg.aggregation);

    EpochMetrics m{epoch, static_cast<double>(loss_sum / static_cast<long double>(samples.size())),
                   auroc(scores, val_labels), false};
    if (cfg.aggregation == Aggregation::MeanProb) {
      auto logits = scores;
      for (auto& z : logits) z = std::log(z) - std::log1p(-z);
      m.val_loss = validation_loss(logits, val_labels);
    } else {
      m.val_loss = validation_loss(scores, val_labels);
    }
    const bool done = stop.update(epoch, m.val_auroc, m.val_loss, m.is_best);
    if (m.is_best) res.model = model;
    res.log.push_back(m);
    report(progress, 1, m);
    if (done || (cfg.max_epochs && epoch >= cfg.max_epochs)) break;
  }
  res.best_auroc = stop.best;
  res.best_epoch = stop.best_epoch;
  return res;
}

TrainResult train_step2(const Model& encoder, const ModelConfig& head_config, const std::vector<TrainItem>& train,
                        const std::vector<TrainItem>& val, const RecordingLookup& lookup, const TrainConfig& cfg,
                        std::ostream* progress) {
  cfg.validate();
  if (!same_encoder(encoder.config(), head_config))
    throw Error(ErrorCode::IncompatibleCheckpoint, "encoder configuration differs from the checkpoint");
  check_splits(train, val);

  Model model(head_config);
  model.init(cfg.seed);
  model.copy_encoder_from(encoder);
  TrainResult res{model, {}, 0, 0, positive_weight(train), {}};
  auto& store = model.params();
  std::vector<bool> trainable;
  for (const auto& p : store.all()) trainable.push_back(!is_encoder_param(p.name));
  Adam adam;
  adam.lr = cfg.lr;
  EarlyStop stop{cfg.patience};
  const auto val_labels = labels_of(val);

  // The encoder is frozen and each training recording keeps one offset, so
  // features are computed once.
  std::vector<FeatureSequence> train_seq(train.size()), val_seq(val.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto plan = plan_step2(train[i].exam_id, plan_seed(cfg.seed, train[i].exam_id, 0));
    train_seq[i] = encode_recording(model, lookup(train[i].exam_id), plan.offsets[0]);
  }
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < val.size(); ++i) val_seq[i] = encode_recording(model, lookup(val[i].exam_id), 0);
  for (const auto& t : train) res.gradient_exam_ids.insert(t.exam_id);

  std::vector<std::size_t> order(train.size());
  HeadTape tape;
  for (std::size_t epoch = 1;; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(cfg.seed, "step2-epoch-" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    long double loss_sum = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      store.zero_grad();
      for (std::size_t s = b0; s < b1; ++s) {
        const auto& seq = train_seq[order[s]];
        const double y = train[order[s]].label;
        const double z = model.head().forward(store, seq.features, seq.mask, true, &rng, tape);
        loss_sum += res.pos_weight * y * softplus(-z) + (1 - y) * softplus(z);
        model.head().backward(store, tape, weighted_bce_grad(z, y, res.pos_weight, b1 - b0), nullptr);
      }
      adam.step(store, trainable);
    }

    std::vector<double> scores(val.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < val.size(); ++i) scores[i] = head_logit(model, val_seq[i]);

    EpochMetrics m{epoch, static_cast<double>(loss_sum / static_cast<long double>(order.size())),
                   auroc(scores, val_labels), false};
    m.val_loss = validation_loss(scores, val_labels);
    const bool done = stop.update(epoch, m.val_auroc, m.val_loss, m.is_best);
    if (m.is_best) res.model = model;
    res.log.push_back(m);
    report(progress, 2, m);
    if (done || (cfg.max_epochs && epoch >= cfg.max_epochs)) break;
  }
  res.best_auroc = stop.best;
  res.best_epoch = stop.best_epoch;
  return res;
}

void write_metric_log(const std::vector<EpochMetrics>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "epoch,train_loss,val_auroc,is_best,val_loss\n";
  for (const auto& m : log)
    out << m.epoch << "," << m.train_loss << "," << m.val_auroc << "," << m.is_best << "," << m.val_loss << "\n";
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

std::vector<EpochMetrics> read_metric_log(const std::filesystem::path& path) {
  const auto t = CsvTable::read(path);
  std::vector<EpochMetrics> log;
  for (std::size_t r = 0; r < t.rows(); ++r)
    log.push_back({std::stoull(t.at(r, "epoch")), std::stod(t.at(r, "train_loss")), std::stod(t.at(r, "val_auroc")),
                   t.at(r, "is_best") == "1", t.has_column("val_loss") ? std::stod(t.at(r, "val_loss")) : 0.0});
  return log;
}

}  // namespace hhf
