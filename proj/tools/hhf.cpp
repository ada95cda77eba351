// hhf: command-line driver for the Holter HF pipeline.
//
//   hhf synth --n 40 --seed 7 --out data
//   hhf label --data data
//   hhf split --labels data/labels.jsonl --seed 7
//   hhf train-encoder --data data --out runs/enc
//   hhf train-head --data data --encoder runs/enc --out runs/full
//   hhf score --data data --checkpoint runs/full --out runs/scores.csv
//   hhf evaluate --scores runs/scores.csv --labels data/labels.jsonl --out runs/eval
//
// Every option may also come from a key=value file given with --config (keys
// are the long option names with '-' replaced by '_'); flags win.

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hhf/clinical.hpp"
#include "hhf/cohort.hpp"
#include "hhf/explain.hpp"
#include "hhf/kmeans.hpp"
#include "hhf/metrics.hpp"
#include "hhf/survival.hpp"
#include "hhf/synth_cohort.hpp"
#include "hhf/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hhf;

namespace {

using Kv = std::map<std::string, std::string>;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One subcommand: its CLI11 app, the raw flag values and the resolved settings.
struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;
  Kv kv;

  CLI::Option* opt(const std::string& name, const std::string& desc) {
    std::string key = name.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    return app->add_option(name, flags[key], desc)->type_name("VALUE");
  }

  bool has(const std::string& k) const { return kv.count(k) && !kv.at(k).empty(); }

  std::string str(const std::string& k, const std::string& def = "") const { return has(k) ? kv.at(k) : def; }

  std::string need(const std::string& k) const {
    if (!has(k)) {
      std::string flag = k;
      std::replace(flag.begin(), flag.end(), '_', '-');
      throw UsageError("missing required option --" + flag);
    }
    return kv.at(k);
  }

  double num(const std::string& k, double def) const {
    if (!has(k)) return def;
    try {
      std::size_t used = 0;
      const double v = std::stod(kv.at(k), &used);
      if (used != kv.at(k).size()) throw std::invalid_argument(k);
      return v;
    } catch (const std::exception&) {
      throw UsageError("option " + k + " expects a number, got '" + kv.at(k) + "'");
    }
  }

  std::uint64_t u64(const std::string& k, std::uint64_t def) const {
    if (!has(k)) return def;
    try {
      std::size_t used = 0;
      const auto v = std::stoull(kv.at(k), &used);
      if (used != kv.at(k).size() || kv.at(k)[0] == '-') throw std::invalid_argument(k);
      return v;
    } catch (const std::exception&) {
      throw UsageError("option " + k + " expects a non-negative integer, got '" + kv.at(k) + "'");
    }
  }
};

// Output location does not change what is computed, so it is left out.
std::string config_hash(const Kv& kv) {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (const auto& [k, v] : kv)
    if (k != "out") h = mix_seed(h, k + "=" + v + "\n");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_manifest(const fs::path& path, const std::string& subcommand, const Kv& kv, const json& seeds,
                    const std::vector<std::string>& argv) {
  json m;
  m["subcommand"] = subcommand;
  m["version"] = HHF_VERSION;
  m["compiler"] = __VERSION__;
  m["threads"] = omp_get_max_threads();
  m["config"] = kv;
  m["config_hash"] = config_hash(kv);
  m["seeds"] = seeds;
  m["argv"] = argv;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << m.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

// Manifest next to an output: <dir>/manifest.json for directories, <file>.manifest.json otherwise.
fs::path manifest_for(const fs::path& out, bool is_dir) {
  return is_dir ? out / "manifest.json" : fs::path(out.string() + ".manifest.json");
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

fs::path recordings_dir(const Command& c) {
  return c.has("recordings") ? fs::path(c.str("recordings")) : fs::path(c.need("data")) / "recordings";
}

fs::path labels_path(const Command& c) {
  return c.has("labels") ? fs::path(c.str("labels")) : fs::path(c.need("data")) / "labels.jsonl";
}

// Normalized recordings, loaded in parallel.
std::map<std::string, EcgRecording> load_recordings(const fs::path& dir, const std::vector<std::string>& ids) {
  std::vector<EcgRecording> recs(ids.size());
  std::vector<std::string> errors(ids.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < ids.size(); ++i) {
    try {
      recs[i] = normalize_duration(read_recording(dir / ids[i]));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!errors[i].empty()) throw Error(ErrorCode::Io, ids[i] + ": " + errors[i]);
  std::map<std::string, EcgRecording> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], std::move(recs[i]));
  return out;
}

std::vector<TrainItem> items_of(const std::vector<ExamLabel>& labels, Split s) {
  std::vector<TrainItem> out;
  for (const auto& l : labels)
    if (l.split == s) out.push_back({l.exam_id, l.label == HfClass::Hf ? 1 : 0});
  return out;
}

// Exams selected by --split (train/validation/test/all).
std::vector<ExamLabel> select_split(const std::vector<ExamLabel>& labels, const std::string& split) {
  if (split == "all") return labels;
  const Split s = parse_split(split);
  if (s == Split::Unassigned) throw UsageError("--split must be train, validation, test or all");
  std::vector<ExamLabel> out;
  for (const auto& l : labels)
    if (l.split == s) out.push_back(l);
  return out;
}

// ---------------------------------------------------------------- synth

int run_synth(const Command& c, const std::vector<std::string>& argv) {
  CohortSynthSpec spec;
  spec.n_exams = c.u64("n", 40);
  spec.seed = c.u64("seed", 0);
  spec.positive_fraction = c.num("positive_fraction", spec.positive_fraction);
  spec.test_fraction = c.num("test_fraction", spec.test_fraction);
  spec.pvc_burst_rate = c.num("burst_rate", spec.pvc_burst_rate);
  spec.negative_burst_rate = c.num("negative_burst_rate", spec.negative_burst_rate);
  spec.af_episode_prob = c.num("af_prob", spec.af_episode_prob);
  spec.noise_rms = c.num("noise_rms", spec.noise_rms);
  const fs::path out = c.need("out");

  const auto cohort = make_synth_cohort(spec);
  fs::create_directories(out / "recordings");
  write_emr(cohort.emr, out);
  write_exams(cohort.exams, out / "exams.csv");

  std::vector<std::vector<SampleInterval>> bursts(cohort.signals.size());
  std::vector<std::string> errors(cohort.signals.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < cohort.signals.size(); ++i) {
    try {
      auto rec = synthesize_annotated(cohort.signals[i]);
      write_recording(rec.recording, out / "recordings");
      bursts[i] = std::move(rec.pvc_bursts);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error(ErrorCode::Io, e);

  std::ofstream truth(out / "planted_bursts.csv");
  truth << "exam_id,planted_hf,begin_sample,end_sample\n";
  for (std::size_t i = 0; i < cohort.signals.size(); ++i) {
    if (bursts[i].empty()) truth << cohort.exams[i].exam_id << ',' << cohort.hf[i] << ",,\n";
    for (const auto& b : bursts[i])
      truth << cohort.exams[i].exam_id << ',' << cohort.hf[i] << ',' << b.begin << ',' << b.end << '\n';
  }
  write_manifest(manifest_for(out, true), "synth", c.kv, {{"seed", spec.seed}}, argv);
  std::cout << cohort.signals.size() << " recordings written to " << (out / "recordings").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- label / split

int run_label(const Command& c, const std::vector<std::string>& argv) {
  const fs::path data = c.need("data");
  const auto exams = load_exams(c.has("exams") ? fs::path(c.str("exams")) : data / "exams.csv");
  const auto emr = load_emr(data);
  std::map<std::string, Date> endpoints;
  for (const auto& [pid, tl] : emr.timelines)
    if (auto d = extract_endpoint(tl)) endpoints[pid] = *d;
  const auto labels = label_exams(exams, endpoints);
  const fs::path out = c.has("out") ? fs::path(c.str("out")) : data / "labels.jsonl";
  write_labels_jsonl(labels, out);
  const auto n_hf = std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.label == HfClass::Hf; });
  write_manifest(manifest_for(out, false), "label", c.kv, json::object(), argv);
  std::cout << labels.size() << " of " << exams.size() << " exams labeled, " << n_hf << " HF\n";
  return 0;
}

int run_split(const Command& c, const std::vector<std::string>& argv) {
  const fs::path in = labels_path(c);
  const auto seed = c.u64("seed", 0);
  const auto labels = split_cohort(read_labels_jsonl(in), c.num("val_frac", 0.05), seed);
  const fs::path out = c.has("out") ? fs::path(c.str("out")) : in;
  write_labels_jsonl(labels, out);
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& l : labels) {
    auto& [n, pos] = counts[std::string(to_string(l.split))];
    ++n;
    pos += l.label == HfClass::Hf;
  }
  write_manifest(manifest_for(out, false), "split", c.kv, {{"seed", seed}}, argv);
  for (const auto& [s, np] : counts) std::cout << s << ": " << np.first << " exams, " << np.second << " HF\n";
  return 0;
}

// ---------------------------------------------------------------- training

struct TrainingData {
  std::vector<TrainItem> train, val;
  std::map<std::string, EcgRecording> recs;
  RecordingLookup lookup() const {
    return [this](const std::string& id) -> const EcgRecording& { return recs.at(id); };
  }
};

std::unique_ptr<TrainingData> load_training_data(const Command& c) {
  auto d = std::make_unique<TrainingData>();
  const auto labels = read_labels_jsonl(labels_path(c));
  d->train = items_of(labels, Split::Train);
  d->val = items_of(labels, Split::Validation);
  std::vector<std::string> ids;
  for (const auto& t : d->train) ids.push_back(t.exam_id);
  for (const auto& t : d->val) ids.push_back(t.exam_id);
  d->recs = load_recordings(recordings_dir(c), ids);
  return d;
}

int run_train(const Command& c, int step, const std::vector<std::string>& argv) {
  const fs::path out = c.need("out");
  TrainConfig cfg = TrainConfig::for_step(step);
  cfg.apply_kv(c.kv);
  cfg.step = step;
  cfg.validate();
  const auto data = load_training_data(c);

  TrainResult res;
  if (step == 1) {
    ModelConfig mc;
    mc.apply_kv(c.kv);
    mc.validate();
    Model init(mc);
    init.init(cfg.seed);
    res = train_step1(init, data->train, data->val, data->lookup(), cfg, &std::cout);
  } else {
    const Model encoder = load_checkpoint(c.need("encoder"));
    ModelConfig mc = encoder.config();
    mc.apply_kv(c.kv);
    mc.validate();
    res = train_step2(encoder, mc, data->train, data->val, data->lookup(), cfg, &std::cout);
  }
  save_checkpoint(res.model, out);
  write_metric_log(res.log, out / "metrics.csv");
  Kv resolved = c.kv;
  for (const auto& [k, v] : cfg.to_kv()) resolved[k] = v;
  for (const auto& [k, v] : res.model.config().to_kv()) resolved[k] = v;
  write_manifest(manifest_for(out, true), step == 1 ? "train-encoder" : "train-head", resolved,
                 {{"seed", cfg.seed}}, argv);
  std::cout << "best epoch " << res.best_epoch << " validation AUROC " << res.best_auroc << '\n';
  return 0;
}

// ---------------------------------------------------------------- score

int run_score(const Command& c, const std::vector<std::string>& argv) {
  const Model model = load_checkpoint(c.need("checkpoint"));
  const auto labels = select_split(read_labels_jsonl(labels_path(c)), c.str("split", "test"));
  const auto agg = parse_aggregation(c.str("aggregation", "mean_logit"));
  const fs::path dir = recordings_dir(c);
  std::vector<double> score(labels.size()), enc(labels.size());
  std::vector<std::string> errors(labels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    try {
      const auto rec = normalize_duration(read_recording(dir / labels[i].exam_id));
      score[i] = score_recording(model, rec);
      enc[i] = encoder_recording_score(model, rec, agg);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!errors[i].empty()) throw Error(ErrorCode::Io, labels[i].exam_id + ": " + errors[i]);
  const fs::path out = c.need("out");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out);
  os.precision(17);
  os << "exam_id,score,encoder_score\n";
  for (std::size_t i = 0; i < labels.size(); ++i) os << labels[i].exam_id << ',' << score[i] << ',' << enc[i] << '\n';
  if (!os) throw Error(ErrorCode::Io, "cannot write " + out.string());
  write_manifest(manifest_for(out, false), "score", c.kv, json::object(), argv);
  std::cout << labels.size() << " recordings scored\n";
  return 0;
}

// ---------------------------------------------------------------- explain

int run_explain(const Command& c, const std::vector<std::string>& argv) {
  const Model model = load_checkpoint(c.need("checkpoint"));
  auto labels = select_split(read_labels_jsonl(labels_path(c)), c.str("split", "test"));
  if (c.str("select", "positives") == "positives") {
    std::erase_if(labels, [](const ExamLabel& l) { return l.label != HfClass::Hf; });
  } else if (c.str("select") != "all") {
    throw UsageError("--select must be positives or all");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptySplit, "no recordings selected");
  RolloutOptions ro;
  ro.discard_ratio = c.num("discard_ratio", 0.9);
  const auto bin_min = static_cast<int>(c.u64("bin_min", 10));
  const fs::path out = c.need("out");
  fs::create_directories(out / "profiles");
  const fs::path dir = recordings_dir(c);

  std::vector<AttentionProfile> profiles(labels.size());
  std::vector<BeatSet> beats(labels.size());
  std::vector<std::string> errors(labels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    try {
      const auto rec = normalize_duration(read_recording(dir / labels[i].exam_id));
      profiles[i] = grad_attention_rollout(model, rec, ro);
      beats[i] = extract_high_attention_beats(rec, profiles[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoBeatsFound) errors[i] = e.what();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!errors[i].empty()) throw Error(ErrorCode::Io, labels[i].exam_id + ": " + errors[i]);

  BeatSet all;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    write_profile_csv(profiles[i], out / "profiles" / (labels[i].exam_id + ".csv"));
    all.append(beats[i]);
  }
  const auto density = circadian_density(profiles, bin_min);
  write_density_csv(density, out / "density.csv");
  write_beats(all, out / "beats");

  json summary;
  summary["recordings"] = labels.size();
  summary["beats"] = all.count;
  summary["cover95"] = {{"begin_min", density.cover95.begin_min}, {"end_min", density.cover95.end_min},
                        {"mass", density.cover95.mass}};
  summary["cover99"] = {{"begin_min", density.cover99.begin_min}, {"end_min", density.cover99.end_min},
                        {"mass", density.cover99.mass}};
  ClusterOptions co;
  co.seed = c.u64("seed", 0);
  co.k_max = c.u64("k_max", co.k_max);
  co.min_cluster = c.u64("min_cluster", co.min_cluster);
  try {
    const auto clusters = cluster_beats(all.data, all.count, kBeatLen, co);
    write_clusters_json(clusters, out / "clusters.json");
    summary["clusters"] = clusters.clusters.size();
  } catch (const Error& e) {
    summary["clusters"] = nullptr;
    summary["cluster_error"] = e.what();
    std::cerr << "clustering skipped: " << e.what() << '\n';
  }
  write_json(summary, out / "explain.json");
  write_manifest(manifest_for(out, true), "explain", c.kv, {{"seed", co.seed}}, argv);
  std::cout << labels.size() << " profiles, " << all.count << " beats\n";
  return 0;
}

// ---------------------------------------------------------------- pcphf

int run_pcphf(const Command& c, const std::vector<std::string>& argv) {
  const auto table = load_coefficients(c.need("coefficients"));
  if (table.placeholder) std::cerr << "warning: coefficient file is marked as a placeholder\n";
  const fs::path data = c.need("data");
  const auto labels = select_split(read_labels_jsonl(labels_path(c)), c.str("split", "all"));
  const auto emr = load_emr(data);
  const fs::path dir = recordings_dir(c);
  const bool with_qrs = c.str("qrs", "measure") == "measure";

  std::vector<std::optional<double>> qrs(labels.size());
  if (with_qrs) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < labels.size(); ++i) {
      try {
        qrs[i] = measure_qrs(read_recording(dir / labels[i].exam_id));
      } catch (const Error&) {
        // left missing; reported through the MISSING field list
      }
    }
  }
  std::vector<PcphfScoreRow> rows;
  std::size_t scored = 0;
  static const PatientTimeline empty;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    const auto tl = emr.timelines.count(l.patient_id) ? emr.timelines.at(l.patient_id) : empty;
    const auto demo_it = emr.demographics.find(l.patient_id);
    const Demographics demo = demo_it != emr.demographics.end() ? demo_it->second : Demographics{};
    const auto in = assemble_pcphf_inputs(tl, demo, l.exam_date, qrs[i]);
    PcphfScoreRow row{l.exam_id, std::nullopt, in.missing()};
    if (demo_it == emr.demographics.end()) row.missing.insert(row.missing.begin(), "demographics");
    if (row.missing.empty()) {
      row.risk = pcphf_score(in, table);
      ++scored;
    }
    rows.push_back(std::move(row));
  }
  const fs::path out = c.need("out");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_pcphf_scores(rows, out);
  write_manifest(manifest_for(out, false), "pcphf", c.kv,
                 {{"coefficients_hash", table.hash}, {"placeholder", table.placeholder}}, argv);
  std::cout << scored << " of " << rows.size() << " exams scored\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct ScoredExam {
  ExamLabel label;
  double score;
};

std::vector<ScoredExam> join_scores(const fs::path& scores_path, const std::string& column,
                                    const std::vector<ExamLabel>& labels) {
  const auto t = CsvTable::read(scores_path);
  if (!t.has_column(column)) throw Error(ErrorCode::BadCsv, scores_path.string() + " has no column " + column);
  std::map<std::string, const ExamLabel*> by_id;
  for (const auto& l : labels) by_id[l.exam_id] = &l;
  std::vector<ScoredExam> out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto it = by_id.find(t.at(r, "exam_id"));
    if (it == by_id.end()) continue;
    const auto& v = t.at(r, column);
    if (v.empty() || v.rfind("MISSING", 0) == 0) continue;
    out.push_back({*it->second, std::stod(v)});
  }
  return out;
}

void write_km(const std::vector<KmStep>& km, const fs::path& path) {
  std::ofstream out(path);
  out.precision(12);
  out << "time,at_risk,events,censored,survival\n";
  for (const auto& s : km) out << s.time << ',' << s.at_risk << ',' << s.events << ',' << s.censored << ',' << s.survival << '\n';
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

int run_evaluate(const Command& c, const std::vector<std::string>& argv) {
  const auto labels = select_split(read_labels_jsonl(c.need("labels")), c.str("split", "test"));
  const auto scored = join_scores(c.need("scores"), c.str("score_column", "score"), labels);
  const fs::path out = c.need("out");
  fs::create_directories(out);

  std::vector<double> s;
  std::vector<int> y;
  std::vector<std::int32_t> days;
  for (const auto& e : scored) {
    s.push_back(e.score);
    y.push_back(e.label.label == HfClass::Hf ? 1 : 0);
    days.push_back(e.label.days_to_endpoint.value_or(0));
  }
  const auto n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  const auto n_neg = y.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::SingleClass, "evaluation set lacks one class");

  json report;
  report["n"] = y.size();
  report["n_pos"] = n_pos;
  report["auroc"] = auroc(s, y);

  {
    std::ofstream os(out / "roc.csv");
    os.precision(17);
    os << "threshold,fpr,tpr\n";
    for (const auto& p : roc_curve(s, y)) os << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  const auto pr = pr_curve(s, y);
  {
    std::ofstream os(out / "pr.csv");
    os.precision(17);
    os << "threshold,recall,precision\n";
    for (const auto& p : pr.points) os << p.threshold << ',' << p.recall << ',' << p.precision << '\n';
  }
  report["auprc"] = pr.auprc;

  const auto seed = c.u64("seed", 0);
  const auto iters = c.u64("bootstrap_iters", 1000);
  const auto bs = bootstrap_auroc(s, y, iters, c.u64("bootstrap_pos", 250), c.u64("bootstrap_neg", 250), seed);
  {
    std::ofstream os(out / "bootstrap.csv");
    os.precision(17);
    os << "iteration,auroc\n";
    for (std::size_t i = 0; i < bs.distribution.size(); ++i) os << i << ',' << bs.distribution[i] << '\n';
  }
  report["bootstrap"] = {{"iterations", iters}, {"mean", bs.mean}, {"ci_low", bs.ci_low}, {"ci_high", bs.ci_high}};

  const auto rg = risk_groups(s, y);
  report["t70"] = rg.t70;
  report["t90"] = rg.t90;

  const Date censor = Date::parse(c.str("censor_date", kInclusionEnd.iso()));
  const auto horizon = static_cast<std::int32_t>(c.u64("or_horizon_days", kFiveYearDays));
  std::map<RiskGroup, std::vector<SurvivalRow>> rows;
  std::map<RiskGroup, std::pair<std::size_t, std::size_t>> within;  // events, n
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const auto& l = scored[i].label;
    rows[rg.group[i]].push_back(survival_row(l.exam_date, l.endpoint_date, censor));
    auto& [ev, n] = within[rg.group[i]];
    ++n;
    ev += l.endpoint_date && (*l.endpoint_date - l.exam_date) <= horizon;
  }
  json groups = json::object();
  for (const auto g : {RiskGroup::Low, RiskGroup::Moderate, RiskGroup::High}) {
    const std::string name(to_string(g));
    const auto& r = rows[g];
    json jg;
    jg["n"] = r.size();
    if (!r.empty()) {
      write_km(kaplan_meier(r), out / ("km_" + name + ".csv"));
      double py = 0, ev = 0;
      for (const auto& row : r) {
        py += row.time / 365.25;
        ev += row.event;
      }
      jg["events"] = ev;
      jg["person_years"] = py;
      if (py > 0) {
        const auto inc = incidence_and_nns(py, ev);
        jg["rate_per_1000py"] = inc.rate_per_1000py;
        jg["nns"] = inc.nns;
      }
      jg["events_within_horizon"] = within[g].first;
    }
    groups[name] = jg;
  }
  report["groups"] = groups;
  report["or_horizon_days"] = horizon;

  json ors = json::object();
  const auto& low = within[RiskGroup::Low];
  for (const auto g : {RiskGroup::Moderate, RiskGroup::High}) {
    const auto& grp = within[g];
    if (grp.second == 0 || low.second == 0) continue;
    const auto r = odds_ratio(grp.first, grp.second, low.first, low.second);
    ors[std::string(to_string(g)) + "_vs_low"] = {{"value", r.value}, {"haldane", r.haldane}};
  }
  report["odds_ratios"] = ors;
  if (!rows[RiskGroup::High].empty() && !rows[RiskGroup::Low].empty()) {
    const auto lr = logrank(rows[RiskGroup::High], rows[RiskGroup::Low]);
    report["logrank_high_vs_low"] = {{"chi2", lr.chi2}, {"p", lr.p}};
  }

  const double thr = c.num("error_threshold", rg.t90);
  const auto eg = error_groups(s, y, days, thr);
  json bins = json::array();
  for (const auto& b : eg.bins) {
    bins.push_back({{"name", b.name}, {"n_pos", b.n_pos}, {"auroc", b.auroc ? json(*b.auroc) : json(nullptr)}});
  }
  report["error_groups"] = {{"threshold", thr}, {"tp", eg.tp.size()}, {"fp", eg.fp.size()},
                            {"tn", eg.tn.size()}, {"fn", eg.fn.size()}, {"bins", bins}};

  write_json(report, out / "report.json");
  write_manifest(manifest_for(out, true), "evaluate", c.kv, {{"seed", seed}}, argv);
  std::cout << std::fixed << std::setprecision(3) << "AUROC " << report["auroc"].get<double>() << " (95% CI "
            << bs.ci_low << "-" << bs.ci_high << "), AUPRC " << pr.auprc << '\n';
  return 0;
}

// ---------------------------------------------------------------- report

std::vector<double> read_bootstrap(const fs::path& path) {
  const auto t = CsvTable::read(path);
  std::vector<double> v;
  for (std::size_t r = 0; r < t.rows(); ++r) v.push_back(std::stod(t.at(r, "auroc")));
  return v;
}

int run_report(const Command& c, const std::vector<std::string>& argv) {
  // --eval name=dir, repeatable; or a comma list in the config file.
  std::vector<std::pair<std::string, fs::path>> runs;
  std::stringstream list(c.need("eval"));
  for (std::string item; std::getline(list, item, ',');) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) runs.emplace_back(fs::path(item).filename().string(), item);
    else runs.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  json summary = json::object();
  std::map<std::string, std::vector<double>> dists;
  for (const auto& [name, dir] : runs) {
    std::ifstream in(dir / "report.json");
    if (!in) throw Error(ErrorCode::Io, "cannot open " + (dir / "report.json").string());
    summary[name] = json::parse(in);
    dists[name] = read_bootstrap(dir / "bootstrap.csv");
  }
  json comparisons = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      const auto t = compare_models(dists[runs[i].first], dists[runs[j].first]);
      comparisons.push_back({{"a", runs[i].first}, {"b", runs[j].first}, {"t", t.t}, {"p", t.p}});
    }
  const fs::path out = c.need("out");
  fs::create_directories(out);
  json report{{"models", summary}, {"comparisons", comparisons}};
  write_json(report, out / "report.json");

  std::ofstream md(out / "report.md");
  md << std::fixed << std::setprecision(3);
  md << "| model | n | AUROC | 95% CI | AUPRC |\n|---|---|---|---|---|\n";
  for (const auto& [name, dir] : runs) {
    const auto& r = summary[name];
    md << "| " << name << " | " << r["n"].get<std::size_t>() << " | " << r["auroc"].get<double>() << " | "
       << r["bootstrap"]["ci_low"].get<double>() << "-" << r["bootstrap"]["ci_high"].get<double>() << " | "
       << r["auprc"].get<double>() << " |\n";
  }
  if (!comparisons.empty()) {
    md << "\n| a | b | t | p |\n|---|---|---|---|\n";
    for (const auto& cmp : comparisons)
      md << "| " << cmp["a"].get<std::string>() << " | " << cmp["b"].get<std::string>() << " | "
         << cmp["t"].get<double>() << " | " << std::scientific << cmp["p"].get<double>() << std::fixed << " |\n";
  }
  write_manifest(manifest_for(out, true), "report", c.kv, json::object(), argv);
  std::cout << "report written to " << (out / "report.md").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Holter ECG heart-failure risk pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  std::string config_path;
  app.add_option("--threads", threads, "Maximum worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--config", config_path, "key=value file supplying defaults for any option")
      ->check(CLI::ExistingFile);
  app.set_version_flag("--version", std::string(HHF_VERSION));

  std::map<std::string, Command> cmds;
  auto add = [&](const std::string& name, const std::string& desc) -> Command& {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, desc);
    c.app->add_option("--set", c.sets, "Extra key=value setting (repeatable)");
    return c;
  };

  {
    auto& c = add("synth", "Generate a labeled synthetic cohort (containers + EMR tables)");
    c.opt("--n", "Number of exams");
    c.opt("--seed", "Cohort seed");
    c.opt("--out", "Output directory");
    c.opt("--positive-fraction", "Share of exams with a planted HF outcome");
    c.opt("--test-fraction", "Share of exams dated in the test period");
    c.opt("--burst-rate", "PVC bursts per hour in future-HF recordings");
    c.opt("--negative-burst-rate", "PVC bursts per hour in the other recordings");
    c.opt("--af-prob", "Probability of an irregular-RR episode");
    c.opt("--noise-rms", "Additive noise, microvolts");
  }
  {
    auto& c = add("label", "Derive HF labels from EMR tables");
    c.opt("--data", "Directory with exams.csv and EMR CSVs");
    c.opt("--exams", "Exam list (default <data>/exams.csv)");
    c.opt("--out", "labels.jsonl path (default <data>/labels.jsonl)");
  }
  {
    auto& c = add("split", "Assign patient-disjoint train/validation/test splits");
    c.opt("--labels", "labels.jsonl to split");
    c.opt("--data", "Data directory (labels default to <data>/labels.jsonl)");
    c.opt("--val-frac", "Validation share of non-test exams (default 0.05)");
    c.opt("--seed", "Split seed");
    c.opt("--out", "Output path (default: overwrite --labels)");
  }
  for (const auto& [name, desc] : {std::pair<std::string, std::string>{"train-encoder", "Train the window encoder"},
                                   {"train-head", "Train the sequential head on a frozen encoder"}}) {
    auto& c = add(name, desc);
    c.opt("--data", "Data directory");
    c.opt("--labels", "Split labels (default <data>/labels.jsonl)");
    c.opt("--recordings", "Container directory (default <data>/recordings)");
    c.opt("--out", "Checkpoint directory");
    c.opt("--lr", "Learning rate");
    c.opt("--batch-size", "Batch size");
    c.opt("--patience", "Early-stopping patience, epochs");
    c.opt("--max-epochs", "Epoch cap (0: none)");
    c.opt("--seed", "Initialization and sampling seed");
    c.opt("--aggregation", "Window aggregation for validation: mean_logit, mean_prob or max");
    if (name == "train-head") c.opt("--encoder", "Encoder checkpoint directory");
  }
  {
    auto& c = add("score", "Score recordings with a checkpoint");
    c.opt("--checkpoint", "Checkpoint directory");
    c.opt("--data", "Data directory");
    c.opt("--labels", "Split labels (default <data>/labels.jsonl)");
    c.opt("--recordings", "Container directory (default <data>/recordings)");
    c.opt("--split", "train, validation, test or all (default test)");
    c.opt("--aggregation", "Encoder-only score aggregation (default mean_logit)");
    c.opt("--out", "scores.csv path");
  }
  {
    auto& c = add("explain", "Attention rollout, circadian density and beat clustering");
    c.opt("--checkpoint", "Checkpoint directory");
    c.opt("--data", "Data directory");
    c.opt("--labels", "Split labels (default <data>/labels.jsonl)");
    c.opt("--recordings", "Container directory (default <data>/recordings)");
    c.opt("--split", "train, validation, test or all (default test)");
    c.opt("--select", "positives or all (default positives)");
    c.opt("--discard-ratio", "Rollout discard ratio (default 0.9)");
    c.opt("--bin-min", "Circadian bin width, minutes (default 10)");
    c.opt("--k-max", "Largest k tried for beat clustering");
    c.opt("--min-cluster", "Smallest retained beat cluster");
    c.opt("--seed", "Clustering seed");
    c.opt("--out", "Output directory");
  }
  {
    auto& c = add("pcphf", "Clinical PCP-HF risk per exam");
    c.opt("--data", "Data directory with EMR CSVs");
    c.opt("--labels", "Labels (default <data>/labels.jsonl)");
    c.opt("--recordings", "Container directory (default <data>/recordings)");
    c.opt("--coefficients", "Coefficient file");
    c.opt("--split", "train, validation, test or all (default all)");
    c.opt("--qrs", "measure (from the recording) or none");
    c.opt("--out", "scores.csv path");
  }
  {
    auto& c = add("evaluate", "Discrimination, risk groups and survival for one score");
    c.opt("--scores", "scores.csv");
    c.opt("--labels", "labels.jsonl");
    c.opt("--score-column", "Column to evaluate (default score)");
    c.opt("--split", "train, validation, test or all (default test)");
    c.opt("--bootstrap-iters", "Bootstrap iterations (default 1000)");
    c.opt("--bootstrap-pos", "Positives drawn with replacement per iteration (default 250)");
    c.opt("--bootstrap-neg", "Negatives drawn with replacement per iteration (default 250)");
    c.opt("--seed", "Bootstrap seed");
    c.opt("--censor-date", "Administrative censoring date (default 2023-12-31)");
    c.opt("--or-horizon-days", "Event horizon for odds ratios (default 1826)");
    c.opt("--error-threshold", "Score threshold for error groups (default t90)");
    c.opt("--out", "Output directory");
  }
  {
    auto& c = add("report", "Combine evaluations and compare models");
    c.opt("--eval", "Comma list of name=evaluate-dir");
    c.opt("--out", "Output directory");
  }

  std::vector<std::string> args(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (threads > 0) omp_set_num_threads(threads);

  for (auto& [name, c] : cmds) {
    if (!c.app->parsed()) continue;
    try {
      if (!config_path.empty()) c.kv = read_kv_file(config_path);
      for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        c.kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
      }
      for (const auto& [k, v] : c.flags)
        if (!v.empty()) c.kv[k] = v;

      if (name == "synth") return run_synth(c, args);
      if (name == "label") return run_label(c, args);
      if (name == "split") return run_split(c, args);
      if (name == "train-encoder") return run_train(c, 1, args);
      if (name == "train-head") return run_train(c, 2, args);
      if (name == "score") return run_score(c, args);
      if (name == "explain") return run_explain(c, args);
      if (name == "pcphf") return run_pcphf(c, args);
      if (name == "evaluate") return run_evaluate(c, args);
      if (name == "report") return run_report(c, args);
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << "\n\n" << c.app->help();
      return 2;
    } catch (const Error& e) {
      std::cerr << json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}, {"subcommand", name}}.dump()
                << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << json{{"error", "Internal"}, {"message", e.what()}, {"subcommand", name}}.dump() << '\n';
      return 1;
    }
  }
  return 2;
}
