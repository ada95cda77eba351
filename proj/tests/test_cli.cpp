#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hhf/cohort.hpp"
#include "hhf/emr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "hhf_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run cli(const std::string& args) {
  const auto out = work() / "stdout.txt", err = work() / "stderr.txt";
  const std::string cmd = "cd '" + work().string() + "' && '" + HHF_CLI_PATH + "' " + args + " > '" + out.string() +
                          "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

const std::string kCoefficients = std::string(HHF_SOURCE_DIR) + "/data/pcphf_coefficients_placeholder.txt";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  const auto r = cli("synth --n 3 --bogus 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("bogus") != std::string::npos);
  const auto missing = cli("synth --n 3");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--out") != std::string::npos);
  CHECK(cli("synth --n three --out x").code == 2);
  CHECK(cli("evaluate --scores s.csv --labels l.jsonl --out e --split sideways").code != 0);
}

TEST_CASE("every subcommand documents its flags") {
  for (const char* sub : {"synth", "label", "split", "train-encoder", "train-head", "score", "explain", "pcphf",
                          "evaluate", "report"}) {
    const auto r = cli(std::string(sub) + " --help");
    CHECK(r.code == 0);
    CHECK(r.out.find("--out") != std::string::npos);
  }
  CHECK(cli("train-head --help").out.find("--encoder") != std::string::npos);
  CHECK(cli("evaluate --help").out.find("--or-horizon-days") != std::string::npos);
}

TEST_CASE("pipeline errors exit with 1 and a structured message") {
  const auto r = cli("evaluate --scores nope.csv --labels nope.jsonl --out e");
  CHECK(r.code == 1);
  const auto j = json::parse(r.err.substr(0, r.err.find('\n')));
  CHECK(j["error"] == "Io");
  CHECK(j["subcommand"] == "evaluate");
}

TEST_CASE("synth writes container pairs and a manifest; config values yield to flags") {
  REQUIRE(cli("synth --n 3 --seed 7 --out s1").code == 0);
  CHECK(count_ext(work() / "s1" / "recordings", ".hheader") == 3);
  CHECK(count_ext(work() / "s1" / "recordings", ".hsig") == 3);
  const auto m = read_json(work() / "s1" / "manifest.json");
  CHECK(m["subcommand"] == "synth");
  CHECK(m["seeds"]["seed"] == 7);
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(!m["version"].get<std::string>().empty());

  REQUIRE(cli("synth --n 3 --seed 7 --out s2").code == 0);
  CHECK(slurp(work() / "s1" / "recordings" / "E00001.hsig") == slurp(work() / "s2" / "recordings" / "E00001.hsig"));
  CHECK(slurp(work() / "s1" / "diagnoses.csv") == slurp(work() / "s2" / "diagnoses.csv"));
  CHECK(read_json(work() / "s2" / "manifest.json")["config_hash"] == m["config_hash"]);

  std::ofstream(work() / "synth.cfg") << "# defaults\nn = 4\nseed = 7\nout = s3\n";
  REQUIRE(cli("--config synth.cfg synth --n 2").code == 0);
  CHECK(count_ext(work() / "s3" / "recordings", ".hheader") == 2);
  REQUIRE(cli("--config synth.cfg --threads 1 synth --out s4").code == 0);
  CHECK(count_ext(work() / "s4" / "recordings", ".hheader") == 4);
}

TEST_CASE("the seven-command sequence runs end to end") {
  // Seed picked so the validation split holds both classes.
  REQUIRE(cli("synth --n 10 --seed 1 --test-fraction 0.3 --burst-rate 2 --out d").code == 0);
  REQUIRE(cli("label --data d").code == 0);
  REQUIRE(cli("split --data d --val-frac 0.4 --seed 1").code == 0);

  const auto labels = hhf::read_labels_jsonl(work() / "d" / "labels.jsonl");
  CHECK(labels.size() == 10);
  std::map<std::string, std::set<hhf::Split>> splits_of;
  std::map<hhf::Split, std::set<int>> classes;
  std::size_t n_test = 0;
  for (const auto& l : labels) {
    n_test += l.split == hhf::Split::Test;
    splits_of[l.patient_id].insert(l.split);
    classes[l.split].insert(static_cast<int>(l.label));
  }
  for (const auto& [p, s] : splits_of) CHECK(s.size() == 1);
  REQUIRE(classes[hhf::Split::Validation].size() == 2);
  REQUIRE(classes[hhf::Split::Test].size() == 2);

  std::ofstream(work() / "tiny.cfg") << "enc_filters=4\nenc_strides=8,4,4,6\nenc_hidden=8\nfeat_dim=6\ncls_hidden=5\n"
                                        "d_model=8\nn_heads=2\nn_layers=1\nff_dim=8\nhead_hidden=4\nseed=3\n";
  REQUIRE(cli("--config tiny.cfg train-encoder --data d --max-epochs 1 --out enc").code == 0);
  CHECK(fs::exists(work() / "enc" / "manifest.txt"));
  CHECK(fs::exists(work() / "enc" / "params.f32"));
  CHECK(slurp(work() / "enc" / "metrics.csv").rfind("epoch,train_loss,val_auroc,is_best", 0) == 0);
  const auto em = read_json(work() / "enc" / "manifest.json");
  CHECK(em["config"]["enc_filters"] == "4");
  CHECK(em["config"]["lr"] == "0.001");

  REQUIRE(cli("--config tiny.cfg train-head --data d --encoder enc --max-epochs 2 --batch-size 2 --out full").code == 0);
  CHECK(read_json(work() / "full" / "manifest.json")["config"]["step"] == "2");

  REQUIRE(cli("score --data d --checkpoint full --out scores.csv").code == 0);
  const auto scores = hhf::CsvTable::read(work() / "scores.csv");
  CHECK(scores.rows() == n_test);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const double p = std::stod(scores.at(r, "score"));
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  REQUIRE(cli("score --data d --checkpoint full --out scores2.csv").code == 0);
  CHECK(slurp(work() / "scores.csv") == slurp(work() / "scores2.csv"));

  REQUIRE(cli("evaluate --scores scores.csv --labels d/labels.jsonl --bootstrap-iters 50 --out ev").code == 0);
  for (const char* f : {"roc.csv", "pr.csv", "bootstrap.csv", "report.json", "manifest.json"})
    CHECK(fs::exists(work() / "ev" / f));
  const auto rep = read_json(work() / "ev" / "report.json");
  CHECK(rep["n"] == n_test);
  CHECK(rep["auroc"].get<double>() >= 0.0);
  CHECK(rep["bootstrap"]["iterations"] == 50);
  CHECK(rep.contains("t70"));
  CHECK(rep.contains("groups"));
  bool any_km = false;
  for (const char* g : {"low", "moderate", "high"}) any_km |= fs::exists(work() / "ev" / ("km_" + std::string(g) + ".csv"));
  CHECK(any_km);

  REQUIRE(cli("explain --data d --checkpoint full --out ex").code == 0);
  CHECK(fs::exists(work() / "ex" / "density.csv"));
  CHECK(fs::exists(work() / "ex" / "explain.json"));
  CHECK(count_ext(work() / "ex" / "profiles", ".csv") >= 1);

  REQUIRE(cli("pcphf --data d --coefficients '" + kCoefficients + "' --out pcphf.csv").code == 0);
  const auto pc = hhf::CsvTable::read(work() / "pcphf.csv");
  CHECK(pc.rows() == 10);
  CHECK(read_json(work() / "pcphf.csv.manifest.json")["seeds"]["placeholder"] == true);

  REQUIRE(cli("evaluate --scores pcphf.csv --score-column pcphf_risk --labels d/labels.jsonl --split all "
              "--bootstrap-iters 50 --out evp")
              .code == 0);
  REQUIRE(cli("report --eval deephhf=ev,pcphf=evp --out rep").code == 0);
  const auto combined = read_json(work() / "rep" / "report.json");
  CHECK(combined["models"].contains("deephhf"));
  CHECK(combined["comparisons"].size() == 1);
  CHECK(slurp(work() / "rep" / "report.md").find("| deephhf |") != std::string::npos);
}
