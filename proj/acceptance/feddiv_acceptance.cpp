// Acceptance suite. Run with no arguments for every criterion, or with
// criterion numbers (1-9). Prints one PASS/FAIL line per criterion and exits
// non-zero if any selected criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "feddiv/arch/arch.hpp"
#include "feddiv/data/synthetic.hpp"
#include "feddiv/fed/federation.hpp"
#include "feddiv/harness/harness.hpp"
#include "feddiv/lab/lab.hpp"
#include "support/gradcheck.hpp"
#include "support/random_models.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace feddiv;

namespace {

// Tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr int kGradInstances = 20;
constexpr double kHomogeneityRelTol = 1e-12;
constexpr double kIdentityRelTol = 1e-9;
constexpr double kCrossSigmas = 3.0;
constexpr double kGrowthRelTol = 0.02;
constexpr double kProbeSigma = 0.1;
constexpr std::size_t kProbeSamples = 1000;
constexpr int kSeedsRequired = 2;  // of 3

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path work_root() {
  if (const char* env = std::getenv("FEDDIV_ACCEPTANCE_DIR")) return env;
  return FEDDIV_ACCEPTANCE_WORK;
}

fs::path mnist_dir() { return fs::path(FEDDIV_DATA_DIR) / "mnist5k"; }

bool have_mnist() {
  return fs::exists(mnist_dir() / "train-images-idx3-ubyte.gz") && fs::exists(mnist_dir() / "test-images-idx3-ubyte.gz");
}

json mnist_dataset() {
  const auto d = mnist_dir();
  return {{"source", "idx"},
          {"train_images", (d / "train-images-idx3-ubyte.gz").string()},
          {"train_labels", (d / "train-labels-idx1-ubyte.gz").string()},
          {"test_images", (d / "test-images-idx3-ubyte.gz").string()},
          {"test_labels", (d / "test-labels-idx1-ubyte.gz").string()}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  double worst = 0.0;
  std::string where;
  int checked = 0;
  for (const auto family : testing::all_families()) {
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(family)));
    for (int i = 0; i < kGradInstances; ++i) {
      const auto spec = testing::random_spec(family, rng);
      const auto params = testing::random_params(spec, rng);
      const auto x = testing::random_batch(spec, 3, rng);
      const auto labels = testing::random_labels(spec, 3, rng);
      const auto r = testing::check_gradients(spec, params, x, labels);
      ++checked;
      if (r.worst_relative_error >= worst) {
        worst = r.worst_relative_error;
        where = std::string(testing::family_name(family)) + " #" + std::to_string(i) + " " + r.worst_tensor;
      }
    }
  }
  return {worst < kGradRelTol,
          std::to_string(checked) + " instances, worst relative error " + fmt(worst) + " (" + where + "), tolerance " +
              fmt(kGradRelTol)};
}

// ---------------------------------------------------------------------------

Outcome fedavg_equivalence() {
  data::SyntheticSpec s;
  s.class_count = 10;
  s.image_shape = {1, 8, 8};
  s.samples_per_class = 100;
  s.noise_std = 0.3;
  const auto train = data::generate_synthetic(s, 11);
  const auto test = data::generate_synthetic(s, 12);
  arch::CnnBuildConfig cnn;
  cnn.depth_blocks = 2;
  cnn.width_multiplier = 0.125;
  cnn.input_shape = {1, 8, 8};
  const auto spec = arch::build_cnn(cnn);

  fed::FederationConfig fc;
  fc.n_clients = 1;
  fc.local_epochs = 1;
  fc.rounds = 3;
  fc.lr = 0.05;
  fc.batch_size = 32;
  fc.seed = 7;
  std::vector<nn::ParameterSet> fed_traj;
  fed::run_federation(fc, spec, train, test, data::partition_iid(train, 1, derive_seed(fc.seed, 0, 1)), {},
                      [&](int, const nn::ParameterSet& g, std::span<const nn::ParameterSet>) { fed_traj.push_back(g); });

  fed::CentralizedConfig cc;
  cc.epochs = 3;
  cc.lr = fc.lr;
  cc.batch_size = fc.batch_size;
  cc.seed = fc.seed;
  std::vector<nn::ParameterSet> cl_traj;
  fed::run_centralized(spec, train, test, cc, {}, [&](int epoch, const nn::ParameterSet& p) {
    if (epoch > 0) cl_traj.push_back(p);
  });

  std::size_t differing = 0, total = 0;
  bool moved = false;
  const auto init = nn::init_params<double>(spec, fc.seed);
  for (std::size_t t = 0; t < std::min(fed_traj.size(), cl_traj.size()); ++t) {
    std::vector<double> a, b;
    for (const auto& [layer, entries] : fed_traj[t].layers()) {
      const auto fa = nn::flatten_layer_params(fed_traj[t], layer);
      const auto fb = nn::flatten_layer_params(cl_traj[t], layer);
      a.insert(a.end(), fa.begin(), fa.end());
      b.insert(b.end(), fb.begin(), fb.end());
    }
    total += a.size();
    for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j) differing += a[j] != b[j];
    differing += a.size() != b.size();
    moved = moved || fed_traj[t] != init;
  }
  const bool pass = fed_traj.size() == 3 && cl_traj.size() == 3 && differing == 0 && moved;
  return {pass, std::to_string(train.size()) + " samples, " + std::to_string(fed_traj.size()) + " epochs, " +
                    std::to_string(differing) + " of " + std::to_string(total) + " parameter values differ"};
}

// ---------------------------------------------------------------------------

nn::ParameterSet random_client(const nn::ModelSpec& spec, Rng& rng) {
  auto p = nn::init_params<double>(spec, rng.next_u64());
  for (auto& [layer, entries] : p.layers())
    for (auto& e : entries)
      for (auto& v : e.tensor.values()) v = rng.uniform(-1.0, 1.0);
  return p;
}

Outcome divergence_suite() {
  std::vector<std::string> failures;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // N = 2, d = 1: values 0 and 2 around mean 1.
  std::vector<nn::ParameterSet> pair(2);
  pair[0].layers()[0].push_back({"weight", Tensor({1}, 0.0)});
  pair[1].layers()[0].push_back({"weight", Tensor({1}, 2.0)});
  require(fed::layer_divergence(pair, 0) == 1.0, "hand case");

  const nn::ModelSpec spec{{1, 6, 6},
                           {{"conv", nn::Conv2dLayer::same(1, 3, 3)},
                            {"relu", nn::ReluLayer{}},
                            {"flat", nn::FlattenLayer{}},
                            {"fc", nn::DenseLayer{108, 3}}},
                           3};
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(7);
    std::vector<nn::ParameterSet> clients;
    for (std::size_t i = 0; i < n; ++i) clients.push_back(random_client(spec, rng));
    const auto base = fed::all_layer_divergences(clients);
    for (const auto& [layer, div] : base) require(div >= 0.0, "non-negativity");

    auto shuffled = clients;
    rng.shuffle(shuffled.begin(), shuffled.end());
    require(fed::all_layer_divergences(shuffled) == base, "permutation invariance");

    for (double k : {-2.0, 0.0, 0.25, 3.0, 10.0}) {
      auto scaled = clients;
      for (auto& c : scaled)
        for (auto& [layer, entries] : c.layers())
          for (auto& e : entries)
            for (auto& v : e.tensor.values()) v *= k;
      for (const auto& [layer, div] : fed::all_layer_divergences(scaled))
        require(std::abs(div - std::abs(k) * base.at(layer)) <= kHomogeneityRelTol * std::abs(k) * base.at(layer),
                "homogeneity");
    }

    std::vector<nn::ParameterSet> equal(n, clients[0]);
    for (const auto& [layer, div] : fed::all_layer_divergences(equal)) require(div == 0.0, "zero when equal");
    if (n >= 2) {
      auto nudged = equal;
      const std::size_t who = rng.uniform_index(n);
      auto& t = nudged[who].layer(3)[0].tensor;
      t[rng.uniform_index(t.size())] += 1e-6;
      const auto div = fed::all_layer_divergences(nudged);
      require(div.at(3) > 0.0, "non-zero when unequal");
      require(div.at(0) == 0.0, "zero when equal");
    }
  }
  std::set<std::string> unique(failures.begin(), failures.end());
  std::string detail = unique.empty() ? "hand case 1, 50 random trials" : "violated:";
  for (const auto& f : unique) detail += " " + f;
  return {unique.empty(), detail};
}

// ---------------------------------------------------------------------------

json theorem_config(const std::string& id, const std::string& weights, const std::string& activation) {
  return {{"experiment_id", id},
          {"kind", "theorem_check"},
          {"theorem",
           {{"in_width", 32},
            {"hidden_width", 32},
            {"out_width", 32},
            {"n_samples", 10000},
            {"noise_std_upstream", 0.1},
            {"noise_std_input", 0.1},
            {"seed", 0},
            {"weight_mode", weights},
            {"activation", activation}}}};
}

json with_output(json config, const fs::path& root, std::size_t workers, const char* block) {
  config["output"] = {{"directory", root.string()}};
  config[block]["workers"] = workers;
  return config;
}

Outcome theorem_check() {
  const auto root = work_root() / "criterion4";
  bool pass = true;
  std::string detail;
  for (const auto& [w, a] : std::vector<std::pair<std::string, std::string>>{{"orthogonal", "linear"},
                                                                              {"random", "relu"}}) {
    const auto dir =
        harness::run(harness::config_from_json(with_output(theorem_config(w + "_" + a, w, a), root, 1, "theorem")));
    const auto st = read_json(dir / "summary.json")["statistics"];
    const double id_err = st["max_identity_rel_error"];
    const double cross = st["mean_cross"], se = st["cross_stderr"];
    const bool a_ok = id_err <= kIdentityRelTol;
    const bool b_ok = std::abs(cross) <= kCrossSigmas * se;
    pass = pass && a_ok && b_ok;
    detail += w + "/" + a + ": identity " + fmt(id_err) + (a_ok ? " ok" : " FAIL") + ", cross " + fmt(cross) +
              " vs 3se " + fmt(kCrossSigmas * se) + (b_ok ? " ok" : " FAIL");
    if (w == "orthogonal") {
      const double eps = st["mean_eps_sq"], eps_prev = st["mean_eps_prev_sq"], t2 = st["mean_t2_sq"];
      const double growth = eps_prev - eps;
      const double rel = std::abs(growth - t2) / t2;
      const bool c_ok = rel <= kGrowthRelTol && eps_prev >= eps;
      pass = pass && c_ok;
      detail += ", growth " + fmt(growth) + " vs T2 " + fmt(t2) + " (rel " + fmt(rel) + ")" + (c_ok ? " ok" : " FAIL");
    }
    detail += "; ";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------

json probe_config(const std::vector<std::uint64_t>& seeds) {
  return {{"experiment_id", "probe_scan"},
          {"kind", "divergence_scan"},
          {"dataset", mnist_dataset()},
          {"probe", {{"sigma", kProbeSigma}, {"n_samples", kProbeSamples}, {"seeds", seeds}}}};
}

Outcome accumulation() {
  if (!have_mnist()) return {false, "MNIST subset not found under " + mnist_dir().string()};
  const auto dir = harness::run(harness::config_from_json(with_output(probe_config(kSeeds), work_root() / "criterion5", 1, "probe")));
  const auto s = read_json(dir / "summary.json");
  const auto rho = s["deep"]["gaussian_noise"]["spearman"].get<std::vector<double>>();
  int negative = 0, shallow_below = 0;
  std::string detail = "deep rho:";
  for (double r : rho) {
    negative += r < 0.0;
    detail += " " + fmt(r);
  }
  detail += "; first layer shallow/deep:";
  for (const auto& f : s["first_layer_gaussian_noise"]) {
    const double sh = f["shallow"], dp = f["deep"];
    shallow_below += sh < dp;
    detail += " " + fmt(sh) + "/" + fmt(dp);
  }
  const bool a_ok = negative == static_cast<int>(kSeeds.size());
  const bool b_ok = shallow_below >= kSeedsRequired;
  detail += "; (a) " + std::string(a_ok ? "ok" : "FAIL") + " " + std::to_string(negative) + "/3 negative, (b) " +
            (b_ok ? "ok" : "FAIL") + " " + std::to_string(shallow_below) + "/3";
  return {a_ok && b_ok, detail};
}

// ---------------------------------------------------------------------------

// Desk-scale CNN on the MNIST subset at 14x14.
json sweep_config(const std::string& id, std::uint64_t seed, const json& sweep) {
  json dataset = have_mnist() ? mnist_dataset()
                              : json{{"synthetic", {{"image_shape", {1, 14, 14}}, {"samples_per_class", 400}}}};
  return {{"experiment_id", id},
          {"kind", "sweep"},
          {"dataset", dataset},
          {"model", {{"cnn", {{"depth_blocks", 2}, {"width_multiplier", 0.25}, {"input_shape", {1, 14, 14}}}}}},
          {"federation", {{"n_clients", 5}, {"local_epochs", 4}, {"rounds", 20}, {"seed", seed}}},
          {"sweep", sweep}};
}

std::vector<fs::path> run_dirs(const fs::path& sweep_dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(sweep_dir))
    if (e.is_directory()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

json width_sweep(std::uint64_t seed) { return sweep_config("width_seed" + std::to_string(seed), seed, {{"axis", "width"}, {"values", {1, 2}}}); }

json depth_sweep(std::uint64_t seed) {
  return sweep_config("depth_seed" + std::to_string(seed), seed,
                      {{"axis", "depth"}, {"values", {2, 4}}, {"runs", {"fed_run", "centralized_run"}}});
}

Outcome width_trend() {
  int good = 0;
  std::string detail = have_mnist() ? "" : "synthetic data; ";
  for (auto seed : kSeeds) {
    const auto dir = harness::run(harness::config_from_json(with_output(width_sweep(seed), work_root() / "criterion6", 1, "federation")));
    const auto c = harness::compare_sweep(run_dirs(dir));
    const auto& w1 = c.rows.at(0);
    const auto& w2 = c.rows.at(1);
    const bool ok = w2.mean_divergence < w1.mean_divergence && w2.best_accuracy >= w1.best_accuracy;
    good += ok;
    detail += "seed " + std::to_string(seed) + ": div " + fmt(w1.mean_divergence) + " -> " + fmt(w2.mean_divergence) +
              ", acc " + fmt(w1.best_accuracy) + " -> " + fmt(w2.best_accuracy) + (ok ? " ok" : " no") + "; ";
  }
  detail += std::to_string(good) + "/3 seeds";
  return {good >= kSeedsRequired, detail};
}

Outcome depth_trend() {
  int good = 0;
  std::string detail = have_mnist() ? "" : "synthetic data; ";
  for (auto seed : kSeeds) {
    const auto dir = harness::run(harness::config_from_json(with_output(depth_sweep(seed), work_root() / "criterion7", 1, "federation")));
    const auto c = harness::compare_sweep(run_dirs(dir));
    const auto& d2 = c.rows.at(0);
    const auto& d4 = c.rows.at(1);
    const bool ok = d2.relative_degradation && d4.relative_degradation &&
                    *d4.relative_degradation > *d2.relative_degradation;
    good += ok;
    detail += "seed " + std::to_string(seed) + ": degradation " + fmt(d2.relative_degradation.value_or(NAN)) + " -> " +
              fmt(d4.relative_degradation.value_or(NAN)) + " (CL " + fmt(d2.cl_best_accuracy.value_or(NAN)) + "/" +
              fmt(d4.cl_best_accuracy.value_or(NAN)) + ", FL " + fmt(d2.best_accuracy) + "/" + fmt(d4.best_accuracy) +
              ")" + (ok ? " ok" : " no") + "; ";
  }
  detail += std::to_string(good) + "/3 seeds";
  return {good >= kSeedsRequired, detail};
}

// ---------------------------------------------------------------------------

nn::ModelSpec parse_spec(const std::string& text) { return arch::model_spec_from_json(json::parse(text)); }

Outcome receptive_fields() {
  struct Case {
    std::string name;
    std::string spec;
    std::vector<long long> expected;
    std::optional<int> terminated_by;
  };
  // Expected values worked by hand from l_k = l_{k-1} + (K_k - 1) * prod_{i<k} s_i.
  const std::vector<Case> cases = {
      // 1 + 2 = 3; 3 + 2 = 5
      {"two 3x3 convs",
       R"({"input_shape": [1, 16, 16], "layers": [
           {"kind": "conv2d", "in_ch": 1, "out_ch": 2, "kernel": 3},
           {"kind": "conv2d", "in_ch": 2, "out_ch": 2, "kernel": 3}]})",
       {3, 5},
       std::nullopt},
      // 1 + 6 = 7; relu 7; pool 7 + 2*2 = 11; 11 + 2*4 = 19; 19 + 2*4 = 27
      {"7x7/2 stem, 3x3/2 pool, two 3x3 convs",
       R"({"input_shape": [1, 32, 32], "layers": [
           {"kind": "conv2d", "in_ch": 1, "out_ch": 2, "kernel": 7, "stride": 2, "padding": 3},
           {"kind": "relu"},
           {"kind": "maxpool2d", "kernel": 3, "stride": 2},
           {"kind": "conv2d", "in_ch": 2, "out_ch": 2, "kernel": 3},
           {"kind": "conv2d", "in_ch": 2, "out_ch": 2, "kernel": 3}]})",
       {7, 7, 11, 19, 27},
       std::nullopt},
      // 3; 3 + 2*2 = 7; 7 + 2*4 = 15
      {"three strided 3x3 convs",
       R"({"input_shape": [1, 32, 32], "layers": [
           {"kind": "conv2d", "in_ch": 1, "out_ch": 2, "kernel": 3, "stride": 2},
           {"kind": "conv2d", "in_ch": 2, "out_ch": 2, "kernel": 3, "stride": 2},
           {"kind": "conv2d", "in_ch": 2, "out_ch": 2, "kernel": 3, "stride": 2}]})",
       {3, 7, 15},
       std::nullopt},
      // 3; block K = 3 + 2*2 = 7: 3 + 6 = 9; block K = 5 at cumulative stride 2: 9 + 4*2 = 17; gap ends the chain
      {"stem and two residual blocks",
       R"({"input_shape": [1, 16, 16], "num_classes": 2, "layers": [
           {"kind": "conv2d", "in_ch": 1, "out_ch": 4, "kernel": 3},
           {"kind": "residual_block", "in_ch": 4, "out_ch": 8, "stride": 2},
           {"kind": "residual_block", "in_ch": 8, "out_ch": 8, "stride": 1},
           {"kind": "global_avg_pool"},
           {"kind": "dense", "in_dim": 8, "out_dim": 2}]})",
       {3, 9, 17},
       3},
      // 5; 5 + 1 = 6; 6 + 2*2 = 10; flatten ends the chain
      {"5x5 conv, 2x2 pool, 3x3 conv, flatten head",
       R"({"input_shape": [1, 12, 12], "num_classes": 3, "layers": [
           {"kind": "conv2d", "in_ch": 1, "out_ch": 2, "kernel": 5},
           {"kind": "maxpool2d", "kernel": 2, "stride": 2},
           {"kind": "conv2d", "in_ch": 2, "out_ch": 2, "kernel": 3},
           {"kind": "flatten"},
           {"kind": "dense", "in_dim": 72, "out_dim": 3}]})",
       {5, 6, 10},
       3},
  };
  int matched = 0;
  std::string detail;
  for (const auto& c : cases) {
    const auto report = arch::receptive_field(parse_spec(c.spec));
    const bool ok = report.values() == c.expected && report.terminated_by == c.terminated_by;
    matched += ok;
    if (!ok) detail += "mismatch in '" + c.name + "'; ";
  }

  int stem_checks = 0, stem_ok = 0;
  for (int depth = 1; depth <= 4; ++depth)
    for (bool pool : {false, true})
      for (bool residual : {false, true}) {
        arch::CnnBuildConfig cfg;
        cfg.depth_blocks = depth;
        cfg.use_stem_maxpool = pool;
        cfg.residual = residual;
        cfg.width_multiplier = 0.125;
        cfg.input_shape = {3, 64, 64};
        cfg.stem_kernel = 7;
        const auto big = arch::receptive_field(arch::build_cnn(cfg));
        cfg.stem_kernel = 3;
        const auto small = arch::receptive_field(arch::build_cnn(cfg));
        std::map<std::string, long long> big_by_name;
        for (const auto& r : big.rows) big_by_name[r.name] = r.receptive_field;
        bool ok = big.rows.size() == small.rows.size();
        for (const auto& r : small.rows) ok = ok && big_by_name.count(r.name) && r.receptive_field < big_by_name[r.name];
        ++stem_checks;
        stem_ok += ok;
      }
  detail += std::to_string(matched) + "/5 specs match, stem substitution holds in " + std::to_string(stem_ok) + "/" +
            std::to_string(stem_checks) + " architectures";
  return {matched == 5 && stem_ok == stem_checks, detail};
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

Outcome determinism() {
  struct Job {
    std::string label;
    json config;
    const char* workers_block;
  };
  std::vector<Job> jobs;
  jobs.push_back({"theorem", theorem_config("theorem", "orthogonal", "linear"), "theorem"});
  auto fed = depth_sweep(kSeeds[0]);
  fed["federation"]["rounds"] = 3;
  jobs.push_back({"fed/centralized sweep", fed, "federation"});
  if (have_mnist()) jobs.push_back({"probe scan", probe_config({kSeeds[0]}), "probe"});
  jobs.push_back({"receptive field",
                  {{"experiment_id", "rf"},
                   {"kind", "rf_calc"},
                   {"model", {{"cnn", {{"depth_blocks", 3}, {"input_shape", {1, 28, 28}}}}}}},
                  "federation"});

  bool pass = true;
  std::string detail;
  for (const auto& job : jobs) {
    std::vector<std::map<std::string, std::string>> outputs;
    for (std::size_t workers : {1u, 3u}) {
      const auto root = work_root() / "criterion9" / ("workers" + std::to_string(workers));
      const auto dir = harness::run(harness::config_from_json(with_output(job.config, root, workers, job.workers_block)));
      outputs.push_back(csv_files(dir));
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
    pass = pass && same;
    detail += job.label + " (" + std::to_string(outputs[0].size()) + " csv) " + (same ? "identical" : "DIFFERENT") + "; ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  ::unsetenv("FEDDIV_OUTPUT_ROOT");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"degenerate FedAvg equivalence", fedavg_equivalence},
      {"divergence metric suite", divergence_suite},
      {"gradient divergence decomposition", theorem_check},
      {"divergence accumulation", accumulation},
      {"width trend", width_trend},
      {"depth degradation trend", depth_trend},
      {"receptive field calculator", receptive_fields},
      {"end-to-end determinism", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "'\n";
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty()) {
    selected.resize(criteria.size());
    std::iota(selected.begin(), selected.end(), 1);
  }
  bool all = true;
  for (int n : selected) {
    const auto& [name, fn] = criteria[static_cast<std::size_t>(n - 1)];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (o.detail.size() >= 2 && o.detail.ends_with("; ")) o.detail.resize(o.detail.size() - 2);
    all = all && o.pass;
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
