#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "feddiv/data/partition.hpp"
#include "feddiv/harness/harness.hpp"
#include "feddiv/rng.hpp"
#include "feddiv/stats.hpp"

namespace feddiv::harness {
namespace {

using nlohmann::json;

bool wants(const ExperimentConfig& c, const char* format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) != c.output.formats.end();
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string(), path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed", path.string());
}

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string(), path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("write failed", path.string());
}

json base_summary(const ExperimentConfig& c) {
  json s = {{"experiment_id", c.experiment_id}, {"kind", run_kind_name(c.kind)}};
  if (c.variant) s["variant"] = {{"axis", sweep_axis_name(c.variant->axis)}, {"value", c.variant->value}};
  return s;
}

json fed_run(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto spec = resolve_model(c);
  const auto [train, test] = load_datasets(c, spec.input_shape);
  const auto partition = data::partition_iid(train, c.federation.n_clients, derive_seed(c.federation.seed, 0, 1));
  const auto records = fed::run_federation(c.federation, spec, train, test, partition, c.dataset.augmentation);
  if (wants(c, "csv")) write_fed_metrics(dir / "metrics.csv", c.experiment_id, spec, records);
  json s = base_summary(c);
  s["rounds"] = records.size();
  s["best_accuracy"] = best_accuracy(records);
  s["final_accuracy"] = records.back().test_accuracy.value_or(0.0);
  s["mean_divergence"] = mean_divergence(records);
  s["final_mean_divergence"] = records.back().mean_divergence;
  s["accuracy_threshold"] = c.accuracy_threshold;
  const auto reached = rounds_to_threshold(records, c.accuracy_threshold);
  s["rounds_to_threshold"] = reached ? json(*reached) : json(nullptr);
  return s;
}

json centralized_run(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto spec = resolve_model(c);
  const auto [train, test] = load_datasets(c, spec.input_shape);
  fed::CentralizedConfig cc;
  cc.epochs = *c.centralized.epochs;
  cc.lr = *c.centralized.lr;
  cc.batch_size = *c.centralized.batch_size;
  cc.seed = c.federation.seed;
  cc.init = c.federation.init;
  cc.precision = c.federation.precision;
  const auto records = fed::run_centralized(spec, train, test, cc, c.dataset.augmentation);
  if (wants(c, "csv")) write_centralized_metrics(dir / "metrics.csv", c.experiment_id, records);
  double best = 0.0;
  for (std::size_t i = 1; i < records.size(); ++i) best = std::max(best, records[i].test_accuracy);
  json s = base_summary(c);
  s["epochs"] = cc.epochs;
  s["best_accuracy"] = best;
  s["final_accuracy"] = records.back().test_accuracy;
  return s;
}

json divergence_scan(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto [shallow, deep] = arch::build_probe_cnns();
  const auto [train, test] = load_datasets(c, deep.input_shape);
  const auto report = lab::run_accumulation_experiment(deep, shallow, train, c.probe);
  std::vector<std::string> lines{
      "experiment_id,model,probe,seed,layer_index,layer_name,divergence,log_divergence,sample_count"};
  json s = base_summary(c);
  for (const auto* m : {&report.shallow, &report.deep}) {
    json model;
    for (const auto* profiles : {&m->noise, &m->same_class}) {
      for (std::size_t i = 0; i < profiles->size(); ++i)
        for (const auto& l : (*profiles)[i].layers)
          lines.push_back(c.experiment_id + ',' + m->model + ',' + lab::probe_kind_name((*profiles)[i].probe) + ',' +
                          std::to_string(c.probe.seeds[i]) + ',' + std::to_string(l.layer_index) + ',' +
                          l.layer_name + ',' + real(l.divergence) + ',' + real(std::log(l.divergence)) + ',' +
                          std::to_string(l.sample_count));
      json bands = json::array();
      for (const auto& b : lab::log_bands(*profiles))
        bands.push_back({{"layer_index", b.layer_index},
                         {"layer_name", b.layer_name},
                         {"log_min", b.log_min},
                         {"log_mean", b.log_mean},
                         {"log_max", b.log_max}});
      model[lab::probe_kind_name(profiles->front().probe)] = {{"log_bands", bands}};
    }
    model["gaussian_noise"]["spearman"] = m->noise_spearman;
    model["same_class"]["spearman"] = m->class_spearman;
    s[m->model] = model;
  }
  json first_layer = json::array();
  for (std::size_t i = 0; i < c.probe.seeds.size(); ++i)
    first_layer.push_back({{"seed", c.probe.seeds[i]},
                           {"shallow", report.shallow.noise[i].layers.front().divergence},
                           {"deep", report.deep.noise[i].layers.front().divergence}});
  s["first_layer_gaussian_noise"] = first_layer;
  if (wants(c, "csv")) write_lines(dir / "metrics.csv", lines);
  return s;
}

json theorem_check(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto r = lab::theorem1_decomposition_check(c.theorem);
  if (wants(c, "csv"))
    write_lines(dir / "metrics.csv",
                {"experiment_id,mean_eps_sq,mean_eps_prev_sq,mean_t1_sq,mean_t2_sq,mean_cross,cross_stderr,"
                 "max_identity_rel_error",
                 c.experiment_id + ',' + real(r.mean_eps_sq) + ',' + real(r.mean_eps_prev_sq) + ',' +
                     real(r.mean_t1_sq) + ',' + real(r.mean_t2_sq) + ',' + real(r.mean_cross) + ',' +
                     real(r.cross_stderr) + ',' + real(r.max_identity_rel_error)});
  json s = base_summary(c);
  s["statistics"] = {{"mean_eps_sq", r.mean_eps_sq},     {"mean_eps_prev_sq", r.mean_eps_prev_sq},
                     {"mean_t1_sq", r.mean_t1_sq},       {"mean_t2_sq", r.mean_t2_sq},
                     {"mean_cross", r.mean_cross},       {"cross_stderr", r.cross_stderr},
                     {"max_identity_rel_error", r.max_identity_rel_error}};
  s["verdicts"] = {{"identity_holds", r.identity_holds},
                   {"cross_vanishes", r.cross_vanishes},
                   {"additive", r.additive},
                   {"isometric", r.isometric},
                   {"growth_matches_t2", r.growth_matches_t2},
                   {"no_smaller", r.no_smaller}};
  return s;
}

json rf_calc(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto report = arch::receptive_field(resolve_model(c));
  std::vector<std::string> lines{"experiment_id,layer_index,layer_name,kind,kernel,stride,cumulative_stride,receptive_field"};
  for (const auto& r : report.rows)
    lines.push_back(c.experiment_id + ',' + std::to_string(r.layer_index) + ',' + r.name + ',' + r.kind + ',' +
                    std::to_string(r.kernel) + ',' + std::to_string(r.stride) + ',' +
                    std::to_string(r.cumulative_stride) + ',' + std::to_string(r.receptive_field));
  if (wants(c, "csv")) write_lines(dir / "metrics.csv", lines);
  json s = base_summary(c);
  s.update(arch::to_json(report));
  return s;
}

void run_in(const ExperimentConfig& c, const std::filesystem::path& dir);

json sweep(const ExperimentConfig& c, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> fed_dirs, all_dirs;
  for (const auto& variant : expand_sweep(c)) {
    const auto sub = dir / variant.experiment_id;
    run_in(variant, sub);
    all_dirs.push_back(sub);
    if (variant.kind == RunKind::fed_run) fed_dirs.push_back(sub);
  }
  json s = base_summary(c);
  json runs = json::array();
  for (const auto& d : all_dirs) runs.push_back(d.filename().string());
  s["runs"] = runs;
  if (fed_dirs.size() >= 2) {
    const auto comparison = compare_sweep(all_dirs, c.accuracy_threshold);
    if (wants(c, "csv")) write_comparison_csv(dir / "comparison.csv", comparison);
    s["comparison"] = comparison_to_json(comparison);
  }
  return s;
}

void run_in(const ExperimentConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "DONE");
  write_json(dir / "config.json", config_to_json(c));
  json summary;
  switch (c.kind) {
    case RunKind::fed_run:
      summary = fed_run(c, dir);
      break;
    case RunKind::centralized_run:
      summary = centralized_run(c, dir);
      break;
    case RunKind::divergence_scan:
      summary = divergence_scan(c, dir);
      break;
    case RunKind::theorem_check:
      summary = theorem_check(c, dir);
      break;
    case RunKind::rf_calc:
      summary = rf_calc(c, dir);
      break;
    case RunKind::sweep:
      summary = sweep(c, dir);
      break;
  }
  if (wants(c, "json")) write_json(dir / "summary.json", summary);
  std::ofstream(dir / "DONE") << "ok\n";
}

std::optional<double> numeric(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  return std::nullopt;
}

}  // namespace

std::pair<data::Dataset, data::Dataset> load_datasets(const ExperimentConfig& config, const Shape& input_shape) {
  const auto& d = config.dataset;
  data::Dataset train, test;
  if (d.source == DataSource::idx) {
    train = data::load_idx(d.train_images, d.train_labels);
    test = data::load_idx(d.test_images, d.test_labels);
  } else {
    train = data::generate_synthetic(d.synthetic, d.train_seed);
    auto test_spec = d.synthetic;
    test_spec.samples_per_class = d.test_samples_per_class;
    test = data::generate_synthetic(test_spec, d.test_seed);
  }
  if (input_shape.size() != 3) throw ShapeError("image datasets need a (C, H, W) model input");
  for (auto* ds : {&train, &test}) {
    if (ds->image_shape()[0] != input_shape[0])
      throw ShapeError("dataset has " + std::to_string(ds->image_shape()[0]) + " channels, model expects " +
                       std::to_string(input_shape[0]));
    ds->images = data::resize(ds->images, input_shape[1], input_shape[2]);
  }
  const int classes = std::max(train.class_count, test.class_count);
  const int model_classes = config.model.preset == ModelPreset::custom ? config.model.spec->num_classes
                            : config.model.preset == ModelPreset::cnn  ? config.model.cnn.num_classes
                                                                       : 10;
  if (classes > model_classes)
    throw ValidationError("dataset has " + std::to_string(classes) + " classes, model has " +
                          std::to_string(model_classes));
  train.class_count = test.class_count = model_classes;
  return {std::move(train), std::move(test)};
}

std::filesystem::path run(const ExperimentConfig& config) {
  const auto dir = output_root(config) / config.experiment_id;
  run_in(config, dir);
  return dir;
}

Comparison compare_sweep(const std::vector<std::filesystem::path>& run_dirs, std::optional<double> threshold) {
  std::vector<std::string> incomplete;
  for (const auto& d : run_dirs)
    if (!std::filesystem::exists(d / "DONE")) incomplete.push_back(d.string());
  if (!incomplete.empty()) {
    std::string list;
    for (const auto& d : incomplete) list += (list.empty() ? "" : ", ") + d;
    throw ValidationError("incomplete runs (no DONE marker): " + list);
  }
  struct Variant {
    json value;
    std::string name;
    std::optional<std::vector<fed::RoundRecord>> fl;
    std::optional<double> cl_best;
  };
  std::vector<Variant> variants;
  std::optional<SweepAxis> axis;
  double config_threshold = 0.4;
  for (const auto& d : run_dirs) {
    std::ifstream in(d / "config.json");
    if (!in) throw IoError("missing config.json", d.string());
    const auto config = config_from_json(json::parse(in));
    if (!config.variant) throw ValidationError("not a sweep run", d.string());
    if (axis && *axis != config.variant->axis)
      throw ValidationError("runs sweep different axes", d.string());
    axis = config.variant->axis;
    config_threshold = config.accuracy_threshold;
    auto it = std::find_if(variants.begin(), variants.end(),
                           [&](const Variant& v) { return v.value == config.variant->value; });
    if (it == variants.end()) {
      variants.push_back({config.variant->value, {}, {}, {}});
      it = variants.end() - 1;
    }
    if (config.kind == RunKind::fed_run) {
      if (it->fl) throw ValidationError("two federated runs for one value", d.string());
      it->fl = read_fed_metrics(d / "metrics.csv").records;
      it->name = config.experiment_id;
    } else if (config.kind == RunKind::centralized_run) {
      const auto records = read_centralized_metrics(d / "metrics.csv");
      double best = 0.0;
      for (std::size_t i = 1; i < records.size(); ++i) best = std::max(best, records[i].test_accuracy);
      it->cl_best = best;
      if (it->name.empty()) it->name = config.experiment_id;
    } else {
      throw ValidationError("only fed_run and centralized_run directories can be compared", d.string());
    }
  }
  std::erase_if(variants, [](const Variant& v) { return !v.fl; });
  if (variants.size() < 2) throw ValidationError("need at least 2 completed federated runs to compare");
  if (std::all_of(variants.begin(), variants.end(), [](const Variant& v) { return numeric(v.value).has_value(); }))
    std::stable_sort(variants.begin(), variants.end(),
                     [](const Variant& a, const Variant& b) { return *numeric(a.value) < *numeric(b.value); });

  Comparison c;
  c.axis = *axis;
  c.threshold = threshold.value_or(config_threshold);
  for (const auto& v : variants) {
    ComparisonRow row;
    row.variant = v.name;
    row.value = v.value;
    row.best_accuracy = best_accuracy(*v.fl);
    row.mean_divergence = mean_divergence(*v.fl);
    row.rounds_to_threshold = rounds_to_threshold(*v.fl, c.threshold);
    row.cl_best_accuracy = v.cl_best;
    if (v.cl_best && *v.cl_best > 0) row.relative_degradation = (*v.cl_best - row.best_accuracy) / *v.cl_best;
    c.rows.push_back(row);
  }
  for (auto& row : c.rows) {
    row.delta_accuracy = row.best_accuracy - c.rows.front().best_accuracy;
    row.delta_divergence = row.mean_divergence - c.rows.front().mean_divergence;
  }
  std::vector<double> position(c.rows.size());
  for (std::size_t i = 0; i < position.size(); ++i) position[i] = static_cast<double>(i);
  auto verdict = [&](const std::string& metric, const std::vector<double>& values) {
    const double rho = spearman(position, values);
    const std::string axis_name = sweep_axis_name(c.axis);
    std::string text = "no trend in " + metric + " with " + axis_name;
    if (rho <= -kTrendCutoff) text = metric + " decreases with " + axis_name;
    if (rho >= kTrendCutoff) text = metric + " increases with " + axis_name;
    c.verdicts.push_back({metric, rho, text});
  };
  std::vector<double> div, acc, deg;
  for (const auto& r : c.rows) {
    div.push_back(r.mean_divergence);
    acc.push_back(r.best_accuracy);
    if (r.relative_degradation) deg.push_back(*r.relative_degradation);
  }
  verdict("divergence", div);
  verdict("accuracy", acc);
  if (deg.size() == c.rows.size()) verdict("relative degradation", deg);
  return c;
}

}  // namespace feddiv::harness
