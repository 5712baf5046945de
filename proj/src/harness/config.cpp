#include <cmath>
#include <fstream>
#include <set>

#include "feddiv/harness/harness.hpp"

namespace feddiv::harness {
namespace {

using nlohmann::json;

// Typed access to one JSON object. Keys outside `allowed` are rejected up
// front so a misspelt key is reported even when other fields are missing.
class Obj {
 public:
  Obj(const json& j, std::string path, const std::set<std::string>& allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("must be an object", path_);
    for (const auto& [key, value] : j.items())
      if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "'", at(key));
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const std::string& key) const { return j_.at(key); }

  long long integer(const std::string& key, long long fallback, long long min) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError("must be an integer", at(key));
    const long long x = v.get<long long>();
    if (x < min) throw ConfigError("must be >= " + std::to_string(min), at(key));
    return x;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError("must be a non-negative integer", at(key));
    return v.get<std::uint64_t>();
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError("must be a finite number", at(key));
    return v.get<double>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError("must be true or false", at(key));
    return j_.at(key).get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw ConfigError("must be a string", at(key));
    return j_.at(key).get<std::string>();
  }

  std::string required_text(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing required key", at(key));
    return text(key, "");
  }

  // Parses an enum-like string with `parse`, rethrowing as ConfigError.
  template <typename Parse>
  auto choice(const std::string& key, const std::string& fallback, Parse parse) const {
    const std::string name = text(key, fallback);
    try {
      return parse(name);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what(), at(key));
    }
  }

  Obj child(const std::string& key, const std::set<std::string>& allowed) const {
    static const json empty = json::object();
    return Obj(has(key) ? j_.at(key) : empty, at(key), allowed);
  }

 private:
  const json& j_;
  std::string path_;
};

// Runs a component validator, translating its errors to ConfigError at `path`.
template <typename Fn>
void checked(const std::string& path, Fn fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    const std::string where = e.where().empty() ? path : path + "." + e.where();
    throw ConfigError(e.what(), where);
  }
}

bool filesystem_safe(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

Shape shape_from(const Obj& o, const std::string& key, const Shape& fallback) {
  if (!o.has(key)) return fallback;
  const auto& v = o.raw(key);
  if (!v.is_array() || v.size() != 3) throw ConfigError("must be [channels, height, width]", o.at(key));
  Shape s;
  for (const auto& d : v) {
    if (!d.is_number_integer() || d.get<long long>() < 1)
      throw ConfigError("must be [channels, height, width]", o.at(key));
    s.push_back(d.get<std::size_t>());
  }
  return s;
}

data::Range range_from(const Obj& o, const std::string& key, data::Range fallback) {
  if (!o.has(key)) return fallback;
  const auto& v = o.raw(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("must be [lo, hi]", o.at(key));
  return {v[0].get<double>(), v[1].get<double>()};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

DatasetConfig dataset_from(const Obj& o, const std::filesystem::path& base_dir) {
  DatasetConfig d;
  d.source = o.choice("source", "synthetic", [](const std::string& s) {
    if (s == "idx") return DataSource::idx;
    if (s == "synthetic") return DataSource::synthetic;
    throw ValidationError("source must be 'idx' or 'synthetic', got '" + s + "'");
  });
  if (d.source == DataSource::idx) {
    for (auto [key, field] : {std::pair{"train_images", &d.train_images}, std::pair{"train_labels", &d.train_labels},
                              std::pair{"test_images", &d.test_images}, std::pair{"test_labels", &d.test_labels}})
      *field = resolve(base_dir, o.required_text(key));
  } else {
    for (const char* key : {"train_images", "train_labels", "test_images", "test_labels"})
      if (o.has(key)) throw ConfigError("only used with source 'idx'", o.at(key));
  }
  const Obj s = o.child("synthetic", {"class_count", "image_shape", "prototype_seed", "noise_std", "samples_per_class",
                                      "class_separation", "test_samples_per_class", "train_seed", "test_seed"});
  auto& syn = d.synthetic;
  syn.class_count = static_cast<int>(s.integer("class_count", syn.class_count, 1));
  syn.image_shape = shape_from(s, "image_shape", syn.image_shape);
  syn.prototype_seed = s.seed("prototype_seed", syn.prototype_seed);
  syn.noise_std = s.real("noise_std", syn.noise_std);
  syn.samples_per_class = static_cast<std::size_t>(s.integer("samples_per_class", 100, 1));
  syn.class_separation = s.real("class_separation", syn.class_separation);
  d.test_samples_per_class = static_cast<std::size_t>(s.integer("test_samples_per_class", 20, 1));
  d.train_seed = s.seed("train_seed", d.train_seed);
  d.test_seed = s.seed("test_seed", d.test_seed);
  checked(s.path(), [&] { data::validate(syn); });

  const Obj a = o.child("augmentation", {"mode", "scale", "ratio", "jitter"});
  auto& aug = d.augmentation;
  aug.mode = a.choice("mode", "none", data::parse_augment_mode);
  aug.scale = range_from(a, "scale", aug.scale);
  aug.ratio = range_from(a, "ratio", aug.ratio);
  const Obj jit = a.child("jitter", {"brightness", "contrast", "saturation"});
  aug.jitter.brightness = jit.real("brightness", aug.jitter.brightness);
  aug.jitter.contrast = jit.real("contrast", aug.jitter.contrast);
  aug.jitter.saturation = jit.real("saturation", aug.jitter.saturation);
  checked(a.path(), [&] { data::validate(aug); });
  return d;
}

ModelConfig model_from(const Obj& o) {
  ModelConfig m;
  m.preset = o.choice("preset", "cnn", parse_model_preset);
  const Obj c = o.child("cnn", {"depth_blocks", "width_multiplier", "stem_kernel", "use_stem_maxpool",
                                "channel_schedule", "residual", "num_classes", "input_shape"});
  auto& cnn = m.cnn;
  cnn.depth_blocks = static_cast<int>(c.integer("depth_blocks", cnn.depth_blocks, 1));
  cnn.width_multiplier = c.real("width_multiplier", cnn.width_multiplier);
  cnn.stem_kernel = static_cast<int>(c.integer("stem_kernel", cnn.stem_kernel, 1));
  cnn.use_stem_maxpool = c.flag("use_stem_maxpool", cnn.use_stem_maxpool);
  cnn.channel_schedule = c.choice("channel_schedule", "normal", arch::parse_schedule);
  cnn.residual = c.flag("residual", cnn.residual);
  cnn.num_classes = static_cast<int>(c.integer("num_classes", cnn.num_classes, 1));
  cnn.input_shape = shape_from(c, "input_shape", cnn.input_shape);
  if (m.preset == ModelPreset::cnn) checked(c.path(), [&] { arch::validate(cnn); });
  if (o.has("spec")) {
    if (m.preset != ModelPreset::custom) throw ConfigError("only used with preset 'custom'", o.at("spec"));
    m.spec = arch::model_spec_from_json(o.raw("spec"), o.at("spec"));
    checked(o.at("spec"), [&] { nn::validate_structure(*m.spec); });
  } else if (m.preset == ModelPreset::custom) {
    throw ConfigError("missing required key", o.at("spec"));
  }
  return m;
}

fed::FederationConfig federation_from(const Obj& o) {
  fed::FederationConfig f;
  f.n_clients = static_cast<std::size_t>(o.integer("n_clients", 5, 1));
  f.local_epochs = static_cast<int>(o.integer("local_epochs", f.local_epochs, 1));
  f.rounds = static_cast<int>(o.integer("rounds", f.rounds, 1));
  f.lr = o.real("lr", f.lr);
  if (f.lr < 0) throw ConfigError("must be >= 0", o.at("lr"));
  f.batch_size = static_cast<std::size_t>(o.integer("batch_size", 32, 1));
  f.seed = o.seed("seed", f.seed);
  f.eval_every = static_cast<int>(o.integer("eval_every", f.eval_every, 1));
  f.workers = static_cast<std::size_t>(o.integer("workers", 1, 1));
  f.init = o.choice("init", "kaiming_uniform", nn::parse_init_scheme);
  f.precision = o.choice("precision", "f64", fed::parse_precision);
  checked(o.path(), [&] { fed::validate(f); });
  return f;
}

CentralizedBlock centralized_from(const Obj& o, const fed::FederationConfig& f) {
  CentralizedBlock c;
  c.epochs = static_cast<int>(o.integer("epochs", static_cast<long long>(f.rounds) * f.local_epochs, 1));
  c.lr = o.real("lr", f.lr);
  if (*c.lr < 0) throw ConfigError("must be >= 0", o.at("lr"));
  c.batch_size = static_cast<std::size_t>(o.integer("batch_size", static_cast<long long>(f.batch_size), 1));
  return c;
}

lab::AccumulationSettings probe_from(const Obj& o) {
  lab::AccumulationSettings p;
  p.sigma = o.real("sigma", p.sigma);
  if (p.sigma < 0) throw ConfigError("must be >= 0", o.at("sigma"));
  p.n_samples = static_cast<std::size_t>(o.integer("n_samples", 1000, 2));
  if (o.has("seeds")) {
    const auto& v = o.raw("seeds");
    if (!v.is_array() || v.empty()) throw ConfigError("must be a non-empty array of seeds", o.at("seeds"));
    p.seeds.clear();
    for (const auto& s : v) {
      if (!s.is_number_integer() || s.get<long long>() < 0)
        throw ConfigError("must be a non-empty array of seeds", o.at("seeds"));
      p.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  p.pretrain_epochs = static_cast<int>(o.integer("pretrain_epochs", p.pretrain_epochs, 0));
  p.pretrain_lr = o.real("pretrain_lr", p.pretrain_lr);
  if (p.pretrain_lr < 0) throw ConfigError("must be >= 0", o.at("pretrain_lr"));
  p.pretrain_batch = static_cast<std::size_t>(o.integer("pretrain_batch", 32, 1));
  p.probe_class = static_cast<int>(o.integer("probe_class", 0, 0));
  p.workers = static_cast<std::size_t>(o.integer("workers", 1, 1));
  return p;
}

lab::Theorem1Config theorem_from(const Obj& o) {
  lab::Theorem1Config t;
  t.in_width = static_cast<std::size_t>(o.integer("in_width", 32, 1));
  t.hidden_width = static_cast<std::size_t>(o.integer("hidden_width", 32, 1));
  t.out_width = static_cast<std::size_t>(o.integer("out_width", 32, 1));
  t.n_samples = static_cast<std::size_t>(o.integer("n_samples", 10000, 1));
  t.noise_std_upstream = o.real("noise_std_upstream", t.noise_std_upstream);
  t.noise_std_input = o.real("noise_std_input", t.noise_std_input);
  t.seed = o.seed("seed", t.seed);
  t.weight_mode = o.choice("weight_mode", "orthogonal", lab::parse_weight_mode);
  t.activation = o.choice("activation", "linear", lab::parse_activation);
  t.workers = static_cast<std::size_t>(o.integer("workers", 1, 1));
  checked(o.path(), [&] { lab::validate(t); });
  return t;
}

// Checks one sweep value for its axis; `where` is the value's path.
void check_axis_value(SweepAxis axis, const json& v, const std::string& where) {
  auto fail = [&](const std::string& what) { throw ConfigError(what, where); };
  switch (axis) {
    case SweepAxis::depth:
    case SweepAxis::resolution:
      if (!v.is_number_integer() || v.get<long long>() < 1) fail("must be a positive integer");
      break;
    case SweepAxis::width:
      if (!v.is_number() || !(v.get<double>() > 0)) fail("must be a positive number");
      break;
    case SweepAxis::stem:
      if (!v.is_number_integer() || (v.get<int>() != 3 && v.get<int>() != 7)) fail("must be 3 or 7");
      break;
    case SweepAxis::maxpool:
    case SweepAxis::residual:
      if (!v.is_boolean()) fail("must be true or false");
      break;
    case SweepAxis::augmentation:
      if (!v.is_string()) fail("must be an augmentation mode");
      try {
        data::parse_augment_mode(v.get<std::string>());
      } catch (const ValidationError& e) {
        fail(e.what());
      }
      break;
    case SweepAxis::schedule:
      if (!v.is_string()) fail("must be a channel schedule");
      try {
        arch::parse_schedule(v.get<std::string>());
      } catch (const ValidationError& e) {
        fail(e.what());
      }
      break;
  }
}

SweepConfig sweep_from(const Obj& o) {
  SweepConfig s;
  if (!o.has("axis")) throw ConfigError("missing required key", o.at("axis"));
  s.axis = o.choice("axis", "", parse_sweep_axis);
  if (!o.has("values") || !o.raw("values").is_array() || o.raw("values").empty())
    throw ConfigError("must be a non-empty array", o.at("values"));
  s.values = o.raw("values");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const std::string where = o.at("values") + "[" + std::to_string(i) + "]";
    check_axis_value(s.axis, s.values[i], where);
    if (!seen.insert(s.values[i].dump()).second) throw ConfigError("duplicate sweep value", where);
  }
  if (o.has("runs")) {
    const auto& r = o.raw("runs");
    if (!r.is_array() || r.empty()) throw ConfigError("must be a non-empty array of run kinds", o.at("runs"));
    s.runs.clear();
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::string where = o.at("runs") + "[" + std::to_string(i) + "]";
      if (!r[i].is_string()) throw ConfigError("must be a run kind", where);
      RunKind k;
      try {
        k = parse_run_kind(r[i].get<std::string>());
      } catch (const ValidationError& e) {
        throw ConfigError(e.what(), where);
      }
      if (k != RunKind::fed_run && k != RunKind::centralized_run)
        throw ConfigError("sweeps run only fed_run or centralized_run", where);
      if (std::find(s.runs.begin(), s.runs.end(), k) != s.runs.end()) throw ConfigError("duplicate run kind", where);
      s.runs.push_back(k);
    }
  }
  return s;
}

json shape_json(const Shape& s) { return json(s); }

}  // namespace

const char* run_kind_name(RunKind kind) {
  switch (kind) {
    case RunKind::fed_run:
      return "fed_run";
    case RunKind::centralized_run:
      return "centralized_run";
    case RunKind::divergence_scan:
      return "divergence_scan";
    case RunKind::theorem_check:
      return "theorem_check";
    case RunKind::rf_calc:
      return "rf_calc";
    case RunKind::sweep:
      return "sweep";
  }
  return "unknown";
}

RunKind parse_run_kind(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(RunKind::sweep); ++i)
    if (name == run_kind_name(static_cast<RunKind>(i))) return static_cast<RunKind>(i);
  throw ValidationError("unknown run kind '" + name + "'");
}

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::depth:
      return "depth";
    case SweepAxis::width:
      return "width";
    case SweepAxis::resolution:
      return "resolution";
    case SweepAxis::augmentation:
      return "augmentation";
    case SweepAxis::stem:
      return "stem";
    case SweepAxis::maxpool:
      return "maxpool";
    case SweepAxis::schedule:
      return "schedule";
    case SweepAxis::residual:
      return "residual";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(SweepAxis::residual); ++i)
    if (name == sweep_axis_name(static_cast<SweepAxis>(i))) return static_cast<SweepAxis>(i);
  throw ValidationError("unknown sweep axis '" + name + "'");
}

const char* model_preset_name(ModelPreset p) {
  switch (p) {
    case ModelPreset::cnn:
      return "cnn";
    case ModelPreset::probe_shallow:
      return "probe_shallow";
    case ModelPreset::probe_deep:
      return "probe_deep";
    case ModelPreset::custom:
      return "custom";
  }
  return "unknown";
}

ModelPreset parse_model_preset(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(ModelPreset::custom); ++i)
    if (name == model_preset_name(static_cast<ModelPreset>(i))) return static_cast<ModelPreset>(i);
  throw ValidationError("unknown model preset '" + name + "'");
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  const Obj root(j, "", {"experiment_id", "kind", "dataset", "model", "federation", "centralized", "probe",
                         "theorem", "sweep", "variant", "accuracy_threshold", "output"});
  ExperimentConfig c;
  c.experiment_id = root.required_text("experiment_id");
  if (!filesystem_safe(c.experiment_id))
    throw ConfigError("must be non-empty and use only letters, digits, '.', '_' and '-'", "experiment_id");
  if (!root.has("kind")) throw ConfigError("missing required key", "kind");
  c.kind = root.choice("kind", "", parse_run_kind);
  c.dataset = dataset_from(root.child("dataset", {"source", "train_images", "train_labels", "test_images",
                                                  "test_labels", "synthetic", "augmentation"}),
                           base_dir);
  c.model = model_from(root.child("model", {"preset", "cnn", "spec"}));
  c.federation = federation_from(root.child(
      "federation", {"n_clients", "local_epochs", "rounds", "lr", "batch_size", "seed", "eval_every", "workers",
                     "init", "precision"}));
  c.centralized = centralized_from(root.child("centralized", {"epochs", "lr", "batch_size"}), c.federation);
  c.probe = probe_from(root.child("probe", {"sigma", "n_samples", "seeds", "pretrain_epochs", "pretrain_lr",
                                            "pretrain_batch", "probe_class", "workers"}));
  c.theorem = theorem_from(root.child("theorem", {"in_width", "hidden_width", "out_width", "n_samples",
                                                  "noise_std_upstream", "noise_std_input", "seed", "weight_mode",
                                                  "activation", "workers"}));
  if (root.has("sweep")) c.sweep = sweep_from(root.child("sweep", {"axis", "values", "runs"}));
  if (c.kind == RunKind::sweep && !c.sweep) throw ConfigError("missing required key", "sweep");
  if (c.kind != RunKind::sweep && c.sweep) throw ConfigError("only used with kind 'sweep'", "sweep");
  if (root.has("variant")) {
    const Obj v = root.child("variant", {"axis", "value"});
    VariantTag tag;
    if (!v.has("axis")) throw ConfigError("missing required key", "variant.axis");
    tag.axis = v.choice("axis", "", parse_sweep_axis);
    if (!v.has("value")) throw ConfigError("missing required key", "variant.value");
    tag.value = v.raw("value");
    check_axis_value(tag.axis, tag.value, "variant.value");
    c.variant = tag;
  }
  c.accuracy_threshold = root.real("accuracy_threshold", c.accuracy_threshold);
  if (c.accuracy_threshold < 0 || c.accuracy_threshold > 1)
    throw ConfigError("must be in [0, 1]", "accuracy_threshold");
  const Obj out = root.child("output", {"directory", "formats"});
  c.output.directory = out.text("directory", c.output.directory.string());
  if (out.has("formats")) {
    const auto& f = out.raw("formats");
    if (!f.is_array()) throw ConfigError("must be an array", "output.formats");
    c.output.formats.clear();
    for (const auto& x : f) {
      if (!x.is_string() || (x != "csv" && x != "json"))
        throw ConfigError("formats are 'csv' and 'json'", "output.formats");
      c.output.formats.push_back(x.get<std::string>());
    }
  }
  if (c.kind == RunKind::sweep || c.kind == RunKind::fed_run || c.kind == RunKind::centralized_run ||
      c.kind == RunKind::rf_calc)
    resolve_model(c);
  if (c.kind == RunKind::divergence_scan && c.probe.probe_class >= 10)
    throw ConfigError("probe models have 10 classes", "probe.probe_class");
  if (c.sweep) {
    const auto axis = c.sweep->axis;
    if (c.model.preset != ModelPreset::cnn && axis != SweepAxis::augmentation)
      throw ConfigError("axis '" + std::string(sweep_axis_name(axis)) + "' needs model preset 'cnn'", "sweep.axis");
    for (const auto& variant : expand_sweep(c)) resolve_model(variant);
  }
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file", path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), path.string());
  }
  return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment_id"] = c.experiment_id;
  j["kind"] = run_kind_name(c.kind);

  const auto& d = c.dataset;
  json dataset = {{"source", d.source == DataSource::idx ? "idx" : "synthetic"}};
  if (d.source == DataSource::idx) {
    dataset["train_images"] = d.train_images.string();
    dataset["train_labels"] = d.train_labels.string();
    dataset["test_images"] = d.test_images.string();
    dataset["test_labels"] = d.test_labels.string();
  }
  const auto& s = d.synthetic;
  dataset["synthetic"] = {{"class_count", s.class_count},
                          {"image_shape", shape_json(s.image_shape)},
                          {"prototype_seed", s.prototype_seed},
                          {"noise_std", s.noise_std},
                          {"samples_per_class", s.samples_per_class},
                          {"class_separation", s.class_separation},
                          {"test_samples_per_class", d.test_samples_per_class},
                          {"train_seed", d.train_seed},
                          {"test_seed", d.test_seed}};
  const auto& a = d.augmentation;
  dataset["augmentation"] = {{"mode", data::augment_mode_name(a.mode)},
                             {"scale", {a.scale.lo, a.scale.hi}},
                             {"ratio", {a.ratio.lo, a.ratio.hi}},
                             {"jitter",
                              {{"brightness", a.jitter.brightness},
                               {"contrast", a.jitter.contrast},
                               {"saturation", a.jitter.saturation}}}};
  j["dataset"] = dataset;

  const auto& m = c.model;
  json model = {{"preset", model_preset_name(m.preset)},
                {"cnn",
                 {{"depth_blocks", m.cnn.depth_blocks},
                  {"width_multiplier", m.cnn.width_multiplier},
                  {"stem_kernel", m.cnn.stem_kernel},
                  {"use_stem_maxpool", m.cnn.use_stem_maxpool},
                  {"channel_schedule", arch::schedule_name(m.cnn.channel_schedule)},
                  {"residual", m.cnn.residual},
                  {"num_classes", m.cnn.num_classes},
                  {"input_shape", shape_json(m.cnn.input_shape)}}}};
  if (m.spec) model["spec"] = arch::model_spec_to_json(*m.spec);
  j["model"] = model;

  const auto& f = c.federation;
  j["federation"] = {{"n_clients", f.n_clients},   {"local_epochs", f.local_epochs},
                     {"rounds", f.rounds},         {"lr", f.lr},
                     {"batch_size", f.batch_size}, {"seed", f.seed},
                     {"eval_every", f.eval_every}, {"workers", f.workers},
                     {"init", nn::init_scheme_name(f.init)}, {"precision", fed::precision_name(f.precision)}};
  j["centralized"] = {{"epochs", c.centralized.epochs.value_or(f.rounds * f.local_epochs)},
                      {"lr", c.centralized.lr.value_or(f.lr)},
                      {"batch_size", c.centralized.batch_size.value_or(f.batch_size)}};
  const auto& p = c.probe;
  j["probe"] = {{"sigma", p.sigma},
                {"n_samples", p.n_samples},
                {"seeds", p.seeds},
                {"pretrain_epochs", p.pretrain_epochs},
                {"pretrain_lr", p.pretrain_lr},
                {"pretrain_batch", p.pretrain_batch},
                {"probe_class", p.probe_class},
                {"workers", p.workers}};
  const auto& t = c.theorem;
  j["theorem"] = {{"in_width", t.in_width},
                  {"hidden_width", t.hidden_width},
                  {"out_width", t.out_width},
                  {"n_samples", t.n_samples},
                  {"noise_std_upstream", t.noise_std_upstream},
                  {"noise_std_input", t.noise_std_input},
                  {"seed", t.seed},
                  {"weight_mode", lab::weight_mode_name(t.weight_mode)},
                  {"activation", lab::activation_name(t.activation)},
                  {"workers", t.workers}};
  if (c.sweep) {
    json runs = json::array();
    for (auto k : c.sweep->runs) runs.push_back(run_kind_name(k));
    j["sweep"] = {{"axis", sweep_axis_name(c.sweep->axis)}, {"values", c.sweep->values}, {"runs", runs}};
  }
  if (c.variant) j["variant"] = {{"axis", sweep_axis_name(c.variant->axis)}, {"value", c.variant->value}};
  j["accuracy_threshold"] = c.accuracy_threshold;
  j["output"] = {{"directory", c.output.directory.string()}, {"formats", c.output.formats}};
  return j;
}

nn::ModelSpec resolve_model(const ExperimentConfig& config) {
  nn::ModelSpec spec;
  checked("model", [&] {
    switch (config.model.preset) {
      case ModelPreset::cnn:
        spec = arch::build_cnn(config.model.cnn);
        break;
      case ModelPreset::probe_shallow:
        spec = arch::build_probe_cnns().first;
        break;
      case ModelPreset::probe_deep:
        spec = arch::build_probe_cnns().second;
        break;
      case ModelPreset::custom:
        spec = *config.model.spec;
        break;
    }
    if (config.kind == RunKind::rf_calc)
      nn::validate_structure(spec);
    else
      nn::validate(spec);
  });
  return spec;
}

std::filesystem::path output_root(const ExperimentConfig& config) {
  if (const char* env = std::getenv("FEDDIV_OUTPUT_ROOT"); env && *env) return env;
  return config.output.directory;
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config) {
  if (!config.sweep) throw ValidationError("config has no sweep block");
  std::vector<ExperimentConfig> out;
  const auto axis = config.sweep->axis;
  for (const auto& value : config.sweep->values) {
    ExperimentConfig v = config;
    v.sweep.reset();
    v.variant = VariantTag{axis, value};
    auto& cnn = v.model.cnn;
    switch (axis) {
      case SweepAxis::depth:
        cnn.depth_blocks = value.get<int>();
        break;
      case SweepAxis::width:
        cnn.width_multiplier = config.model.cnn.width_multiplier * value.get<double>();
        break;
      case SweepAxis::resolution:
        cnn.input_shape = {cnn.input_shape[0], value.get<std::size_t>(), value.get<std::size_t>()};
        break;
      case SweepAxis::augmentation:
        v.dataset.augmentation.mode = data::parse_augment_mode(value.get<std::string>());
        break;
      case SweepAxis::stem:
        cnn.stem_kernel = value.get<int>();
        break;
      case SweepAxis::maxpool:
        cnn.use_stem_maxpool = value.get<bool>();
        break;
      case SweepAxis::schedule:
        cnn.channel_schedule = arch::parse_schedule(value.get<std::string>());
        break;
      case SweepAxis::residual:
        cnn.residual = value.get<bool>();
        break;
    }
    const std::string label = value.is_string() ? value.get<std::string>() : value.dump();
    for (RunKind kind : config.sweep->runs) {
      ExperimentConfig r = v;
      r.kind = kind;
      r.experiment_id = std::string(sweep_axis_name(axis)) + "_" + label + (kind == RunKind::centralized_run ? "_cl" : "");
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace feddiv::harness
