#include "amp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace amp {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------------------
// config parsing

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

std::string path_of(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

double get_double(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path_of(where, key) + ": expected a number");
  return v.get<double>();
}

std::size_t get_size(const json& obj, const std::string& where, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(path_of(where, key) + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(path_of(where, key) + ": expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path_of(where, key) + ": expected a string");
  return v.get<std::string>();
}

RealVec get_doubles(const json& obj, const std::string& where, const char* key, RealVec fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(path_of(where, key) + ": expected an array of numbers");
  RealVec out;
  for (const json& e : v) {
    if (!e.is_number()) throw ConfigError(path_of(where, key) + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::size_t> get_sizes(const json& obj, const std::string& where, const char* key,
                                   std::vector<std::size_t> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(path_of(where, key) + ": expected an array of integers");
  std::vector<std::size_t> out;
  for (const json& e : v) {
    if (!e.is_number_unsigned()) throw ConfigError(path_of(where, key) + ": expected an array of integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_dataset(const json& j, const fs::path& base, DatasetConfig& d) {
  const std::string w = "dataset";
  reject_unknown(j, w, {"kind", "n_per_class", "num_classes", "noise", "centers", "sd", "path", "test_path",
                        "test_fraction", "standardize", "seed"});
  d.kind = get_string(j, w, "kind", d.kind);
  if (d.kind != "spiral" && d.kind != "blobs" && d.kind != "csv")
    throw ConfigError("dataset.kind: expected spiral, blobs or csv");
  d.n_per_class = get_size(j, w, "n_per_class", d.n_per_class);
  d.num_classes = get_size(j, w, "num_classes", d.num_classes);
  d.noise = get_double(j, w, "noise", d.noise);
  d.sd = get_double(j, w, "sd", d.sd);
  d.path = resolve(base, get_string(j, w, "path", ""));
  d.test_path = resolve(base, get_string(j, w, "test_path", ""));
  d.test_fraction = get_double(j, w, "test_fraction", d.test_fraction);
  d.standardize = get_bool(j, w, "standardize", d.standardize);
  d.seed = get_size(j, w, "seed", d.seed);
  if (j.contains("centers")) {
    const json& c = j.at("centers");
    if (!c.is_array() || c.empty() || !c[0].is_array() || c[0].empty())
      throw ConfigError("dataset.centers: expected a non-empty array of coordinate arrays");
    const std::size_t dim = c[0].size();
    RealMat m(c.size(), dim);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_array() || c[i].size() != dim) throw ConfigError("dataset.centers: ragged rows");
      for (std::size_t k = 0; k < dim; ++k) {
        if (!c[i][k].is_number()) throw ConfigError("dataset.centers: expected numbers");
        m(i, k) = c[i][k].get<double>();
      }
    }
    d.centers = std::move(m);
  }
  if (d.kind == "blobs" && d.centers.rows() == 0) throw ConfigError("dataset.centers: required for blobs");
  if (d.kind == "csv" && d.path.empty()) throw ConfigError("dataset.path: required for csv");
  if (d.kind == "spiral" && d.num_classes < 2) throw ConfigError("dataset.num_classes: must be >= 2");
  if (!(d.noise >= 0.0) || !(d.sd >= 0.0)) throw ConfigError("dataset: noise and sd must be >= 0");
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0))
    throw ConfigError("dataset.test_fraction: must be in (0, 1)");
}

void parse_train(const json& j, TrainConfig& t) {
  const std::string w = "train";
  reject_unknown(j, w, {"mode", "epochs", "batch_size", "outer_lr", "lr_decay", "momentum", "weight_decay",
                        "inner", "ball", "attack", "gnp_zeta", "gnp_epsilon", "seed"});
  try {
    t.mode = parse_train_mode(get_string(j, w, "mode", to_string(t.mode)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train.mode: ") + e.what());
  }
  t.epochs = get_size(j, w, "epochs", t.epochs);
  t.batch_size = get_size(j, w, "batch_size", t.batch_size);
  t.outer_lr = get_double(j, w, "outer_lr", t.outer_lr);
  t.momentum = get_double(j, w, "momentum", t.momentum);
  t.weight_decay = get_double(j, w, "weight_decay", t.weight_decay);
  t.gnp_zeta = get_double(j, w, "gnp_zeta", t.gnp_zeta);
  t.gnp_epsilon = get_double(j, w, "gnp_epsilon", t.gnp_epsilon);
  t.seed = get_size(j, w, "seed", t.seed);
  if (j.contains("lr_decay")) {
    const json& arr = j.at("lr_decay");
    if (!arr.is_array()) throw ConfigError("train.lr_decay: expected an array");
    t.lr_decay.clear();
    for (const json& e : arr) {
      reject_unknown(e, "train.lr_decay[]", {"epoch", "factor"});
      LrStep s;
      s.epoch = get_size(e, "train.lr_decay[]", "epoch", s.epoch);
      s.factor = get_double(e, "train.lr_decay[]", "factor", s.factor);
      t.lr_decay.push_back(s);
    }
  }
  if (j.contains("inner")) {
    const json& e = j.at("inner");
    reject_unknown(e, "train.inner", {"zeta", "n_steps"});
    t.inner.zeta = get_double(e, "train.inner", "zeta", t.inner.zeta);
    t.inner.n_steps = get_size(e, "train.inner", "n_steps", t.inner.n_steps);
  }
  if (j.contains("ball")) {
    const json& e = j.at("ball");
    reject_unknown(e, "train.ball", {"epsilon"});
    t.ball.epsilon = get_double(e, "train.ball", "epsilon", t.ball.epsilon);
  }
  if (j.contains("attack")) {
    const json& e = j.at("attack");
    reject_unknown(e, "train.attack", {"kind", "radius", "step", "steps"});
    try {
      t.attack.kind = parse_attack_kind(get_string(e, "train.attack", "kind", to_string(t.attack.kind)));
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string("train.attack.kind: ") + ex.what());
    }
    t.attack.radius = get_double(e, "train.attack", "radius", t.attack.radius);
    t.attack.step = get_double(e, "train.attack", "step", t.attack.step);
    t.attack.steps = get_size(e, "train.attack", "steps", t.attack.steps);
  }
  if (t.epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

void parse_theory(const json& j, TheoryConfig& t) {
  const std::string w = "theory";
  reject_unknown(j, w, {"eps", "sigma1_sq", "grid", "theorem1_count", "seed"});
  t.eps = get_double(j, w, "eps", t.eps);
  t.sigma1_sq = get_double(j, w, "sigma1_sq", t.sigma1_sq);
  t.theorem1_count = get_size(j, w, "theorem1_count", t.theorem1_count);
  t.seed = get_size(j, w, "seed", t.seed);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    const std::string gw = "theory.grid";
    reject_unknown(g, gw, {"beta_lo", "beta_hi", "beta_steps", "r_lo", "r_hi", "r_steps"});
    t.grid.beta_lo = get_double(g, gw, "beta_lo", t.grid.beta_lo);
    t.grid.beta_hi = get_double(g, gw, "beta_hi", t.grid.beta_hi);
    t.grid.beta_steps = get_size(g, gw, "beta_steps", t.grid.beta_steps);
    t.grid.r_lo = get_double(g, gw, "r_lo", t.grid.r_lo);
    t.grid.r_hi = get_double(g, gw, "r_hi", t.grid.r_hi);
    t.grid.r_steps = get_size(g, gw, "r_steps", t.grid.r_steps);
  }
  if (!(t.eps >= 0.0)) throw ConfigError("theory.eps: must be >= 0");
  if (!(t.sigma1_sq > 0.0)) throw ConfigError("theory.sigma1_sq: must be > 0");
  if (!(t.grid.beta_lo > 0.0 && t.grid.beta_hi < 1.0 && t.grid.beta_lo <= t.grid.beta_hi))
    throw ConfigError("theory.grid: beta range must lie in (0, 1)");
  if (!(t.grid.r_lo > 0.0 && t.grid.r_lo <= t.grid.r_hi)) throw ConfigError("theory.grid: r range must be > 0");
  if (t.grid.beta_steps < 1 || t.grid.r_steps < 1) throw ConfigError("theory.grid: steps must be >= 1");
}

std::string parse_split_name(const json& j, const std::string& w) {
  const std::string s = get_string(j, w, "split", "test");
  if (s != "train" && s != "test") throw ConfigError(w + ".split: expected train or test");
  return s;
}

}  // namespace

CliConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  reject_unknown(root, "config",
                 {"dataset", "model", "train", "scan", "theory", "sweep", "calibrate", "attack", "output"});
  CliConfig cfg;
  try {
    if (root.contains("dataset")) parse_dataset(root.at("dataset"), base_dir, cfg.dataset);
    if (root.contains("model")) {
      const json& m = root.at("model");
      reject_unknown(m, "model", {"hidden", "path"});
      cfg.hidden = get_sizes(m, "model", "hidden", cfg.hidden);
      for (std::size_t h : cfg.hidden)
        if (h < 1) throw ConfigError("model.hidden: widths must be >= 1");
      cfg.model = resolve(base_dir, get_string(m, "model", "path", ""));
    }
    if (root.contains("train")) parse_train(root.at("train"), cfg.train);
    if (root.contains("scan")) {
      const json& s = root.at("scan");
      reject_unknown(s, "scan", {"alpha_lo", "alpha_hi", "points", "grid_points", "direction_seed"});
      cfg.scan.alpha_lo = get_double(s, "scan", "alpha_lo", cfg.scan.alpha_lo);
      cfg.scan.alpha_hi = get_double(s, "scan", "alpha_hi", cfg.scan.alpha_hi);
      cfg.scan.points = get_size(s, "scan", "points", cfg.scan.points);
      cfg.scan.grid_points = get_size(s, "scan", "grid_points", cfg.scan.grid_points);
      cfg.scan.direction_seed = get_size(s, "scan", "direction_seed", cfg.scan.direction_seed);
      if (cfg.scan.points < 1 || cfg.scan.grid_points < 1) throw ConfigError("scan: point counts must be >= 1");
      if (!(cfg.scan.alpha_lo <= cfg.scan.alpha_hi)) throw ConfigError("scan: alpha_lo > alpha_hi");
    }
    if (root.contains("theory")) parse_theory(root.at("theory"), cfg.theory);
    if (root.contains("sweep")) {
      const json& s = root.at("sweep");
      reject_unknown(s, "sweep", {"epsilons", "seeds"});
      cfg.sweep.epsilons = get_doubles(s, "sweep", "epsilons", {});
      for (double e : cfg.sweep.epsilons)
        if (!(e >= 0.0)) throw ConfigError("sweep.epsilons: values must be >= 0");
      for (std::size_t seed : get_sizes(s, "sweep", "seeds", {})) cfg.sweep.seeds.push_back(seed);
    }
    if (root.contains("calibrate")) {
      const json& c = root.at("calibrate");
      reject_unknown(c, "calibrate", {"bins", "split", "predictions"});
      cfg.calibrate.bins = get_size(c, "calibrate", "bins", cfg.calibrate.bins);
      cfg.calibrate.split = parse_split_name(c, "calibrate");
      cfg.calibrate.predictions = resolve(base_dir, get_string(c, "calibrate", "predictions", ""));
      if (cfg.calibrate.bins < 1) throw ConfigError("calibrate.bins: must be >= 1");
    }
    if (root.contains("attack")) {
      const json& a = root.at("attack");
      reject_unknown(a, "attack", {"kinds", "radii", "step", "steps", "split"});
      if (a.contains("kinds")) {
        if (!a.at("kinds").is_array()) throw ConfigError("attack.kinds: expected an array of names");
        cfg.attack.kinds.clear();
        for (const json& k : a.at("kinds")) {
          if (!k.is_string()) throw ConfigError("attack.kinds: expected an array of names");
          try {
            cfg.attack.kinds.push_back(parse_attack_kind(k.get<std::string>()));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("attack.kinds: ") + e.what());
          }
        }
      }
      cfg.attack.radii = get_doubles(a, "attack", "radii", cfg.attack.radii);
      for (double r : cfg.attack.radii)
        if (!(r >= 0.0)) throw ConfigError("attack.radii: values must be >= 0");
      if (a.contains("step")) cfg.attack.step = get_double(a, "attack", "step", 0.0);
      cfg.attack.steps = get_size(a, "attack", "steps", cfg.attack.steps);
      cfg.attack.split = parse_split_name(a, "attack");
    }
    cfg.output = resolve(base_dir, get_string(root, "", "output", ""));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

CliConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

SplitDataset build_dataset(const DatasetConfig& cfg) {
  SplitDataset data;
  if (cfg.kind == "csv") {
    Dataset all = load_csv(cfg.path);
    if (!cfg.test_path.empty()) {
      data.train = std::move(all);
      data.test = load_csv(cfg.test_path);
      if (data.test.dim() != data.train.dim()) throw std::invalid_argument("test set feature count differs");
      data.train.num_classes = data.test.num_classes = std::max(data.train.num_classes, data.test.num_classes);
    } else {
      data = split(all, cfg.test_fraction, cfg.seed);
    }
  } else {
    const Dataset all = cfg.kind == "spiral" ? gen_spiral(cfg.n_per_class, cfg.num_classes, cfg.noise, cfg.seed)
                                             : gen_blobs(cfg.n_per_class, cfg.centers, cfg.sd, cfg.seed);
    data = split(all, cfg.test_fraction, cfg.seed);
  }
  if (cfg.standardize) {
    const Standardizer st = fit_standardizer(data.train);
    st.apply(data.train);
    st.apply(data.test);
  }
  return data;
}

MlpSpec build_spec(const CliConfig& cfg, const SplitDataset& data) {
  MlpSpec spec;
  spec.layer_sizes.push_back(data.train.dim());
  for (std::size_t h : cfg.hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(data.train.num_classes);
  return spec;
}

void save_model(const SavedModel& model, const fs::path& path) {
  json j;
  j["layer_sizes"] = model.spec.layer_sizes;
  j["theta"] = model.theta;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

SavedModel load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  SavedModel m;
  try {
    const json j = json::parse(in);
    reject_unknown(j, "model file", {"layer_sizes", "theta"});
    m.spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    m.theta = j.at("theta").get<ParamVector>();
    m.spec.validate();
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (m.theta.size() != m.spec.num_params()) throw ConfigError(path.string() + ": layout mismatch");
  return m;
}

namespace {

// ---------------------------------------------------------------------------
// output plumbing

struct Options {
  fs::path config;
  fs::path out;
  fs::path model;
  bool force = false;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
};

// Files are rendered in memory and written together at the end.
using Outputs = std::vector<std::pair<std::string, std::string>>;

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) buf_ << ',';
      buf_ << h;
      first = false;
    }
    buf_ << '\n';
  }
  Csv& num(double v) { return field(format_double(v)); }
  Csv& integer(std::uint64_t v) { return field(std::to_string(v)); }
  Csv& text(const std::string& s) { return field(s); }
  void end() {
    buf_ << '\n';
    open_ = false;
  }
  std::string str() const { return buf_.str(); }

 private:
  Csv& field(const std::string& s) {
    if (open_) buf_ << ',';
    buf_ << s;
    open_ = true;
    return *this;
  }
  std::ostringstream buf_;
  bool open_ = false;
};

fs::path output_dir(const Options& opt, const CliConfig& cfg) {
  fs::path dir = !opt.out.empty() ? opt.out : cfg.output;
  if (dir.empty()) throw ConfigError("no output directory: pass --out or set \"output\" in the config");
  if (fs::exists(dir) && !opt.force)
    throw ConfigError("output directory " + dir.string() + " already exists (use --force)");
  return dir;
}

void write_outputs(const fs::path& dir, const Outputs& files) {
  fs::create_directories(dir);
  for (const auto& [name, body] : files) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << body;
  }
}

json config_echo(const TrainConfig& c) {
  json j;
  j["mode"] = to_string(c.mode);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["outer_lr"] = c.outer_lr;
  j["lr_decay"] = json::array();
  for (const auto& s : c.lr_decay) j["lr_decay"].push_back({{"epoch", s.epoch}, {"factor", s.factor}});
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["inner"] = {{"zeta", c.inner.zeta}, {"n_steps", c.inner.n_steps}};
  j["ball"] = {{"epsilon", c.ball.epsilon}};
  j["attack"] = {{"kind", to_string(c.attack.kind)},
                 {"radius", c.attack.radius},
                 {"step", c.attack.step},
                 {"steps", c.attack.steps}};
  j["gnp_zeta"] = c.gnp_zeta;
  j["gnp_epsilon"] = c.gnp_epsilon;
  j["seed"] = c.seed;
  return j;
}

const Dataset& pick_split(const SplitDataset& data, const std::string& name) {
  return name == "train" ? data.train : data.test;
}

void check_model_fits(const SavedModel& m, const SplitDataset& data) {
  if (m.spec.input_dim() != data.train.dim() || m.spec.output_dim() < data.train.num_classes)
    throw ConfigError("model does not match the dataset shape");
}

SavedModel require_model(const Options& opt, const CliConfig& cfg) {
  const fs::path p = !opt.model.empty() ? opt.model : cfg.model;
  if (p.empty()) throw ConfigError("no model: pass --model or set model.path in the config");
  return load_model(p);
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_train(const Options& opt, const CliConfig& cfg) {
  const fs::path dir = output_dir(opt, cfg);
  const SplitDataset data = build_dataset(cfg.dataset);
  const MlpSpec spec = build_spec(cfg, data);
  const RunRecord rec = train(spec, data, cfg.train);

  Csv hist({"epoch", "train_loss", "train_err", "test_loss", "test_err"});
  json run;
  run["spec"] = {{"layer_sizes", spec.layer_sizes}};
  run["config"] = config_echo(cfg.train);
  run["history"] = json::array();
  for (const EpochRecord& e : rec.history) {
    hist.integer(e.epoch).num(e.train_loss).num(e.train_err).num(e.test_loss).num(e.test_err).end();
    run["history"].push_back({{"epoch", e.epoch},
                              {"train_loss", e.train_loss},
                              {"train_err", e.train_err},
                              {"test_loss", e.test_loss},
                              {"test_err", e.test_err},
                              {"seconds", e.seconds}});
  }
  run["theta"] = rec.theta;

  json model;
  model["layer_sizes"] = spec.layer_sizes;
  model["theta"] = rec.theta;
  write_outputs(dir, {{"history.csv", hist.str()},
                      {"run.json", run.dump(1) + "\n"},
                      {"model.json", model.dump(1) + "\n"}});
  const EpochRecord& last = rec.history.back();
  std::cout << to_string(cfg.train.mode) << ": train_loss " << format_double(last.train_loss) << " test_err "
            << format_double(last.test_err) << "\n";
  return 0;
}

int cmd_scan(const Options& opt, const CliConfig& cfg) {
  const SavedModel m = require_model(opt, cfg);
  const fs::path dir = output_dir(opt, cfg);
  const SplitDataset data = build_dataset(cfg.dataset);
  check_model_fits(m, data);

  const Rng root(cfg.scan.direction_seed, "scan");
  ParamVector d1 = filter_normalized_direction(m.spec, m.theta, root.derive("1d"));
  const LandscapeScan1D s1 = landscape_1d(m.spec, m.theta, data, std::move(d1),
                                          linspace(cfg.scan.alpha_lo, cfg.scan.alpha_hi, cfg.scan.points));
  ParamVector dx = filter_normalized_direction(m.spec, m.theta, root.derive("x"));
  ParamVector dy = filter_normalized_direction(m.spec, m.theta, root.derive("y"));
  const RealVec grid = linspace(cfg.scan.alpha_lo, cfg.scan.alpha_hi, cfg.scan.grid_points);
  const LandscapeScan2D s2 = landscape_2d(m.spec, m.theta, data.train, std::move(dx), std::move(dy), grid, grid);

  Csv c1({"alpha", "train_loss", "test_loss"});
  for (std::size_t i = 0; i < s1.alphas.size(); ++i)
    c1.num(s1.alphas[i]).num(s1.losses_train[i]).num(s1.losses_test[i]).end();
  Csv c2({"x", "y", "loss"});
  for (std::size_t i = 0; i < s2.grid_x.size(); ++i)
    for (std::size_t j = 0; j < s2.grid_y.size(); ++j) c2.num(s2.grid_x[i]).num(s2.grid_y[j]).num(s2.losses(i, j)).end();
  write_outputs(dir, {{"landscape1d.csv", c1.str()}, {"landscape2d.csv", c2.str()}});
  return 0;
}

int cmd_theory(const Options& opt, const CliConfig& cfg) {
  const fs::path dir = output_dir(opt, cfg);
  const TheoryConfig& t = cfg.theory;
  const RegionReport report = verify_region_on_double_well(t.eps, t.sigma1_sq, t.grid);
  Csv region({"beta", "r", "in_region", "amp_prefers_well2", "boundary", "mismatch"});
  for (const RegionPoint& p : report.points)
    region.num(p.beta).num(p.r).integer(p.in_region).integer(p.amp_prefers_well2).integer(p.boundary)
        .integer(p.mismatch).end();

  const std::uint64_t seed = opt.seed.value_or(t.seed);
  const auto rows = theorem1_check(t.theorem1_count, seed);
  Csv th({"index", "dim", "eps", "sigma_sq", "closed", "numeric", "rel_error"});
  double worst = 0.0;
  for (const Theorem1Row& r : rows) {
    th.integer(r.index).integer(r.dim).num(r.eps).num(r.sigma_sq).num(r.closed).num(r.numeric).num(r.rel_error).end();
    worst = std::max(worst, r.rel_error);
  }
  write_outputs(dir, {{"region.csv", region.str()}, {"theorem1_check.csv", th.str()}});
  std::cout << "region mismatches " << report.mismatches << " (excluded " << report.excluded
            << "), theorem1 max rel error " << format_double(worst) << "\n";
  return 0;
}

int cmd_sweep(const Options& opt, const CliConfig& cfg) {
  if (cfg.train.mode != TrainMode::AMP) throw ConfigError("sweep: train.mode must be amp");
  const fs::path dir = output_dir(opt, cfg);
  const SplitDataset data = build_dataset(cfg.dataset);
  const MlpSpec spec = build_spec(cfg, data);
  const RealVec grid = cfg.sweep.epsilons.empty() ? default_sweep_grid() : cfg.sweep.epsilons;
  std::vector<std::uint64_t> seeds = cfg.sweep.seeds;
  if (seeds.empty()) seeds.push_back(cfg.train.seed);
  const auto rows = epsilon_sweep(spec, data, cfg.train, grid, seeds, opt.jobs);

  Csv csv({"epsilon", "train_risk", "test_risk", "seed"});
  for (const SweepRow& r : rows) csv.num(r.epsilon).num(r.train_risk).num(r.test_risk).integer(r.seed).end();
  write_outputs(dir, {{"sweep.csv", csv.str()}});
  return 0;
}

std::pair<RealVec, std::vector<bool>> load_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open predictions file " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != "confidence,correct")
    throw ConfigError(path.string() + ":1: expected header confidence,correct");
  RealVec conf;
  std::vector<bool> correct;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    double c = 0.0;
    int ok = -1;
    const char* b = line.data();
    const char* e = b + line.size();
    const bool good = comma != std::string::npos &&
                      std::from_chars(b, b + comma, c).ptr == b + comma &&
                      std::from_chars(b + comma + 1, e, ok).ptr == e && (ok == 0 || ok == 1);
    if (!good) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    conf.push_back(c);
    correct.push_back(ok == 1);
  }
  return {conf, correct};
}

int cmd_calibrate(const Options& opt, const CliConfig& cfg) {
  CalibrationReport rep;
  fs::path dir;
  if (!cfg.calibrate.predictions.empty()) {
    // Precomputed (confidence, correct) pairs; no model involved.
    const auto [conf, correct] = load_predictions(cfg.calibrate.predictions);
    dir = output_dir(opt, cfg);
    try {
      rep = ece(conf, correct, cfg.calibrate.bins);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(cfg.calibrate.predictions.string() + ": " + e.what());
    }
  } else {
    const SavedModel m = require_model(opt, cfg);
    dir = output_dir(opt, cfg);
    const SplitDataset data = build_dataset(cfg.dataset);
    check_model_fits(m, data);
    rep = calibrate_model(m.spec, m.theta, pick_split(data, cfg.calibrate.split), cfg.calibrate.bins);
  }
  Csv csv({"bin_lo", "bin_hi", "count", "acc", "conf"});
  for (const CalibrationBin& b : rep.bins) csv.num(b.lo).num(b.hi).integer(b.count).num(b.acc).num(b.conf).end();
  write_outputs(dir, {{"calibration.csv", csv.str()}});
  std::cout << "ece " << format_double(rep.ece) << "\n";
  return 0;
}

int cmd_attack(const Options& opt, const CliConfig& cfg) {
  const SavedModel m = require_model(opt, cfg);
  const fs::path dir = output_dir(opt, cfg);
  const SplitDataset data = build_dataset(cfg.dataset);
  check_model_fits(m, data);
  const Dataset& target = pick_split(data, cfg.attack.split);

  Csv csv({"attack", "radius", "error"});
  for (AttackKind kind : cfg.attack.kinds) {
    for (double radius : cfg.attack.radii) {
      AttackSpec a;
      a.kind = kind;
      a.radius = radius;
      a.steps = cfg.attack.steps;
      a.step = cfg.attack.step.value_or(radius / 4.0);
      if (radius == 0.0 && !cfg.attack.step) a.step = 1.0;
      csv.text(to_string(kind)).num(radius).num(robustness_eval(m.spec, m.theta, target, a)).end();
    }
  }
  write_outputs(dir, {{"robustness.csv", csv.str()}});
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Adversarial model perturbation experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  std::uint64_t seed_override = 0;
  app.add_option("--config", opt.config, "JSON config file")->required();
  app.add_option("--out", opt.out, "Output directory (must not exist unless --force)");
  app.add_option("--model", opt.model, "Saved model.json for scan, calibrate and attack");
  app.add_flag("--force", opt.force, "Write into an existing output directory");
  app.add_option("--jobs", opt.jobs, "Parallel runs for sweep")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed_override, "Override train.seed");

  using Handler = int (*)(const Options&, const CliConfig&);
  std::vector<std::pair<CLI::App*, Handler>> subs{
      {app.add_subcommand("train", "Train a model and record its history"), cmd_train},
      {app.add_subcommand("scan", "1-D and 2-D loss landscape of a saved model"), cmd_scan},
      {app.add_subcommand("theory", "Region and closed-form checks on Gaussian surfaces"), cmd_theory},
      {app.add_subcommand("sweep", "Train AMP across a grid of ball radii"), cmd_sweep},
      {app.add_subcommand("calibrate", "Reliability bins and ECE"), cmd_calibrate},
      {app.add_subcommand("attack", "Error under FGSM and PGD input attacks"), cmd_attack},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    CliConfig cfg = load_config(opt.config);
    if (*seed_opt) {
      opt.seed = seed_override;
      cfg.train.seed = seed_override;
    }
    for (const auto& [sub, handler] : subs)
      if (sub->parsed()) return handler(opt, cfg);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace amp
