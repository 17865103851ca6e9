#include "calm/cli/run_config.hpp"

#include <algorithm>
#include <initializer_list>
#include <limits>
#include <string>

#include "calm/cli/errors.hpp"
#include "calm/cli/format.hpp"

namespace calm::cli {

namespace {

using nlohmann::json;

std::string type_name(const json& j) { return j.type_name(); }

// Strict view of one JSON object: every key must be declared, every value
// must have the expected type.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + "expected an object, got " + type_name(obj_));
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& item : obj_.items()) {
      if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
        throw ConfigError(where() + "unknown key '" + item.key() + "'");
      }
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key); }
  bool is_null(const std::string& key) const { return obj_.contains(key) && obj_.at(key).is_null(); }
  const json& at(const std::string& key) const { return obj_.at(key); }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const std::string& key, double& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) throw mismatch(key, "a number", v);
    out = v.get<double>();
  }

  template <typename Int>
    requires std::is_unsigned_v<Int>
  void read(const std::string& key, Int& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      const auto raw = v.get<std::uint64_t>();
      if (raw > std::numeric_limits<Int>::max()) throw ConfigError(where(key) + "value too large");
      out = static_cast<Int>(raw);
      return;
    }
    throw mismatch(key, "a non-negative integer", v);
  }

  void read(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_string()) throw mismatch(key, "a string", v);
    out = v.get<std::string>();
  }

  void read(const std::string& key, std::vector<double>& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array()) throw mismatch(key, "an array of numbers", v);
    out.clear();
    for (const json& x : v) {
      if (!x.is_number()) throw mismatch(key, "an array of numbers", v);
      out.push_back(x.get<double>());
    }
  }

  void read(const std::string& key, std::vector<std::size_t>& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array()) throw mismatch(key, "an array of integers", v);
    out.clear();
    for (const json& x : v) {
      if (!x.is_number_unsigned()) throw mismatch(key, "an array of non-negative integers", v);
      out.push_back(x.get<std::size_t>());
    }
  }

  std::string where(const std::string& key = {}) const {
    const std::string p = key.empty() ? path_ : child(key);
    return p.empty() ? std::string() : p + ": ";
  }

 private:
  ConfigError mismatch(const std::string& key, const std::string& expected, const json& got) const {
    return ConfigError(where(key) + "expected " + expected + ", got " + type_name(got));
  }

  const json& obj_;
  std::string path_;
};

template <typename Fn>
auto wrap_enum(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.detail());
  }
}

SynthConfig parse_synth(const ObjectReader& r) {
  r.allow({"classes", "kappas", "kappa_lo", "kappa_hi", "samples_per_class", "dim", "placement", "clusters",
           "cluster_kappa", "antipodal_kappa"});
  SynthConfig s;
  r.read("classes", s.classes);
  r.read("kappas", s.kappas);
  r.read("kappa_lo", s.kappa_lo);
  r.read("kappa_hi", s.kappa_hi);
  r.read("samples_per_class", s.samples_per_class);
  r.read("dim", s.dim);
  std::string placement(to_string(s.placement));
  r.read("placement", placement);
  s.placement = wrap_enum(r.child("placement"), [&] { return parse_placement(placement); });
  r.read("clusters", s.clusters);
  r.read("cluster_kappa", s.cluster_kappa);
  r.read("antipodal_kappa", s.antipodal_kappa);
  return s;
}

void parse_base(const ObjectReader& r, BaseLossConfig& base) {
  r.allow({"kind", "pos_margin", "neg_margin", "triplet_margin"});
  std::string kind(to_string(base.kind));
  r.read("kind", kind);
  base.kind = wrap_enum(r.child("kind"), [&] { return parse_base_loss(kind); });
  r.read("pos_margin", base.contrastive.pos_margin);
  r.read("neg_margin", base.contrastive.neg_margin);
  r.read("triplet_margin", base.triplet_margin);
}

CamConfig parse_cam(const ObjectReader& r) {
  r.allow({"m_plus", "m_minus", "lambda_plus", "lambda_minus"});
  CamConfig cam;
  r.read("m_plus", cam.m_plus);
  r.read("m_minus", cam.m_minus);
  r.read("lambda_plus", cam.lambda_plus);
  r.read("lambda_minus", cam.lambda_minus);
  return cam;
}

AdaCamConfig parse_adacam(const ObjectReader& r) {
  r.allow({"finetune_epochs", "lr", "lr_scale", "percentile_lo", "percentile_hi"});
  AdaCamConfig a;
  a.enabled = true;
  r.read("finetune_epochs", a.finetune_epochs);
  r.read("lr", a.lr);
  r.read("lr_scale", a.lr_scale);
  r.read("percentile_lo", a.percentile_lo);
  r.read("percentile_hi", a.percentile_hi);
  return a;
}

void parse_train(const ObjectReader& r, TrainConfig& t) {
  r.allow({"mode", "epochs", "lr", "classes_per_batch", "samples_per_class", "eval_every", "encoder_dim", "base",
           "cam", "adacam"});
  std::string mode(to_string(t.mode));
  r.read("mode", mode);
  t.mode = wrap_enum(r.child("mode"), [&] { return parse_train_mode(mode); });
  r.read("epochs", t.epochs);
  r.read("lr", t.lr);
  r.read("classes_per_batch", t.classes_per_batch);
  r.read("samples_per_class", t.samples_per_class);
  r.read("eval_every", t.eval_every);
  r.read("encoder_dim", t.encoder_dim);
  if (r.has("base")) parse_base(ObjectReader(r.at("base"), r.child("base")), t.base);
  if (r.has("cam") && !r.is_null("cam")) t.cam = parse_cam(ObjectReader(r.at("cam"), r.child("cam")));
  if (r.has("adacam") && !r.is_null("adacam")) t.adacam = parse_adacam(ObjectReader(r.at("adacam"), r.child("adacam")));
}

void parse_eval(const ObjectReader& r, EvalConfig& e) {
  r.allow({"far_lo", "far_hi", "grid", "c", "epsilons", "ratio", "recall_ks"});
  r.read("far_lo", e.far_lo);
  r.read("far_hi", e.far_hi);
  r.read("grid", e.grid);
  r.read("c", e.c);
  r.read("epsilons", e.epsilons);
  r.read("ratio", e.ratio);
  r.read("recall_ks", e.recall_ks);
}

// 1-based line and column of a 1-based byte offset.
std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  const std::size_t end = std::min(byte == 0 ? 0 : byte - 1, text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

void validate_eval(const EvalConfig& e) {
  if (!(e.far_lo > 0.0 && e.far_lo < e.far_hi && e.far_hi < 1.0)) {
    throw ConfigError("eval: FAR band must satisfy 0 < far_lo < far_hi < 1");
  }
  if (e.grid < 2) throw ConfigError("eval.grid: need at least 2 points");
  if (!(e.c > 0.0)) throw ConfigError("eval.c: must be > 0");
  for (double eps : e.epsilons) {
    if (!(eps > 0.0 && eps <= 100.0)) throw ConfigError("eval.epsilons: values must lie in (0, 100]");
  }
  for (std::size_t k : e.recall_ks) {
    if (k == 0) throw ConfigError("eval.recall_ks: k must be >= 1");
  }
}

void RunConfig::set_seed(std::uint64_t value) {
  seed = value;
  train.seed = value;
  eval.seed = value;
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte);
    std::string reason = e.what();
    // Drop the library's own "[json.exception...] parse error at ...: " prefix.
    if (const auto at = reason.find(": "); at != std::string::npos) reason = reason.substr(at + 2);
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + reason);
  }

  RunConfig cfg;
  const ObjectReader root(doc, "");
  root.allow({"seed", "synth", "data", "train", "eval"});
  std::uint64_t seed = 0;
  root.read("seed", seed);
  if (root.has("synth") && root.has("data")) throw ConfigError("'synth' and 'data' are mutually exclusive");
  if (root.has("synth")) cfg.synth = parse_synth(ObjectReader(root.at("synth"), "synth"));
  if (root.has("data")) {
    std::string path;
    root.read("data", path);
    std::filesystem::path p(path);
    cfg.data = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
  if (root.has("train")) parse_train(ObjectReader(root.at("train"), "train"), cfg.train);
  if (root.has("eval")) parse_eval(ObjectReader(root.at("eval"), "eval"), cfg.eval);
  cfg.set_seed(seed);

  try {
    if (cfg.synth) cfg.synth->validate();
    cfg.train.validate();
  } catch (const Error& e) {
    throw ConfigError(e.detail());
  }
  validate_eval(cfg.eval);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.parent_path());
}

nlohmann::json to_json(const RunConfig& cfg) {
  json out;
  out["seed"] = cfg.seed;
  if (cfg.synth) {
    const SynthConfig& s = *cfg.synth;
    out["synth"] = {{"classes", s.classes},
                    {"kappas", s.kappas},
                    {"kappa_lo", s.kappa_lo},
                    {"kappa_hi", s.kappa_hi},
                    {"samples_per_class", s.samples_per_class},
                    {"dim", s.dim},
                    {"placement", std::string(to_string(s.placement))},
                    {"clusters", s.clusters},
                    {"cluster_kappa", s.cluster_kappa},
                    {"antipodal_kappa", s.antipodal_kappa}};
  }
  if (cfg.data) out["data"] = cfg.data->generic_string();
  const TrainConfig& t = cfg.train;
  json train = {{"mode", std::string(to_string(t.mode))},
                {"epochs", t.epochs},
                {"lr", t.lr},
                {"classes_per_batch", t.classes_per_batch},
                {"samples_per_class", t.samples_per_class},
                {"eval_every", t.eval_every},
                {"encoder_dim", t.encoder_dim},
                {"base",
                 {{"kind", std::string(to_string(t.base.kind))},
                  {"pos_margin", t.base.contrastive.pos_margin},
                  {"neg_margin", t.base.contrastive.neg_margin},
                  {"triplet_margin", t.base.triplet_margin}}}};
  train["cam"] = nullptr;
  if (t.cam) {
    train["cam"] = {{"m_plus", t.cam->m_plus},
                    {"m_minus", t.cam->m_minus},
                    {"lambda_plus", t.cam->lambda_plus},
                    {"lambda_minus", t.cam->lambda_minus}};
  }
  train["adacam"] = nullptr;
  if (t.adacam.enabled) {
    train["adacam"] = {{"finetune_epochs", t.adacam.finetune_epochs},
                       {"lr", t.adacam.lr},
                       {"lr_scale", t.adacam.lr_scale},
                       {"percentile_lo", t.adacam.percentile_lo},
                       {"percentile_hi", t.adacam.percentile_hi}};
  }
  out["train"] = std::move(train);
  const EvalConfig& e = cfg.eval;
  out["eval"] = {{"far_lo", e.far_lo}, {"far_hi", e.far_hi},     {"grid", e.grid},          {"c", e.c},
                 {"epsilons", e.epsilons}, {"ratio", e.ratio}, {"recall_ks", e.recall_ks}};
  return out;
}

}  // namespace calm::cli
