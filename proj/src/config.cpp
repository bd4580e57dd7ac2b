#include "embedrul/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace embedrul {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad(const std::string& msg) { fail(ErrorKind::config_error, msg); }

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v))
    bad(key + ": expected a number, got '" + value + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    bad(key + ": expected a non-negative integer, got '" + value + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad(key + ": expected true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : value) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

bool IniFile::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

const std::string* IniFile::find(const std::string& section,
                                 const std::string& key) const {
  for (const auto& [name, entries] : sections) {
    if (name != section) continue;
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
  }
  return nullptr;
}

void IniFile::set(const std::string& section, const std::string& key,
                  const std::string& value) {
  for (auto& [name, entries] : sections) {
    if (name != section) continue;
    for (auto& [k, v] : entries)
      if (k == key) {
        v = value;
        return;
      }
    entries.emplace_back(key, value);
    return;
  }
  sections.emplace_back(section, Section{{key, value}});
}

IniFile parse_ini(std::istream& in) {
  IniFile ini;
  std::string line;
  std::size_t line_no = 0;
  std::string section;
  bool section_open = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        bad("line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (section.empty())
        bad("line " + std::to_string(line_no) + ": empty section name");
      ini.sections.emplace_back(section, IniFile::Section{});
      section_open = true;
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      bad("line " + std::to_string(line_no) + ": expected key = value");
    if (!section_open)
      bad("line " + std::to_string(line_no) + ": key outside any section");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) bad("line " + std::to_string(line_no) + ": empty key");
    for (const auto& [k, v] : ini.sections.back().second)
      if (k == key)
        bad("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    ini.sections.back().second.emplace_back(key, value);
  }
  return ini;
}

void write_ini(std::ostream& out, const IniFile& ini) {
  bool first = true;
  for (const auto& [name, entries] : ini.sections) {
    if (!first) out << "\n";
    first = false;
    out << "[" << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  }
}

ScorerKind parse_scorer(const std::string& name) {
  if (name == "embed") return ScorerKind::embed;
  if (name == "recon") return ScorerKind::recon;
  if (name == "embed-lr1") return ScorerKind::embed_lr1;
  if (name == "embed-lr2") return ScorerKind::embed_lr2;
  if (name == "recon-lr1") return ScorerKind::recon_lr1;
  if (name == "recon-lr2") return ScorerKind::recon_lr2;
  bad("unknown scorer '" + name + "'");
}

const char* scorer_name(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::embed: return "embed";
    case ScorerKind::recon: return "recon";
    case ScorerKind::embed_lr1: return "embed-lr1";
    case ScorerKind::embed_lr2: return "embed-lr2";
    case ScorerKind::recon_lr1: return "recon-lr1";
    case ScorerKind::recon_lr2: return "recon-lr2";
  }
  return "unknown";
}

std::vector<std::size_t> RunConfig::layer_sizes() const {
  if (c.size() == 1) return std::vector<std::size_t>(L, c[0]);
  return c;
}

void RunConfig::validate() const {
  if (format != "cmapss" && format != "csv")
    bad("data.format must be cmapss or csv");
  if (constant_tol < 0.0) bad("data.constant_tol must be >= 0");
  if (mask_delta < -1 || mask_delta > 1) bad("data.mask_delta must be auto/on/off");
  if (downsample_bucket < 0.0) bad("data.downsample_bucket must be >= 0");
  if (L == 0) bad("model.L must be >= 1");
  if (c.empty() || (c.size() != 1 && c.size() != L))
    bad("model.c must list 1 or L hidden widths");
  for (std::size_t width : c)
    if (width == 0) bad("model.c entries must be >= 1");
  if (!(d >= 0.0 && d < 1.0)) bad("model.d must be in [0, 1)");
  if (w == 0) bad("model.w must be >= 1");
  if (optimizer != "adam" && optimizer != "sgd")
    bad("train.optimizer must be adam or sgd");
  if (!(lr > 0.0)) bad("train.lr must be > 0");
  if (batch == 0) bad("train.batch must be >= 1");
  if (stride == 0) bad("train.stride must be >= 1");
  if (!(beta > 0.0 && beta <= 1.0)) bad("health.beta must be in (0, 1]");
  if (tau == 0) bad("match.tau must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) bad("match.alpha must be in [0, 1]");
  if (!(lambda > 0.0)) bad("match.lambda must be > 0");
  if (r_max < 0.0) bad("match.r_max must be >= 0");
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) bad("metrics.tau1/tau2 must be > 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    bad("validate.fraction must be in (0, 1)");
  if (truncations == 0) bad("validate.truncations must be >= 1");
  if (grid_objective != "mse" && grid_objective != "s")
    bad("grid.objective must be mse or s");
  if (mask_delta == 1 && p > 0)
    bad("model.p > 0 cannot be combined with mask_delta = on; "
        "the projection needs fully-present rows (set p = 0)");
}

namespace {

struct Reader {
  const IniFile& ini;
  std::vector<std::pair<std::string, std::string>> seen;

  const std::string* get(const std::string& section, const std::string& key) {
    seen.emplace_back(section, key);
    return ini.find(section, key);
  }

  bool consumed(const std::string& section, const std::string& key) const {
    for (const auto& [s, k] : seen)
      if (s == section && k == key) return true;
    return false;
  }
};

}  // namespace

RunConfig config_from_ini(const IniFile& ini) {
  RunConfig cfg;
  Reader reader{ini, {}};
  auto str = [&](const char* s, const char* k, std::string& out) {
    if (const std::string* v = reader.get(s, k)) out = *v;
  };
  auto dbl = [&](const char* s, const char* k, double& out) {
    if (const std::string* v = reader.get(s, k))
      out = to_double(std::string(s) + "." + k, *v);
  };
  auto u64 = [&](const char* s, const char* k, std::uint64_t& out) {
    if (const std::string* v = reader.get(s, k))
      out = to_u64(std::string(s) + "." + k, *v);
  };
  auto sz = [&](const char* s, const char* k, std::size_t& out) {
    if (const std::string* v = reader.get(s, k))
      out = std::size_t(to_u64(std::string(s) + "." + k, *v));
  };
  auto bl = [&](const char* s, const char* k, bool& out) {
    if (const std::string* v = reader.get(s, k))
      out = to_bool(std::string(s) + "." + k, *v);
  };

  str("data", "format", cfg.format);
  str("data", "train", cfg.train_path);
  str("data", "test", cfg.test_path);
  str("data", "rul", cfg.rul_path);
  dbl("data", "constant_tol", cfg.constant_tol);
  bl("data", "standardize", cfg.standardize);
  if (const std::string* v = reader.get("data", "mask_delta")) {
    if (*v == "auto")
      cfg.mask_delta = -1;
    else if (*v == "on")
      cfg.mask_delta = 1;
    else if (*v == "off")
      cfg.mask_delta = 0;
    else
      bad("data.mask_delta must be auto, on, or off");
  }
  dbl("data", "downsample_bucket", cfg.downsample_bucket);

  sz("model", "p", cfg.p);
  sz("model", "L", cfg.L);
  if (const std::string* v = reader.get("model", "c")) {
    cfg.c.clear();
    for (const std::string& item : split_list(*v))
      cfg.c.push_back(std::size_t(to_u64("model.c", item)));
  }
  dbl("model", "d", cfg.d);
  sz("model", "w", cfg.w);
  bl("model", "reverse_decode", cfg.reverse_decode);

  str("train", "optimizer", cfg.optimizer);
  dbl("train", "lr", cfg.lr);
  sz("train", "epochs", cfg.epochs);
  sz("train", "batch", cfg.batch);
  dbl("train", "clip", cfg.clip);
  u64("train", "seed", cfg.seed);
  sz("train", "stride", cfg.stride);
  bl("train", "squared_loss", cfg.squared_loss);

  dbl("health", "beta", cfg.beta);
  if (const std::string* v = reader.get("health", "scorer"))
    cfg.scorer = parse_scorer(*v);
  bl("health", "lr_on_reduced", cfg.lr_on_reduced);

  sz("match", "tau", cfg.tau);
  dbl("match", "alpha", cfg.alpha);
  dbl("match", "lambda", cfg.lambda);
  dbl("match", "r_max", cfg.r_max);
  bl("match", "literal_norm", cfg.literal_norm);

  dbl("metrics", "tau1", cfg.tau1);
  dbl("metrics", "tau2", cfg.tau2);

  dbl("validate", "fraction", cfg.val_fraction);
  sz("validate", "truncations", cfg.truncations);
  u64("validate", "seed", cfg.val_seed);

  sz("estimate", "cadence", cfg.cadence);

  sz("synth", "instances", cfg.synth.instances);
  sz("synth", "test_instances", cfg.synth_test_instances);
  sz("synth", "sensors", cfg.synth.sensors);
  sz("synth", "life_min", cfg.synth.life_min);
  sz("synth", "life_max", cfg.synth.life_max);
  dbl("synth", "rho", cfg.synth.onset_fraction);
  dbl("synth", "drift", cfg.synth.drift_magnitude);
  bl("synth", "quadratic_drift", cfg.synth.quadratic_drift);
  dbl("synth", "noise_sigma", cfg.synth.noise_sigma);
  dbl("synth", "missing_prob", cfg.synth.missing_prob);
  u64("synth", "seed", cfg.synth.seed);
  str("synth", "id_prefix", cfg.synth.id_prefix);

  if (const std::string* v = reader.get("grid", "objective"))
    cfg.grid_objective = *v;
  for (const auto& [name, entries] : ini.sections) {
    if (name != "grid") continue;
    for (const auto& [key, value] : entries) {
      if (key == "objective") continue;
      reader.seen.emplace_back("grid", key);
      if (key.find('.') == std::string::npos)
        bad("grid." + key + ": grid keys use the dotted section.key form");
      cfg.grid.emplace_back(key, split_list(value));
    }
  }

  for (const auto& [name, entries] : ini.sections)
    for (const auto& [key, value] : entries)
      if (!reader.consumed(name, key))
        bad("unknown key '" + name + "." + key + "'");

  cfg.validate();
  return cfg;
}

IniFile config_to_ini(const RunConfig& cfg) {
  IniFile ini;
  auto set = [&](const std::string& s, const std::string& k,
                 const std::string& v) { ini.set(s, k, v); };
  set("data", "format", cfg.format);
  set("data", "train", cfg.train_path);
  set("data", "test", cfg.test_path);
  set("data", "rul", cfg.rul_path);
  set("data", "constant_tol", format_double(cfg.constant_tol));
  set("data", "standardize", cfg.standardize ? "true" : "false");
  set("data", "mask_delta",
      cfg.mask_delta == -1 ? "auto" : (cfg.mask_delta == 1 ? "on" : "off"));
  set("data", "downsample_bucket", format_double(cfg.downsample_bucket));

  set("model", "p", std::to_string(cfg.p));
  set("model", "L", std::to_string(cfg.L));
  {
    std::string list;
    for (std::size_t i = 0; i < cfg.c.size(); ++i) {
      if (i) list += ",";
      list += std::to_string(cfg.c[i]);
    }
    set("model", "c", list);
  }
  set("model", "d", format_double(cfg.d));
  set("model", "w", std::to_string(cfg.w));
  set("model", "reverse_decode", cfg.reverse_decode ? "true" : "false");

  set("train", "optimizer", cfg.optimizer);
  set("train", "lr", format_double(cfg.lr));
  set("train", "epochs", std::to_string(cfg.epochs));
  set("train", "batch", std::to_string(cfg.batch));
  set("train", "clip", format_double(cfg.clip));
  set("train", "seed", std::to_string(cfg.seed));
  set("train", "stride", std::to_string(cfg.stride));
  set("train", "squared_loss", cfg.squared_loss ? "true" : "false");

  set("health", "beta", format_double(cfg.beta));
  set("health", "scorer", scorer_name(cfg.scorer));
  set("health", "lr_on_reduced", cfg.lr_on_reduced ? "true" : "false");

  set("match", "tau", std::to_string(cfg.tau));
  set("match", "alpha", format_double(cfg.alpha));
  set("match", "lambda", format_double(cfg.lambda));
  set("match", "r_max", format_double(cfg.r_max));
  set("match", "literal_norm", cfg.literal_norm ? "true" : "false");

  set("metrics", "tau1", format_double(cfg.tau1));
  set("metrics", "tau2", format_double(cfg.tau2));

  set("validate", "fraction", format_double(cfg.val_fraction));
  set("validate", "truncations", std::to_string(cfg.truncations));
  set("validate", "seed", std::to_string(cfg.val_seed));

  set("estimate", "cadence", std::to_string(cfg.cadence));

  set("synth", "instances", std::to_string(cfg.synth.instances));
  set("synth", "test_instances", std::to_string(cfg.synth_test_instances));
  set("synth", "sensors", std::to_string(cfg.synth.sensors));
  set("synth", "life_min", std::to_string(cfg.synth.life_min));
  set("synth", "life_max", std::to_string(cfg.synth.life_max));
  set("synth", "rho", format_double(cfg.synth.onset_fraction));
  set("synth", "drift", format_double(cfg.synth.drift_magnitude));
  set("synth", "quadratic_drift", cfg.synth.quadratic_drift ? "true" : "false");
  set("synth", "noise_sigma", format_double(cfg.synth.noise_sigma));
  set("synth", "missing_prob", format_double(cfg.synth.missing_prob));
  set("synth", "seed", std::to_string(cfg.synth.seed));
  set("synth", "id_prefix", cfg.synth.id_prefix);

  if (!cfg.grid.empty() || cfg.grid_objective != "mse") {
    set("grid", "objective", cfg.grid_objective);
    for (const auto& [key, values] : cfg.grid) {
      std::string list;
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) list += ",";
        list += values[i];
      }
      set("grid", key, list);
    }
  }
  return ini;
}

void apply_override(IniFile& ini, const std::string& dotted_key,
                    const std::string& value) {
  const std::size_t dotpos = dotted_key.find('.');
  if (dotpos == std::string::npos || dotpos == 0 ||
      dotpos + 1 == dotted_key.size())
    bad("override '" + dotted_key + "' must use the section.key form");
  ini.set(dotted_key.substr(0, dotpos), dotted_key.substr(dotpos + 1), value);
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open config file '" + path + "'");
  return config_from_ini(parse_ini(in));
}

void save_config_file(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) bad("cannot write config file '" + path + "'");
  write_ini(out, config_to_ini(config));
  if (!out.flush()) bad("failed writing config file '" + path + "'");
}

}  // namespace embedrul
