#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "embedrul/common.hpp"
#include "embedrul/synth.hpp"

namespace embedrul {

/// Minimal INI-style text: [section] headers, key = value lines, full-line
/// # or ; comments. Sections and keys keep file order; duplicate keys are
/// a config error.
struct IniFile {
  using Section = std::vector<std::pair<std::string, std::string>>;
  std::vector<std::pair<std::string, Section>> sections;

  bool has(const std::string& section, const std::string& key) const;
  const std::string* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key,
           const std::string& value);
};

IniFile parse_ini(std::istream& in);
void write_ini(std::ostream& out, const IniFile& ini);

/// How RUL is scored from a model.
enum class ScorerKind {
  embed,      // distance of window embeddings to the normal set
  recon,      // masked reconstruction error per window
  embed_lr1,  // pointwise linear fit to normalized embedding curves
  embed_lr2,  // same, squared targets
  recon_lr1,
  recon_lr2,
};
ScorerKind parse_scorer(const std::string& name);
const char* scorer_name(ScorerKind kind);

/// Fully resolved run configuration. Field names follow the symbols used
/// throughout the interfaces (p, L, c, d, w, tau, alpha, r_max, lambda,
/// beta, tau1, tau2). Defaults are the tuned engine-fleet values.
struct RunConfig {
  // [data]
  std::string format = "cmapss";  // cmapss | csv
  std::string train_path;
  std::string test_path;
  std::string rul_path;
  double constant_tol = 1e-8;
  bool standardize = true;
  int mask_delta = -1;  // -1 auto (on iff data has gaps), 0 off, 1 on
  double downsample_bucket = 0.0;  // 0 disables

  // [model]
  std::size_t p = 2;   // principal components; 0 disables the projection
  std::size_t L = 1;   // recurrent layers
  std::vector<std::size_t> c = {55};  // hidden widths (1 entry broadcasts)
  double d = 0.2;      // non-recurrent dropout
  std::size_t w = 30;  // window length
  bool reverse_decode = true;

  // [train]
  std::string optimizer = "adam";  // adam | sgd
  double lr = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch = 32;
  double clip = 10.0;
  std::uint64_t seed = 42;
  std::size_t stride = 1;  // training-window stride; scoring always uses 1
  bool squared_loss = true;

  // [health]
  double beta = 0.25;
  ScorerKind scorer = ScorerKind::embed;
  bool lr_on_reduced = true;

  // [match]
  std::size_t tau = 30;
  double alpha = 0.95;
  double lambda = 0.005;
  double r_max = 120.0;
  bool literal_norm = false;

  // [metrics]
  double tau1 = 13.0;
  double tau2 = 10.0;

  // [validate]
  double val_fraction = 0.2;
  std::size_t truncations = 5;
  std::uint64_t val_seed = 7;

  // [estimate]
  std::size_t cadence = 0;  // 0: final point only; k: every k-th step from w

  // [synth]
  SynthConfig synth;
  std::size_t synth_test_instances = 10;

  // [grid]
  std::string grid_objective = "mse";  // mse | s
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;

  std::vector<std::size_t> layer_sizes() const;  // c broadcast against L
  void validate() const;                         // cross-field checks
};

/// Applies an INI onto the defaults. Unknown sections or keys, duplicate
/// keys, and malformed values are config errors.
RunConfig config_from_ini(const IniFile& ini);

/// Serializes every field (grid included) with round-trip precision, so a
/// rerun from the echoed file reproduces the run bit for bit.
IniFile config_to_ini(const RunConfig& config);

/// Applies one "section.key" override (the CLI's --set). Grid keys use the
/// same dotted form.
void apply_override(IniFile& ini, const std::string& dotted_key,
                    const std::string& value);

RunConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const RunConfig& config);

}  // namespace embedrul
