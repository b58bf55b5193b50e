#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "cryptovit/attacks.hpp"
#include "cryptovit/cipher.hpp"
#include "cryptovit/federation.hpp"
#include "cryptovit/imaging.hpp"
#include "cryptovit/vit.hpp"

namespace cryptovit::harness {

// Declarative description of one run. All randomness flows from `seed`
// through documented sub-seed derivation (docs/FORMATS.md); hashing the
// manifest yields the run identity stamped into every report.
struct ExperimentManifest {
  std::string name;
  uint64_t seed = 0;
  std::string out_dir;

  // dataset: either synthesize or point at an existing manifest.json
  std::optional<imaging::SynthConfig> synth;
  std::optional<std::string> dataset_manifest_path;

  cipher::CipherConfig cipher_cfg;
  vit::ViTConfig vit_cfg;
  vit::Hyper hyper;

  std::optional<attacks::PoisonPlan> attack;
  std::optional<federation::FederationPlan> federation_plan;

  bool reconstruction = true;  // run leading-bit + min-diff scoring on val samples
  int reconstruction_images = 50;
  int security_images = 8;

  nlohmann::json to_json() const;
  static ExperimentManifest from_json(const nlohmann::json& j);  // validating loader
  static ExperimentManifest load(const std::string& path);
  uint64_t hash() const;
};

struct RunResult {
  std::string run_dir;
  nlohmann::json summary;
};

// Executes dataset prep -> encryption -> optional poisoning -> training ->
// evaluation -> optional reconstruction attacks -> metrics, writing a
// machine-readable summary plus a plain-text report. A completed run
// directory with a matching manifest hash is reused unless force is set.
RunResult run_experiment(const ExperimentManifest& manifest, bool force = false);

// Table mirroring the poisoning-sweep schema:
// (attack type, fraction, train acc %, val acc %).
struct ComparisonRow {
  std::string name;
  std::string attack;
  double fraction = 0;
  double train_acc = 0;
  double val_acc = 0;
};

std::vector<ComparisonRow> compare_runs(const std::vector<std::string>& run_dirs);
std::string format_comparison(const std::vector<ComparisonRow>& rows);

// Strips volatile fields (timing, absolute paths) so two runs of the same
// manifest can be compared for exact equality.
nlohmann::json deterministic_view(const nlohmann::json& summary);

}  // namespace cryptovit::harness
