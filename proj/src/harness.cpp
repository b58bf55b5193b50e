#include "cryptovit/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cryptovit/common.hpp"
#include "cryptovit/keyspace.hpp"
#include "cryptovit/metrics.hpp"
#include "cryptovit/rng.hpp"

namespace fs = std::filesystem;

namespace cryptovit::harness {

using imaging::DatasetManifest;
using imaging::ImageBuffer;
using imaging::Split;

// --- manifest ---------------------------------------------------------------

namespace {

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional, const std::string& ctx) {
  for (const char* k : required)
    if (!j.contains(k)) fail(Errc::validation, ctx + ": missing required key '" + k + "'");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : required)
      if (it.key() == k) known = true;
    for (const char* k : optional)
      if (it.key() == k) known = true;
    if (!known) fail(Errc::validation, ctx + ": unknown key '" + it.key() + "'");
  }
}

attacks::PoisonPlan poison_plan_from_json(const nlohmann::json& j) {
  require_keys(j, {"type", "fraction"}, {"sigma", "mu", "bit"}, "attack");
  attacks::PoisonPlan plan;
  std::string type = j.at("type").get<std::string>();
  if (type == "bitflip") {
    plan.attack = attacks::PoisonAttack::bit_flip;
  } else if (type == "gaussian") {
    plan.attack = attacks::PoisonAttack::gaussian_noise;
  } else {
    fail(Errc::validation, "attack.type must be bitflip or gaussian, got: " + type);
  }
  plan.fraction = j.at("fraction").get<double>();
  plan.sigma = j.value("sigma", 25.0);
  plan.mu = j.value("mu", 0.0);
  if (j.contains("bit")) {
    if (j["bit"].is_string()) {
      if (j["bit"].get<std::string>() != "random")
        fail(Errc::validation, "attack.bit must be 0..7 or \"random\"");
      plan.bit_position = attacks::kRandomBit;
    } else {
      plan.bit_position = j["bit"].get<int>();
    }
  }
  plan.validate();
  return plan;
}

nlohmann::json poison_plan_to_json(const attacks::PoisonPlan& plan) {
  nlohmann::json j;
  j["type"] = plan.attack == attacks::PoisonAttack::bit_flip ? "bitflip" : "gaussian";
  j["fraction"] = plan.fraction;
  j["sigma"] = plan.sigma;
  j["mu"] = plan.mu;
  if (plan.bit_position == attacks::kRandomBit) {
    j["bit"] = "random";
  } else {
    j["bit"] = plan.bit_position;
  }
  return j;
}

}  // namespace

nlohmann::json ExperimentManifest::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["seed"] = seed;
  if (!out_dir.empty()) j["out"] = out_dir;
  if (synth) {
    j["dataset"] = {{"synth",
                     {{"classes", synth->n_classes},
                      {"per_class", synth->per_class},
                      {"size", synth->size},
                      {"noise_sigma", synth->noise_sigma},
                      {"train_fraction", synth->train_fraction},
                      {"contrast", synth->contrast}}}};
  } else {
    j["dataset"] = {{"manifest", dataset_manifest_path.value_or("")}};
  }
  j["cipher"] = cipher::config_to_json(cipher_cfg);
  j["vit"] = vit_cfg.to_json();
  j["train"] = hyper.to_json();
  if (attack) j["attack"] = poison_plan_to_json(*attack);
  if (federation_plan) j["federation"] = federation_plan->to_json();
  j["reconstruction"] = {{"enabled", reconstruction},
                         {"images", reconstruction_images},
                         {"security_images", security_images}};
  return j;
}

ExperimentManifest ExperimentManifest::from_json(const nlohmann::json& j) {
  require_keys(j, {"name", "seed", "dataset", "cipher", "vit", "train"},
               {"out", "attack", "federation", "reconstruction"}, "manifest");
  ExperimentManifest m;
  m.name = j.at("name").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.out_dir = j.value("out", std::string());

  const auto& ds = j.at("dataset");
  require_keys(ds, {}, {"synth", "manifest"}, "dataset");
  if (ds.contains("synth")) {
    const auto& s = ds["synth"];
    require_keys(s, {"classes", "per_class", "size"},
                 {"noise_sigma", "train_fraction", "contrast"}, "dataset.synth");
    imaging::SynthConfig sc;
    sc.n_classes = s.at("classes").get<int>();
    sc.per_class = s.at("per_class").get<int>();
    sc.size = s.at("size").get<int>();
    sc.noise_sigma = s.value("noise_sigma", 4.0);
    sc.train_fraction = s.value("train_fraction", 0.8);
    sc.contrast = s.value("contrast", 1.0);
    m.synth = sc;
  } else if (ds.contains("manifest")) {
    m.dataset_manifest_path = ds["manifest"].get<std::string>();
  } else {
    fail(Errc::validation, "dataset must specify either synth or manifest");
  }

  m.cipher_cfg = cipher::config_from_json(j.at("cipher"));
  m.vit_cfg = vit::ViTConfig::from_json(j.at("vit"));
  m.hyper = vit::Hyper::from_json(j.at("train"));
  if (j.contains("attack")) m.attack = poison_plan_from_json(j["attack"]);
  if (j.contains("federation")) m.federation_plan = federation::FederationPlan::from_json(j["federation"]);
  if (j.contains("reconstruction")) {
    const auto& r = j["reconstruction"];
    require_keys(r, {}, {"enabled", "images", "security_images"}, "reconstruction");
    m.reconstruction = r.value("enabled", true);
    m.reconstruction_images = r.value("images", 50);
    m.security_images = r.value("security_images", 8);
  }
  return m;
}

ExperimentManifest ExperimentManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_missing, "experiment manifest not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_corrupt, "malformed experiment manifest " + path + ": " + e.what());
  }
  return from_json(j);
}

uint64_t ExperimentManifest::hash() const {
  nlohmann::json j = to_json();
  j.erase("out");  // the output location does not change what the run computes
  return fnv1a64(j.dump());
}

// --- run_experiment -----------------------------------------------------------

namespace {

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_missing, "cannot write: " + path);
  out << j.dump(2) << "\n";
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct LoadedSplit {
  std::vector<ImageBuffer> images;
  std::vector<int> labels;
};

LoadedSplit load_split(const DatasetManifest& m, Split s) {
  LoadedSplit out;
  for (const auto& item : m.items) {
    if (item.split != s) continue;
    out.images.push_back(imaging::load_image(item.path));
    out.labels.push_back(item.label);
  }
  return out;
}

// per-key encryption of every manifest item into dir; returns the updated manifest
DatasetManifest encrypt_dataset(const DatasetManifest& m, const keyspace::ClientKey& key,
                                const cipher::CipherConfig& ccfg, const std::string& dir) {
  fs::create_directories(dir);
  DatasetManifest out = m;
  for (auto& item : out.items) {
    ImageBuffer plain = imaging::load_image(item.path);
    cipher::Ciphertext ct = cipher::encrypt(plain, key, ccfg);
    std::string name = fs::path(item.path).filename().string();
    std::string out_path = (fs::path(dir) / name).string();
    imaging::save_image(ct.image, out_path);
    cipher::save_sidecar(ct, out_path);
    item.path = out_path;
  }
  return out;
}

keyspace::ClientKey derive_client_key(uint64_t seed, const std::string& client_id) {
  rng::Rng key_rng(sub_seed(seed, "client-key-" + client_id), "client-key");
  std::array<uint8_t, 32> secret{};
  for (auto& b : secret) b = key_rng.next_byte();
  return keyspace::make_key(secret, client_id);
}

nlohmann::json aggregate_reconstruction(const DatasetManifest& plain_manifest,
                                        const DatasetManifest& enc_manifest, int max_images,
                                        nlohmann::json* per_image_out) {
  auto val_idx = enc_manifest.indices(Split::val);
  int n = std::min<int>(max_images, static_cast<int>(val_idx.size()));

  double lb_psnr_sum = 0, lb_pear_sum = 0, lb_psnr_max = -1e300, lb_pear_max = 0;
  double md_psnr_sum = 0, md_pear_sum = 0, md_psnr_max = -1e300, md_pear_max = 0;
  nlohmann::json rows = nlohmann::json::array();

  for (int i = 0; i < n; ++i) {
    const auto& enc_item = enc_manifest.items[val_idx[i]];
    const auto& plain_item = plain_manifest.items[val_idx[i]];
    ImageBuffer plain = imaging::load_image(plain_item.path);
    cipher::Ciphertext ct;
    ct.image = imaging::load_image(enc_item.path);
    ct.config = cipher::load_sidecar(enc_item.path, &ct.client_id);

    auto lb = attacks::leading_bit_attack(ct, &plain);
    auto md = attacks::minimum_difference_attack(ct, &plain);

    double lb_psnr = lb.psnr_vs_plain.value_or(0);
    double lb_pear = std::abs(lb.correlation_vs_plain.value_or(0));
    double md_psnr = md.psnr_vs_plain.value_or(0);
    double md_pear = std::abs(md.correlation_vs_plain.value_or(0));
    lb_psnr_sum += lb_psnr;
    lb_pear_sum += lb_pear;
    md_psnr_sum += md_psnr;
    md_pear_sum += md_pear;
    lb_psnr_max = std::max(lb_psnr_max, lb_psnr);
    lb_pear_max = std::max(lb_pear_max, lb_pear);
    md_psnr_max = std::max(md_psnr_max, md_psnr);
    md_pear_max = std::max(md_pear_max, md_pear);

    rows.push_back({{"image", fs::path(plain_item.path).filename().string()},
                    {"leading_bit", {{"psnr", lb_psnr}, {"abs_pearson", lb_pear}}},
                    {"minimum_difference", {{"psnr", md_psnr}, {"abs_pearson", md_pear}}}});
  }
  if (per_image_out) *per_image_out = rows;
  if (n == 0) return nullptr;
  return nlohmann::json{
      {"images", n},
      {"leading_bit",
       {{"mean_psnr", lb_psnr_sum / n},
        {"max_psnr", lb_psnr_max},
        {"mean_abs_pearson", lb_pear_sum / n},
        {"max_abs_pearson", lb_pear_max}}},
      {"minimum_difference",
       {{"mean_psnr", md_psnr_sum / n},
        {"max_psnr", md_psnr_max},
        {"mean_abs_pearson", md_pear_sum / n},
        {"max_abs_pearson", md_pear_max}}}};
}

nlohmann::json security_metrics(const DatasetManifest& plain_manifest,
                                const DatasetManifest& enc_manifest,
                                const cipher::CipherConfig& ccfg, uint64_t seed, int max_images) {
  auto val_idx = enc_manifest.indices(Split::val);
  int n = std::min<int>(max_images, static_cast<int>(val_idx.size()));
  if (n == 0) return nullptr;

  keyspace::ClientKey key_b = derive_client_key(seed, "security-alt");

  double npcr_sum = 0, uaci_sum = 0, ent_plain_sum = 0, ent_ct_sum = 0;
  double adj_plain_sum = 0, adj_ct_sum = 0, pear_sum = 0, psnr_sum = 0;
  int adj_count = 0;
  for (int i = 0; i < n; ++i) {
    const auto& enc_item = enc_manifest.items[val_idx[i]];
    const auto& plain_item = plain_manifest.items[val_idx[i]];
    ImageBuffer plain = imaging::load_image(plain_item.path);
    ImageBuffer ct = imaging::load_image(enc_item.path);

    // key sensitivity: same plaintext under an unrelated key
    cipher::Ciphertext ct_b = cipher::encrypt(plain, key_b, ccfg);
    auto [npcr, uaci] = metrics::npcr_uaci(ct, ct_b.image);
    npcr_sum += npcr;
    uaci_sum += uaci;

    ent_plain_sum += metrics::entropy(plain);
    ent_ct_sum += metrics::entropy(ct);
    auto ap = metrics::adjacency_correlation(plain);
    auto ac = metrics::adjacency_correlation(ct);
    if (ap && ac) {
      adj_plain_sum += *ap;
      adj_ct_sum += *ac;
      ++adj_count;
    }
    pear_sum += std::abs(metrics::pearson(ct, plain).value_or(0));
    double p = metrics::psnr(ct, plain);
    psnr_sum += std::isinf(p) ? 100.0 : p;
  }
  return nlohmann::json{{"images", n},
                        {"key_sensitivity_npcr", npcr_sum / n},
                        {"key_sensitivity_uaci", uaci_sum / n},
                        {"entropy_plain", ent_plain_sum / n},
                        {"entropy_ciphertext", ent_ct_sum / n},
                        {"adjacency_plain", adj_count ? adj_plain_sum / adj_count : 0.0},
                        {"adjacency_ciphertext", adj_count ? adj_ct_sum / adj_count : 0.0},
                        {"abs_pearson_ct_vs_plain", pear_sum / n},
                        {"psnr_ct_vs_plain", psnr_sum / n}};
}

void write_curves_csv(const vit::TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_missing, "cannot write: " + path);
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << "," << e.train_loss << "," << e.train_acc << "," << e.val_loss << ","
        << e.val_acc << "\n";
  }
}

}  // namespace

nlohmann::json deterministic_view(const nlohmann::json& summary) {
  nlohmann::json v = summary;
  v.erase("timing");
  v.erase("paths");
  return v;
}

RunResult run_experiment(const ExperimentManifest& manifest, bool force) {
  if (manifest.out_dir.empty()) fail(Errc::validation, "manifest has no output directory");
  const std::string run_dir = manifest.out_dir;
  const std::string reports_dir = (fs::path(run_dir) / "reports").string();
  const std::string summary_path = (fs::path(reports_dir) / "summary.json").string();
  const uint64_t mhash = manifest.hash();

  // reuse a completed identical run
  if (!force && fs::exists(summary_path)) {
    std::ifstream in(summary_path);
    nlohmann::json existing;
    in >> existing;
    if (existing.value("manifest_hash", "") == hash_hex(mhash) &&
        existing.value("complete", false)) {
      return {run_dir, existing};
    }
  }

  auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(run_dir);
  fs::create_directories(reports_dir);
  write_json(manifest.to_json(), (fs::path(run_dir) / "manifest.json").string());

  auto stage_fail = [&](const std::string& stage, const std::string& what) {
    fail(Errc::validation, "[stage " + stage + "] " + what);
  };

  // ---- dataset ----
  DatasetManifest plain_manifest;
  try {
    if (manifest.synth) {
      imaging::SynthConfig sc = *manifest.synth;
      sc.seed = sub_seed(manifest.seed, "dataset");
      sc.out_dir = (fs::path(run_dir) / "dataset").string();
      plain_manifest = imaging::generate_synthetic_dataset(sc);
    } else {
      plain_manifest = imaging::load_manifest(*manifest.dataset_manifest_path);
    }
  } catch (const Error& e) {
    stage_fail("dataset", e.what());
  }
  if (static_cast<int>(plain_manifest.classes.size()) != manifest.vit_cfg.n_classes)
    stage_fail("dataset", "vit.n_classes does not match the dataset class count");

  nlohmann::json summary;
  summary["manifest_hash"] = hash_hex(mhash);
  summary["version"] = kVersion;
  summary["name"] = manifest.name;
  summary["seed"] = manifest.seed;
  summary["dataset"] = {{"classes", plain_manifest.classes},
                        {"n_train", plain_manifest.indices(Split::train).size()},
                        {"n_val", plain_manifest.indices(Split::val).size()}};
  summary["cipher"] = cipher::config_to_json(manifest.cipher_cfg);
  summary["attack"] = manifest.attack ? poison_plan_to_json(*manifest.attack) : nlohmann::json();
  summary["complete"] = false;

  DatasetManifest enc_manifest;
  vit::TrainReport train_report;
  std::string ckpt_path;
  nlohmann::json eval_json;

  if (!manifest.federation_plan) {
    // ---- single-key pipeline ----
    keyspace::ClientKey key = derive_client_key(manifest.seed, "client-0");
    fs::create_directories((fs::path(run_dir) / "keys").string());
    keyspace::save_key(key, (fs::path(run_dir) / "keys" / "client-0.json").string());

    try {
      enc_manifest = encrypt_dataset(plain_manifest, key, manifest.cipher_cfg,
                                     (fs::path(run_dir) / "ciphertexts").string());
      save_manifest(enc_manifest,
                    (fs::path(run_dir) / "ciphertexts" / "manifest.json").string());
    } catch (const Error& e) {
      stage_fail("encrypt", e.what());
    }

    DatasetManifest train_manifest = enc_manifest;
    if (manifest.attack) {
      try {
        attacks::PoisonPlan plan = *manifest.attack;
        plan.seed = sub_seed(manifest.seed, "poison");
        train_manifest = attacks::poison_dataset(enc_manifest,
                                                 (fs::path(run_dir) / "poisoned").string(), plan);
        save_manifest(train_manifest,
                      (fs::path(run_dir) / "poisoned" / "manifest.json").string());
        size_t n_poisoned = 0;
        for (const auto& it : train_manifest.items)
          if (it.poisoned) ++n_poisoned;
        summary["attack"]["poisoned_count"] = n_poisoned;
      } catch (const Error& e) {
        stage_fail("poison", e.what());
      }
    }

    try {
      LoadedSplit train_split = load_split(train_manifest, Split::train);
      LoadedSplit val_split = load_split(train_manifest, Split::val);
      vit::Hyper hp = manifest.hyper;
      hp.seed = sub_seed(manifest.seed, "train");
      vit::TrainedModel model = vit::train(train_split.images, train_split.labels,
                                           val_split.images, val_split.labels,
                                           manifest.vit_cfg, hp);
      train_report = model.report;
      fs::create_directories((fs::path(run_dir) / "ckpt").string());
      ckpt_path = (fs::path(run_dir) / "ckpt" / "best.ckpt").string();
      vit::save_checkpoint(model.best_params, manifest.vit_cfg, ckpt_path);
      vit::save_checkpoint(model.final_params, manifest.vit_cfg,
                           (fs::path(run_dir) / "ckpt" / "final.ckpt").string());

      vit::EvalResult ev =
          vit::evaluate(model.best_params, manifest.vit_cfg, val_split.images, val_split.labels);
      eval_json = {{"val_accuracy", ev.accuracy},
                   {"val_loss", ev.mean_loss},
                   {"confusion", ev.confusion}};
    } catch (const Error& e) {
      stage_fail("train", e.what());
    }
  } else {
    // ---- federation pipeline ----
    try {
      federation::FederationResult fres = federation::run_federation(
          plain_manifest, *manifest.federation_plan, manifest.cipher_cfg, manifest.vit_cfg,
          manifest.hyper, manifest.seed, run_dir);
      train_report = fres.report;
      ckpt_path = fres.checkpoint_path;
      enc_manifest =
          imaging::load_manifest((fs::path(fres.server_dir) / "manifest.json").string());
      nlohmann::json per_client = nlohmann::json::array();
      for (const auto& [id, acc] : fres.per_client_val_accuracy)
        per_client.push_back({{"client", id}, {"val_accuracy", acc}});
      summary["federation"] = {{"clients", manifest.federation_plan->n_clients},
                               {"shared_key", manifest.federation_plan->shared_key},
                               {"pooled_val_accuracy", fres.pooled_val_accuracy},
                               {"per_client", per_client},
                               {"max_server_plaintext_pearson",
                                fres.max_server_plaintext_pearson}};
      eval_json = {{"val_accuracy", fres.pooled_val_accuracy}};
    } catch (const Error& e) {
      stage_fail("federation", e.what());
    }
  }

  summary["train"] = {{"epochs", train_report.epochs.size()},
                      {"best_epoch", train_report.best_epoch},
                      {"best_val_acc", train_report.best_val_acc},
                      {"final_val_acc",
                       train_report.epochs.empty() ? 0.0 : train_report.epochs.back().val_acc},
                      {"final_train_acc",
                       train_report.epochs.empty() ? 0.0 : train_report.epochs.back().train_acc},
                      {"backend", train_report.backend},
                      {"deterministic", train_report.deterministic},
                      {"seed", train_report.seed},
                      {"config_hash", hash_hex(train_report.config_hash)}};
  summary["eval"] = eval_json;

  write_json(train_report.to_json(), (fs::path(reports_dir) / "train_report.json").string());
  write_curves_csv(train_report, (fs::path(reports_dir) / "curves.csv").string());

  // ---- reconstruction attacks + security metrics ----
  try {
    if (manifest.reconstruction) {
      nlohmann::json per_image;
      summary["reconstruction"] = aggregate_reconstruction(
          plain_manifest, enc_manifest, manifest.reconstruction_images, &per_image);
      write_json(per_image, (fs::path(reports_dir) / "attacks.json").string());
    } else {
      summary["reconstruction"] = nullptr;
    }
    summary["security"] = security_metrics(plain_manifest, enc_manifest, manifest.cipher_cfg,
                                           manifest.seed, manifest.security_images);
    write_json(summary["security"], (fs::path(reports_dir) / "security.json").string());
  } catch (const Error& e) {
    stage_fail("metrics", e.what());
  }

  summary["complete"] = true;
  summary["timing"] = {
      {"wall_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
      {"train_wall_seconds", train_report.wall_seconds}};
  summary["paths"] = {{"run_dir", run_dir}, {"checkpoint", ckpt_path}};

  write_json(summary, summary_path);

  // plain-text companion
  {
    std::ofstream txt((fs::path(reports_dir) / "report.txt").string());
    txt << "run: " << manifest.name << "  (manifest " << hash_hex(mhash) << ")\n";
    txt << "seed: " << manifest.seed << "\n";
    txt << "dataset: " << plain_manifest.classes.size() << " classes, "
        << summary["dataset"]["n_train"] << " train / " << summary["dataset"]["n_val"]
        << " val\n";
    if (manifest.attack)
      txt << "attack: " << summary["attack"]["type"].get<std::string>() << " fraction "
          << manifest.attack->fraction << "\n";
    txt << "best val acc: " << train_report.best_val_acc << " (epoch "
        << train_report.best_epoch << ")\n";
    if (summary["reconstruction"].is_object()) {
      txt << "leading-bit mean PSNR: "
          << summary["reconstruction"]["leading_bit"]["mean_psnr"] << " dB\n";
      txt << "min-diff mean PSNR: "
          << summary["reconstruction"]["minimum_difference"]["mean_psnr"] << " dB\n";
    }
    txt << "kernel backend: " << train_report.backend << "\n";
  }

  return {run_dir, summary};
}

// --- compare -----------------------------------------------------------------

std::vector<ComparisonRow> compare_runs(const std::vector<std::string>& run_dirs) {
  if (run_dirs.size() < 2) fail(Errc::validation, "compare needs at least two run directories");
  std::vector<ComparisonRow> rows;
  for (const auto& dir : run_dirs) {
    std::string path = (fs::path(dir) / "reports" / "summary.json").string();
    std::ifstream in(path);
    if (!in) fail(Errc::io_missing, "incomplete run directory (no summary): " + dir);
    nlohmann::json s;
    try {
      in >> s;
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::io_corrupt, "malformed summary in " + dir + ": " + e.what());
    }
    if (!s.value("complete", false)) fail(Errc::validation, "incomplete run: " + dir);
    ComparisonRow row;
    row.name = s.value("name", dir);
    if (s.contains("attack") && s["attack"].is_object()) {
      row.attack = s["attack"].value("type", "none");
      row.fraction = s["attack"].value("fraction", 0.0);
    } else {
      row.attack = "none";
      row.fraction = 0.0;
    }
    row.val_acc = s["train"].value("best_val_acc", 0.0);
    // train accuracy at the best epoch, mirroring the reported pair
    int best_epoch = s["train"].value("best_epoch", 0);
    row.train_acc = s["train"].value("final_train_acc", 0.0);
    std::ifstream tr((fs::path(dir) / "reports" / "train_report.json").string());
    if (tr) {
      nlohmann::json trj;
      tr >> trj;
      for (const auto& e : trj["epochs"])
        if (e["epoch"].get<int>() == best_epoch) row.train_acc = e["train_acc"].get<double>();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_comparison(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "attack      fraction  train_acc%  val_acc%  name\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-10s  %7.0f%%  %9.1f  %8.1f  %s\n", r.attack.c_str(),
                  r.fraction * 100.0, r.train_acc * 100.0, r.val_acc * 100.0, r.name.c_str());
    out << line;
  }
  return out.str();
}

}  // namespace cryptovit::harness
