// cryptovit: keyed learnable image encryption, a desk-scale ViT that trains
// on the ciphertexts, and the associated attack/metric tooling.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cryptovit/attacks.hpp"
#include "cryptovit/cipher.hpp"
#include "cryptovit/common.hpp"
#include "cryptovit/harness.hpp"
#include "cryptovit/imaging.hpp"
#include "cryptovit/kernels.hpp"
#include "cryptovit/keyspace.hpp"
#include "cryptovit/metrics.hpp"
#include "cryptovit/vit.hpp"

namespace fs = std::filesystem;
using namespace cryptovit;

namespace {

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) fail(Errc::io_missing, "not a directory: " + dir);
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

cipher::CipherConfig cipher_config_from_flags(int patch_size, const std::string& disable) {
  cipher::CipherConfig cfg;
  cfg.patch_size = patch_size;
  std::stringstream ss(disable);
  std::string stage;
  while (std::getline(ss, stage, ',')) {
    if (stage.empty()) continue;
    if (stage == "scramble") {
      cfg.scramble = false;
    } else if (stage == "patch_shuffle") {
      cfg.patch_shuffle = false;
    } else if (stage == "negpos") {
      cfg.negpos = false;
    } else if (stage == "channel_shuffle") {
      cfg.channel_shuffle = false;
    } else {
      fail(Errc::config, "unknown stage in --disable: " + stage);
    }
  }
  return cfg;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_missing, "cannot write: " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_missing, "file not found: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

double json_metric(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cryptovit: key-dependent learnable image encryption + ViT toolkit"};
  app.require_subcommand(1);

  // ---- keygen ----
  std::string kg_client = "client-0", kg_out = "key.json";
  auto* keygen = app.add_subcommand("keygen", "create a client key from OS entropy");
  keygen->add_option("--client-id", kg_client, "client identifier");
  keygen->add_option("--out", kg_out, "output key file")->required();

  // ---- dataset synth ----
  auto* dataset = app.add_subcommand("dataset", "dataset utilities");
  dataset->require_subcommand(1);
  imaging::SynthConfig synth_cfg;
  auto* synth = dataset->add_subcommand("synth", "generate a synthetic shape dataset");
  synth->add_option("--classes", synth_cfg.n_classes, "number of classes (2-6)");
  synth->add_option("--per-class", synth_cfg.per_class, "images per class");
  synth->add_option("--size", synth_cfg.size, "image side in pixels");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--train-fraction", synth_cfg.train_fraction, "train split fraction");
  synth->add_option("--noise", synth_cfg.noise_sigma, "pixel noise sigma");
  synth->add_option("--out", synth_cfg.out_dir, "output directory")->required();

  // ---- encrypt / decrypt ----
  std::string enc_key, enc_in, enc_out, enc_disable;
  int enc_patch = 8;
  auto* encrypt = app.add_subcommand("encrypt", "encrypt every image in a directory");
  encrypt->add_option("--key", enc_key, "key file")->required();
  encrypt->add_option("--in", enc_in, "input directory")->required();
  encrypt->add_option("--out", enc_out, "output directory")->required();
  encrypt->add_option("--patch-size", enc_patch, "cipher patch size");
  encrypt->add_option("--disable", enc_disable,
                      "comma list: scramble,patch_shuffle,negpos,channel_shuffle");

  std::string dec_key, dec_in, dec_out;
  auto* decrypt = app.add_subcommand("decrypt", "decrypt a directory (uses sidecar configs)");
  decrypt->add_option("--key", dec_key, "key file")->required();
  decrypt->add_option("--in", dec_in, "input directory")->required();
  decrypt->add_option("--out", dec_out, "output directory")->required();

  // ---- attack ----
  std::string atk_type, atk_in, atk_out, atk_report, atk_manifest, atk_plain, atk_bit = "random";
  double atk_fraction = 0.1, atk_sigma = 25.0, atk_mu = 0.0;
  uint64_t atk_seed = 0;
  auto* attack = app.add_subcommand("attack", "integrity or reconstruction attacks");
  attack->add_option("--type", atk_type, "bitflip|gaussian|leadingbit|mindiff")->required();
  attack->add_option("--in", atk_in, "ciphertext directory")->required();
  attack->add_option("--out", atk_out, "output directory");
  attack->add_option("--report", atk_report, "JSON report path");
  attack->add_option("--manifest", atk_manifest, "dataset manifest (poisoning attacks)");
  attack->add_option("--plain", atk_plain, "plaintext directory (scores reconstructions)");
  attack->add_option("--fraction", atk_fraction, "poison fraction");
  attack->add_option("--sigma", atk_sigma, "gaussian sigma");
  attack->add_option("--mu", atk_mu, "gaussian mean");
  attack->add_option("--bit", atk_bit, "bit position 0-7 or 'random'");
  attack->add_option("--seed", atk_seed, "attack seed");

  // ---- metrics ----
  std::string met_a, met_b, met_a_dir, met_b_dir, met_report;
  auto* metrics_cmd = app.add_subcommand("metrics", "image comparison metrics");
  metrics_cmd->add_option("--a", met_a, "first image");
  metrics_cmd->add_option("--b", met_b, "second image");
  metrics_cmd->add_option("--a-dir", met_a_dir, "first directory (batch mode)");
  metrics_cmd->add_option("--b-dir", met_b_dir, "second directory (batch mode)");
  metrics_cmd->add_option("--report", met_report, "JSON report path");

  // ---- train / eval ----
  std::string tr_manifest, tr_key, tr_config, tr_out = "ckpt", tr_encrypted;
  uint64_t tr_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "train the ViT on encrypted images");
  train_cmd->add_option("--manifest", tr_manifest, "dataset manifest")->required();
  train_cmd->add_option("--key", tr_key, "key file (encrypts on the fly)");
  train_cmd->add_option("--encrypted-dir", tr_encrypted,
                        "pre-encrypted directory manifest already points into");
  train_cmd->add_option("--config", tr_config, "JSON file: {vit: {...}, train: {...}, cipher: {...}}");
  train_cmd->add_option("--seed", tr_seed, "training seed");
  train_cmd->add_option("--out", tr_out, "checkpoint output directory");

  std::string ev_ckpt, ev_manifest, ev_key, ev_split = "val", ev_report, ev_encrypted;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  eval_cmd->add_option("--key", ev_key, "key file (encrypts on the fly)");
  eval_cmd->add_option("--encrypted-dir", ev_encrypted, "manifest already points at ciphertexts");
  eval_cmd->add_option("--split", ev_split, "train|val");
  eval_cmd->add_option("--report", ev_report, "JSON report path");

  // ---- federate ----
  std::string fed_manifest, fed_out, fed_policy = "equal-random", fed_config;
  int fed_clients = 3;
  uint64_t fed_seed = 0;
  bool fed_shared = false;
  auto* federate = app.add_subcommand("federate", "multi-client pooled-ciphertext simulation");
  federate->add_option("--manifest", fed_manifest, "dataset manifest")->required();
  federate->add_option("--clients", fed_clients, "number of clients");
  federate->add_option("--policy", fed_policy, "equal-random|by-class");
  federate->add_option("--seed", fed_seed, "run seed");
  federate->add_option("--out", fed_out, "output directory")->required();
  federate->add_option("--config", fed_config, "JSON file: {vit: {...}, train: {...}, cipher: {...}}");
  federate->add_flag("--shared-key", fed_shared, "all clients reuse one key (ablation)");

  // ---- run / compare ----
  std::string run_manifest, run_out_override;
  bool run_force = false;
  auto* run = app.add_subcommand("run", "execute an experiment manifest");
  run->add_option("--manifest", run_manifest, "experiment manifest JSON")->required();
  run->add_option("--out", run_out_override, "override the manifest's output directory");
  run->add_flag("--force", run_force, "re-run even if a completed run exists");

  std::vector<std::string> cmp_dirs;
  auto* compare = app.add_subcommand("compare", "tabulate completed runs");
  compare->add_option("dirs", cmp_dirs, "run directories")->expected(-1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*keygen) {
      auto key = keyspace::generate_key(kg_client);
      keyspace::save_key(key, kg_out);
      std::cout << "wrote " << kg_out << " for " << kg_client << "\n";
    } else if (*synth) {
      auto manifest = imaging::generate_synthetic_dataset(synth_cfg);
      std::cout << "wrote " << manifest.items.size() << " images ("
                << manifest.classes.size() << " classes) to " << synth_cfg.out_dir << "\n";
    } else if (*encrypt) {
      auto key = keyspace::load_key(enc_key);
      auto cfg = cipher_config_from_flags(enc_patch, enc_disable);
      fs::create_directories(enc_out);
      size_t count = 0;
      for (const auto& path : list_images(enc_in)) {
        auto img = imaging::load_image(path);
        auto ct = cipher::encrypt(img, key, cfg);
        std::string out_path = (fs::path(enc_out) / fs::path(path).filename()).string();
        imaging::save_image(ct.image, out_path);
        cipher::save_sidecar(ct, out_path);
        ++count;
      }
      std::cout << "encrypted " << count << " images -> " << enc_out << "\n";
    } else if (*decrypt) {
      auto key = keyspace::load_key(dec_key);
      fs::create_directories(dec_out);
      size_t count = 0;
      for (const auto& path : list_images(dec_in)) {
        cipher::Ciphertext ct;
        ct.image = imaging::load_image(path);
        ct.config = cipher::load_sidecar(path, &ct.client_id);
        auto plain = cipher::decrypt(ct, key);
        imaging::save_image(plain, (fs::path(dec_out) / fs::path(path).filename()).string());
        ++count;
      }
      std::cout << "decrypted " << count << " images -> " << dec_out << "\n";
    } else if (*attack) {
      if (atk_type == "bitflip" || atk_type == "gaussian") {
        if (atk_manifest.empty())
          fail(Errc::config, "--manifest is required for poisoning attacks");
        if (atk_out.empty()) fail(Errc::config, "--out is required for poisoning attacks");
        attacks::PoisonPlan plan;
        plan.attack = atk_type == "bitflip" ? attacks::PoisonAttack::bit_flip
                                            : attacks::PoisonAttack::gaussian_noise;
        plan.fraction = atk_fraction;
        plan.sigma = atk_sigma;
        plan.mu = atk_mu;
        plan.seed = atk_seed;
        plan.bit_position = atk_bit == "random" ? attacks::kRandomBit : std::stoi(atk_bit);
        auto manifest = imaging::load_manifest(atk_manifest);
        auto poisoned = attacks::poison_dataset(manifest, atk_out, plan);
        std::string mpath = (fs::path(atk_out) / "manifest.json").string();
        save_manifest(poisoned, mpath);
        nlohmann::json rep;
        rep["attack"] = atk_type;
        rep["fraction"] = atk_fraction;
        nlohmann::json poisoned_list = nlohmann::json::array();
        for (size_t i = 0; i < poisoned.items.size(); ++i)
          if (poisoned.items[i].poisoned) poisoned_list.push_back(i);
        rep["poisoned_indices"] = poisoned_list;
        rep["manifest"] = mpath;
        if (!atk_report.empty()) write_json_file(rep, atk_report);
        std::cout << "poisoned " << poisoned_list.size() << " items -> " << atk_out << "\n";
      } else if (atk_type == "leadingbit" || atk_type == "mindiff") {
        if (!atk_out.empty()) fs::create_directories(atk_out);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& path : list_images(atk_in)) {
          cipher::Ciphertext ct;
          ct.image = imaging::load_image(path);
          ct.config = cipher::load_sidecar(path, &ct.client_id);
          imaging::ImageBuffer plain;
          bool have_plain = false;
          if (!atk_plain.empty()) {
            std::string ppath = (fs::path(atk_plain) / fs::path(path).filename()).string();
            if (fs::exists(ppath)) {
              plain = imaging::load_image(ppath);
              have_plain = true;
            }
          }
          auto res = atk_type == "leadingbit"
                         ? attacks::leading_bit_attack(ct, have_plain ? &plain : nullptr)
                         : attacks::minimum_difference_attack(ct, have_plain ? &plain : nullptr);
          if (!atk_out.empty())
            imaging::save_image(res.reconstructed,
                                (fs::path(atk_out) / fs::path(path).filename()).string());
          nlohmann::json row;
          row["image"] = fs::path(path).filename().string();
          if (res.psnr_vs_plain) row["psnr"] = *res.psnr_vs_plain;
          if (res.correlation_vs_plain) row["pearson"] = *res.correlation_vs_plain;
          rows.push_back(std::move(row));
        }
        if (!atk_report.empty())
          write_json_file({{"attack", atk_type}, {"images", rows}}, atk_report);
        std::cout << "attacked " << rows.size() << " ciphertexts\n";
      } else {
        fail(Errc::config, "unknown attack type: " + atk_type);
      }
    } else if (*metrics_cmd) {
      nlohmann::json rep;
      auto pair_metrics = [&](const std::string& pa, const std::string& pb) {
        auto a = imaging::load_image(pa);
        auto b = imaging::load_image(pb);
        auto [npcr, uaci] = metrics::npcr_uaci(a, b);
        double ps = metrics::psnr(a, b);
        nlohmann::json j;
        j["a"] = pa;
        j["b"] = pb;
        j["npcr"] = npcr;
        j["uaci"] = uaci;
        j["psnr"] = std::isinf(ps) ? nlohmann::json() : nlohmann::json(ps);
        j["pearson"] = json_metric(metrics::pearson(a, b));
        j["entropy_a"] = metrics::entropy(a);
        j["entropy_b"] = metrics::entropy(b);
        j["adjacency_a"] = json_metric(metrics::adjacency_correlation(a));
        j["adjacency_b"] = json_metric(metrics::adjacency_correlation(b));
        return j;
      };
      if (!met_a.empty() && !met_b.empty()) {
        rep = pair_metrics(met_a, met_b);
      } else if (!met_a_dir.empty() && !met_b_dir.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        double npcr_sum = 0, uaci_sum = 0;
        size_t n = 0;
        for (const auto& pa : list_images(met_a_dir)) {
          std::string pb = (fs::path(met_b_dir) / fs::path(pa).filename()).string();
          if (!fs::exists(pb)) continue;
          auto row = pair_metrics(pa, pb);
          npcr_sum += row["npcr"].get<double>();
          uaci_sum += row["uaci"].get<double>();
          rows.push_back(std::move(row));
          ++n;
        }
        rep["pairs"] = rows;
        if (n > 0)
          rep["aggregate"] = {{"mean_npcr", npcr_sum / n}, {"mean_uaci", uaci_sum / n},
                              {"count", n}};
      } else {
        fail(Errc::config, "metrics needs --a/--b or --a-dir/--b-dir");
      }
      if (!met_report.empty()) write_json_file(rep, met_report);
      std::cout << rep.dump(2) << "\n";
    } else if (*train_cmd) {
      auto manifest = imaging::load_manifest(tr_manifest);
      vit::ViTConfig vcfg;
      vit::Hyper hyper;
      cipher::CipherConfig ccfg;
      if (!tr_config.empty()) {
        auto j = load_json_file(tr_config);
        if (j.contains("vit")) vcfg = vit::ViTConfig::from_json(j["vit"]);
        if (j.contains("train")) hyper = vit::Hyper::from_json(j["train"]);
        if (j.contains("cipher")) ccfg = cipher::config_from_json(j["cipher"]);
      }
      vcfg.n_classes = static_cast<int>(manifest.classes.size());
      hyper.seed = tr_seed;

      std::vector<imaging::ImageBuffer> train_imgs, val_imgs;
      std::vector<int> train_labels, val_labels;
      std::optional<keyspace::ClientKey> key;
      if (!tr_key.empty()) key = keyspace::load_key(tr_key);
      for (const auto& item : manifest.items) {
        auto img = imaging::load_image(item.path);
        if (key) img = cipher::encrypt(img, *key, ccfg).image;
        if (item.split == imaging::Split::train) {
          train_imgs.push_back(std::move(img));
          train_labels.push_back(item.label);
        } else {
          val_imgs.push_back(std::move(img));
          val_labels.push_back(item.label);
        }
      }
      auto model = vit::train(train_imgs, train_labels, val_imgs, val_labels, vcfg, hyper);
      fs::create_directories(tr_out);
      vit::save_checkpoint(model.best_params, vcfg, (fs::path(tr_out) / "best.ckpt").string());
      vit::save_checkpoint(model.final_params, vcfg, (fs::path(tr_out) / "final.ckpt").string());
      write_json_file(model.report.to_json(), (fs::path(tr_out) / "train_report.json").string());
      std::cout << "best val acc " << model.report.best_val_acc << " at epoch "
                << model.report.best_epoch << "; checkpoints in " << tr_out << "\n";
    } else if (*eval_cmd) {
      auto [params, vcfg] = vit::load_checkpoint(ev_ckpt);
      auto manifest = imaging::load_manifest(ev_manifest);
      auto split = ev_split == "train" ? imaging::Split::train : imaging::Split::val;
      std::optional<keyspace::ClientKey> key;
      cipher::CipherConfig ccfg;
      if (!ev_key.empty()) key = keyspace::load_key(ev_key);
      std::vector<imaging::ImageBuffer> imgs;
      std::vector<int> labels;
      for (const auto& item : manifest.items) {
        if (item.split != split) continue;
        auto img = imaging::load_image(item.path);
        if (key) img = cipher::encrypt(img, *key, ccfg).image;
        imgs.push_back(std::move(img));
        labels.push_back(item.label);
      }
      auto res = vit::evaluate(params, vcfg, imgs, labels);
      nlohmann::json rep{{"split", ev_split},
                         {"accuracy", res.accuracy},
                         {"mean_loss", res.mean_loss},
                         {"confusion", res.confusion}};
      if (!ev_report.empty()) write_json_file(rep, ev_report);
      std::cout << rep.dump(2) << "\n";
    } else if (*federate) {
      auto manifest = imaging::load_manifest(fed_manifest);
      federation::FederationPlan plan;
      plan.n_clients = fed_clients;
      plan.policy = fed_policy == "by-class" ? federation::ShardPolicy::by_class
                                             : federation::ShardPolicy::equal_random;
      plan.shared_key = fed_shared;
      vit::ViTConfig vcfg;
      vit::Hyper hyper;
      cipher::CipherConfig ccfg;
      if (!fed_config.empty()) {
        auto j = load_json_file(fed_config);
        if (j.contains("vit")) vcfg = vit::ViTConfig::from_json(j["vit"]);
        if (j.contains("train")) hyper = vit::Hyper::from_json(j["train"]);
        if (j.contains("cipher")) ccfg = cipher::config_from_json(j["cipher"]);
      }
      vcfg.n_classes = static_cast<int>(manifest.classes.size());
      auto res = federation::run_federation(manifest, plan, ccfg, vcfg, hyper, fed_seed, fed_out);
      std::cout << "pooled val acc: " << res.pooled_val_accuracy << "\n";
      for (const auto& [id, acc] : res.per_client_val_accuracy)
        std::cout << "  " << id << ": " << acc << "\n";
      std::cout << "max server plaintext pearson: " << res.max_server_plaintext_pearson << "\n";
    } else if (*run) {
      auto manifest = harness::ExperimentManifest::load(run_manifest);
      if (!run_out_override.empty()) manifest.out_dir = run_out_override;
      auto result = harness::run_experiment(manifest, run_force);
      std::cout << "run complete: " << result.run_dir << "\n";
      std::cout << "best val acc: " << result.summary["train"]["best_val_acc"] << "\n";
    } else if (*compare) {
      auto rows = harness::compare_runs(cmp_dirs);
      std::cout << harness::format_comparison(rows);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
