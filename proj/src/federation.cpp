#include "cryptovit/federation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "cryptovit/common.hpp"
#include "cryptovit/metrics.hpp"
#include "cryptovit/rng.hpp"

namespace fs = std::filesystem;

namespace cryptovit::federation {

using imaging::DatasetItem;
using imaging::DatasetManifest;
using imaging::Split;

void FederationPlan::validate() const {
  if (n_clients < 1) fail(Errc::validation, "n_clients must be >= 1");
}

nlohmann::json FederationPlan::to_json() const {
  return nlohmann::json{
      {"clients", n_clients},
      {"policy", policy == ShardPolicy::equal_random ? "equal-random" : "by-class"},
      {"shared_key", shared_key}};
}

FederationPlan FederationPlan::from_json(const nlohmann::json& j) {
  FederationPlan p;
  p.n_clients = j.at("clients").get<int>();
  std::string pol = j.value("policy", "equal-random");
  if (pol == "equal-random") {
    p.policy = ShardPolicy::equal_random;
  } else if (pol == "by-class") {
    p.policy = ShardPolicy::by_class;
  } else {
    fail(Errc::validation, "unknown shard policy: " + pol);
  }
  p.shared_key = j.value("shared_key", false);
  p.validate();
  return p;
}

std::vector<ClientShard> split_shards(const DatasetManifest& manifest,
                                      const FederationPlan& plan, uint64_t seed) {
  plan.validate();
  manifest.validate();
  auto train_idx = manifest.indices(Split::train);
  if (static_cast<size_t>(plan.n_clients) > train_idx.size())
    fail(Errc::validation, "more clients than training items");

  std::vector<ClientShard> shards(plan.n_clients);
  for (int c = 0; c < plan.n_clients; ++c) {
    shards[c].client_id = "client-" + std::to_string(c);
    shards[c].manifest.name = manifest.name + "/" + shards[c].client_id;
    shards[c].manifest.classes = manifest.classes;
    shards[c].manifest.train_fraction = manifest.train_fraction;
    shards[c].manifest.val_fraction = manifest.val_fraction;
  }

  auto deal = [&](Split split, const char* domain) {
    auto idx = manifest.indices(split);
    if (plan.policy == ShardPolicy::equal_random) {
      if (plan.n_clients == 1) {
        // degenerate federation: keep manifest order so the run matches the
        // single-key pipeline exactly
        for (size_t k = 0; k < idx.size(); ++k)
          shards[0].manifest.items.push_back(manifest.items[idx[k]]);
        return;
      }
      rng::Rng rng(sub_seed(seed, domain), "shard-deal");
      auto order = rng.permutation(static_cast<uint32_t>(idx.size()));
      for (size_t k = 0; k < idx.size(); ++k) {
        int client = static_cast<int>(k % plan.n_clients);
        shards[client].manifest.items.push_back(manifest.items[idx[order[k]]]);
      }
    } else {
      for (size_t k = 0; k < idx.size(); ++k) {
        const auto& item = manifest.items[idx[k]];
        int client = item.label % plan.n_clients;
        shards[client].manifest.items.push_back(item);
      }
    }
  };
  deal(Split::train, "shard-train");
  deal(Split::val, "shard-val");
  return shards;
}

FederationResult run_federation(const DatasetManifest& manifest, const FederationPlan& plan,
                                const cipher::CipherConfig& ccfg, const vit::ViTConfig& vcfg,
                                const vit::Hyper& hyper, uint64_t seed,
                                const std::string& out_dir) {
  auto shards = split_shards(manifest, plan, seed);

  fs::create_directories(out_dir);
  std::string server_dir = (fs::path(out_dir) / "server").string();
  std::string server_ct_dir = (fs::path(server_dir) / "ciphertexts").string();
  fs::create_directories(server_ct_dir);

  // pooled server-side view: ciphertext paths + labels + owning client id,
  // never any key material
  DatasetManifest pooled;
  pooled.name = manifest.name + "/pooled";
  pooled.classes = manifest.classes;
  pooled.train_fraction = manifest.train_fraction;
  pooled.val_fraction = manifest.val_fraction;

  std::vector<keyspace::ClientKey> keys;
  double max_leak = 0.0;

  for (size_t c = 0; c < shards.size(); ++c) {
    auto& shard = shards[c];
    std::string client_dir = (fs::path(out_dir) / "clients" / shard.client_id).string();
    fs::create_directories(client_dir);

    keyspace::ClientKey key;
    if (plan.shared_key && c > 0) {
      key = keys[0];
      key.client_id = shard.client_id;
    } else {
      // client secrets within a simulation are derived from the run seed so
      // the whole experiment reproduces from one number
      rng::Rng key_rng(sub_seed(seed, "client-key-" + shard.client_id), "client-key");
      std::array<uint8_t, 32> secret{};
      for (auto& b : secret) b = key_rng.next_byte();
      key = keyspace::make_key(secret, shard.client_id);
    }
    keys.push_back(key);
    shard.key_file = (fs::path(client_dir) / "key.json").string();
    keyspace::save_key(key, shard.key_file);

    shard.ciphertext_dir = (fs::path(client_dir) / "ciphertexts").string();
    fs::create_directories(shard.ciphertext_dir);

    for (const auto& item : shard.manifest.items) {
      imaging::ImageBuffer plain = imaging::load_image(item.path);
      cipher::Ciphertext ct = cipher::encrypt(plain, key, ccfg);
      std::string name = fs::path(item.path).filename().string();
      std::string client_path = (fs::path(shard.ciphertext_dir) / name).string();
      imaging::save_image(ct.image, client_path);
      cipher::save_sidecar(ct, client_path);

      // "upload": copy into the server pool under a client-prefixed name
      std::string server_name = shard.client_id + "_" + name;
      std::string server_path = (fs::path(server_ct_dir) / server_name).string();
      fs::copy_file(client_path, server_path, fs::copy_options::overwrite_existing);
      fs::copy_file(cipher::sidecar_path(client_path), cipher::sidecar_path(server_path),
                    fs::copy_options::overwrite_existing);

      if (auto r = metrics::pearson(ct.image, plain))
        max_leak = std::max(max_leak, std::abs(*r));

      DatasetItem pooled_item = item;
      pooled_item.path = server_path;
      pooled_item.client_id = shard.client_id;
      pooled.items.push_back(std::move(pooled_item));
    }
  }

  std::string pooled_manifest_path = (fs::path(server_dir) / "manifest.json").string();
  save_manifest(pooled, pooled_manifest_path);

  // train one global model on the pooled ciphertexts
  std::vector<imaging::ImageBuffer> train_imgs, val_imgs;
  std::vector<int> train_labels, val_labels;
  std::vector<std::string> val_clients;
  for (const auto& item : pooled.items) {
    imaging::ImageBuffer img = imaging::load_image(item.path);
    if (item.split == Split::train) {
      train_imgs.push_back(std::move(img));
      train_labels.push_back(item.label);
    } else {
      val_imgs.push_back(std::move(img));
      val_labels.push_back(item.label);
      val_clients.push_back(item.client_id);
    }
  }

  vit::Hyper hp = hyper;
  hp.seed = sub_seed(seed, "train");
  vit::TrainedModel model = vit::train(train_imgs, train_labels, val_imgs, val_labels, vcfg, hp);

  FederationResult res;
  res.report = model.report;
  res.server_dir = server_dir;
  res.max_server_plaintext_pearson = max_leak;

  res.checkpoint_path = (fs::path(server_dir) / "best.ckpt").string();
  vit::save_checkpoint(model.best_params, vcfg, res.checkpoint_path);

  vit::EvalResult pooled_eval = vit::evaluate(model.best_params, vcfg, val_imgs, val_labels);
  res.pooled_val_accuracy = pooled_eval.accuracy;

  for (const auto& shard : shards) {
    std::vector<imaging::ImageBuffer> imgs;
    std::vector<int> labels;
    for (size_t i = 0; i < val_imgs.size(); ++i) {
      if (val_clients[i] == shard.client_id) {
        imgs.push_back(val_imgs[i]);
        labels.push_back(val_labels[i]);
      }
    }
    if (imgs.empty()) {
      res.per_client_val_accuracy.emplace_back(shard.client_id, 0.0);
      continue;
    }
    vit::EvalResult ev = vit::evaluate(model.best_params, vcfg, imgs, labels);
    res.per_client_val_accuracy.emplace_back(shard.client_id, ev.accuracy);
  }
  return res;
}

}  // namespace cryptovit::federation
