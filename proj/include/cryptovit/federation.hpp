#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryptovit/cipher.hpp"
#include "cryptovit/imaging.hpp"
#include "cryptovit/vit.hpp"

namespace cryptovit::federation {

enum class ShardPolicy { equal_random, by_class };

struct FederationPlan {
  int n_clients = 1;
  ShardPolicy policy = ShardPolicy::equal_random;
  bool shared_key = false;  // all clients reuse client 0's key (ablation)

  void validate() const;
  nlohmann::json to_json() const;
  static FederationPlan from_json(const nlohmann::json& j);
};

struct ClientShard {
  std::string client_id;
  std::string key_file;
  std::string ciphertext_dir;
  imaging::DatasetManifest manifest;  // this client's subset (train + val)
};

// Deterministic seeded partition of the manifest's train and val items.
// equal-random deals a seeded shuffle round-robin; by-class assigns whole
// classes to clients (class c -> client c mod n).
std::vector<ClientShard> split_shards(const imaging::DatasetManifest& manifest,
                                      const FederationPlan& plan, uint64_t seed);

struct FederationResult {
  vit::TrainReport report;
  double pooled_val_accuracy = 0;
  std::vector<std::pair<std::string, double>> per_client_val_accuracy;
  double max_server_plaintext_pearson = 0;  // leak scan over server images
  std::string server_dir;
  std::string checkpoint_path;
};

// Fig-1 style run: every client encrypts its shard under its own key, the
// server pools ciphertexts and trains one global model, and validation is
// encrypted per-client under the owning client's key.
FederationResult run_federation(const imaging::DatasetManifest& manifest,
                                const FederationPlan& plan, const cipher::CipherConfig& ccfg,
                                const vit::ViTConfig& vcfg, const vit::Hyper& hyper,
                                uint64_t seed, const std::string& out_dir);

}  // namespace cryptovit::federation
