#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "cryptovit/common.hpp"
#include "cryptovit/federation.hpp"
#include "cryptovit/imaging.hpp"
#include "cryptovit/metrics.hpp"
#include "cryptovit/rng.hpp"

using namespace cryptovit;
using federation::FederationPlan;
using federation::ShardPolicy;
using imaging::Split;

namespace fs = std::filesystem;

namespace {

imaging::DatasetManifest synthetic_manifest(const std::string& tag, int classes, int per_class,
                                            int size, uint64_t seed) {
  auto dir = fs::temp_directory_path() / ("cryptovit_fed_" + tag);
  fs::remove_all(dir);
  imaging::SynthConfig cfg;
  cfg.n_classes = classes;
  cfg.per_class = per_class;
  cfg.size = size;
  cfg.seed = seed;
  cfg.out_dir = dir.string();
  return imaging::generate_synthetic_dataset(cfg);
}

// label-only manifest without files, for shard arithmetic tests
imaging::DatasetManifest fake_manifest(int n_train, int n_val, int classes) {
  imaging::DatasetManifest m;
  m.name = "fake";
  for (int c = 0; c < classes; ++c) m.classes.push_back("c" + std::to_string(c));
  for (int i = 0; i < n_train + n_val; ++i) {
    imaging::DatasetItem item;
    item.path = "img" + std::to_string(i) + ".png";
    item.label = i % classes;
    item.split = i < n_train ? Split::train : Split::val;
    m.items.push_back(item);
  }
  return m;
}

}  // namespace

TEST_SUITE("federation") {

TEST_CASE("split_shards: single client preserves the manifest order") {
  auto m = fake_manifest(40, 10, 2);
  FederationPlan plan;
  plan.n_clients = 1;
  auto shards = federation::split_shards(m, plan, 1);
  REQUIRE(shards.size() == 1);
  REQUIRE(shards[0].manifest.items.size() == 50);
  // train items first, in manifest order, then val items
  for (int i = 0; i < 40; ++i) CHECK(shards[0].manifest.items[i].path == m.items[i].path);
}

TEST_CASE("split_shards: equal-random gives balanced disjoint covering shards") {
  auto m = fake_manifest(200, 40, 4);
  FederationPlan plan;
  plan.n_clients = 4;
  auto shards = federation::split_shards(m, plan, 2);
  REQUIRE(shards.size() == 4);

  std::multiset<std::string> all;
  for (const auto& s : shards) {
    int train_count = 0;
    for (const auto& item : s.manifest.items) {
      if (item.split == Split::train) ++train_count;
      all.insert(item.path);
    }
    CHECK(train_count == 50);
  }
  CHECK(all.size() == 240);
  std::set<std::string> unique(all.begin(), all.end());
  CHECK(unique.size() == 240);  // disjoint + covering

  // determinism
  auto again = federation::split_shards(m, plan, 2);
  for (size_t c = 0; c < shards.size(); ++c)
    for (size_t i = 0; i < shards[c].manifest.items.size(); ++i)
      CHECK(again[c].manifest.items[i].path == shards[c].manifest.items[i].path);

  // different seed, different deal
  auto other = federation::split_shards(m, plan, 3);
  bool any_diff = false;
  for (size_t i = 0; i < shards[0].manifest.items.size(); ++i)
    if (other[0].manifest.items[i].path != shards[0].manifest.items[i].path) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("split_shards: by-class isolates classes per client") {
  auto m = fake_manifest(200, 40, 4);
  FederationPlan plan;
  plan.n_clients = 4;
  plan.policy = ShardPolicy::by_class;
  auto shards = federation::split_shards(m, plan, 4);
  for (size_t c = 0; c < 4; ++c) {
    for (const auto& item : shards[c].manifest.items)
      CHECK(item.label == static_cast<int>(c));
  }
}

TEST_CASE("split_shards: more clients than training items is an error") {
  auto m = fake_manifest(3, 1, 2);
  FederationPlan plan;
  plan.n_clients = 5;
  CHECK_THROWS_AS(federation::split_shards(m, plan, 1), Error);
}

TEST_CASE("run_federation: pooled training, key isolation, no plaintext leak") {
  auto manifest = synthetic_manifest("run", 2, 20, 16, 77);
  FederationPlan plan;
  plan.n_clients = 3;

  cipher::CipherConfig ccfg;
  ccfg.patch_size = 8;
  vit::ViTConfig vcfg;
  vcfg.image_size = 16;
  vcfg.patch_size = 8;
  vcfg.embed_dim = 16;
  vcfg.depth = 1;
  vcfg.heads = 2;
  vcfg.n_classes = 2;
  vit::Hyper hp;
  hp.epochs = 2;
  hp.batch_size = 8;

  auto out = fs::temp_directory_path() / "cryptovit_fedout_run";
  fs::remove_all(out);
  auto res = federation::run_federation(manifest, plan, ccfg, vcfg, hp, 5, out.string());

  // directory layout
  CHECK(fs::exists(out / "clients" / "client-0" / "key.json"));
  CHECK(fs::exists(out / "clients" / "client-1" / "ciphertexts"));
  CHECK(fs::exists(out / "server" / "manifest.json"));
  CHECK(fs::exists(res.checkpoint_path));

  // keys never leave the client directories; the server manifest records
  // client ids only
  CHECK(!fs::exists(out / "server" / "key.json"));
  auto pooled = imaging::load_manifest((out / "server" / "manifest.json").string());
  for (const auto& item : pooled.items) {
    CHECK(!item.client_id.empty());
    CHECK(item.path.find("server") != std::string::npos);
  }
  std::ifstream pm((out / "server" / "manifest.json").string());
  std::string text((std::istreambuf_iterator<char>(pm)), std::istreambuf_iterator<char>());
  CHECK(text.find("secret") == std::string::npos);

  // leak scan: nothing on the server side resembles its plaintext
  CHECK(res.max_server_plaintext_pearson < 0.3);

  // distinct keys: the same image encrypted by two clients disagrees
  auto k0 = keyspace::load_key((out / "clients" / "client-0" / "key.json").string());
  auto k1 = keyspace::load_key((out / "clients" / "client-1" / "key.json").string());
  CHECK(k0.secret != k1.secret);

  CHECK(res.per_client_val_accuracy.size() == 3);
}

TEST_CASE("run_federation: one client reproduces the single-key pipeline") {
  auto manifest = synthetic_manifest("single", 2, 20, 16, 88);
  cipher::CipherConfig ccfg;
  ccfg.patch_size = 8;
  vit::ViTConfig vcfg;
  vcfg.image_size = 16;
  vcfg.patch_size = 8;
  vcfg.embed_dim = 16;
  vcfg.depth = 1;
  vcfg.heads = 2;
  vcfg.n_classes = 2;
  vit::Hyper hp;
  hp.epochs = 2;
  hp.batch_size = 8;

  FederationPlan plan;
  plan.n_clients = 1;
  auto out1 = fs::temp_directory_path() / "cryptovit_fedout_one_a";
  fs::remove_all(out1);
  auto res1 = federation::run_federation(manifest, plan, ccfg, vcfg, hp, 9, out1.string());
  auto out2 = fs::temp_directory_path() / "cryptovit_fedout_one_b";
  fs::remove_all(out2);
  auto res2 = federation::run_federation(manifest, plan, ccfg, vcfg, hp, 9, out2.string());

  // same seed, same result, reproducible end to end
  CHECK(res1.pooled_val_accuracy == res2.pooled_val_accuracy);
  for (size_t e = 0; e < res1.report.epochs.size(); ++e) {
    CHECK(res1.report.epochs[e].train_loss == res2.report.epochs[e].train_loss);
    CHECK(res1.report.epochs[e].val_acc == res2.report.epochs[e].val_acc);
  }
}

TEST_CASE("shared-key mode encrypts every shard under one secret") {
  auto manifest = synthetic_manifest("shared", 2, 20, 16, 99);
  cipher::CipherConfig ccfg;
  ccfg.patch_size = 8;
  vit::ViTConfig vcfg;
  vcfg.image_size = 16;
  vcfg.patch_size = 8;
  vcfg.embed_dim = 16;
  vcfg.depth = 1;
  vcfg.heads = 2;
  vcfg.n_classes = 2;
  vit::Hyper hp;
  hp.epochs = 1;
  hp.batch_size = 8;

  FederationPlan plan;
  plan.n_clients = 2;
  plan.shared_key = true;
  auto out = fs::temp_directory_path() / "cryptovit_fedout_shared";
  fs::remove_all(out);
  federation::run_federation(manifest, plan, ccfg, vcfg, hp, 10, out.string());
  auto k0 = keyspace::load_key((out / "clients" / "client-0" / "key.json").string());
  auto k1 = keyspace::load_key((out / "clients" / "client-1" / "key.json").string());
  CHECK(k0.secret == k1.secret);
}

}  // TEST_SUITE
