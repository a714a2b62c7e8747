#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gpn/checkpoint.hpp"
#include "gpn/datagen.hpp"
#include "gpn/rng.hpp"

using namespace gpn;
using namespace gpn::checkpoint;

namespace {

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(is), {});
}

network::NetworkInstance make_net() {
  neurons::NeuronConfig cfg;
  cfg.kind = neurons::NeuronKind::GPN;
  cfg.ablation.threshold = true;
  cfg.v_th = 1.25;
  return network::NetworkInstance(network::parse_architecture("FC10-GPN10-DP-FC4"), 7, cfg,
                                  0.25, 99);
}

}  // namespace

TEST_CASE("checkpoint round trip preserves metadata and is byte stable") {
  namespace fs = std::filesystem;
  auto net = make_net();
  auto bundle = CheckpointBundle::from_network(net, 42, 17, 0.8125);

  const auto p1 = (fs::temp_directory_path() / "ckpt1.gpnw").string();
  const auto p2 = (fs::temp_directory_path() / "ckpt2.gpnw").string();
  save_checkpoint(bundle, p1);
  auto loaded = load_checkpoint(p1);
  CHECK(loaded.architecture == "FC10-GPN10-DP-FC4");
  CHECK(loaded.neuron_cfg.kind == neurons::NeuronKind::GPN);
  CHECK(loaded.neuron_cfg.ablation.threshold);
  CHECK_FALSE(loaded.neuron_cfg.ablation.forget_input);
  CHECK(loaded.neuron_cfg.v_th == 1.25);
  CHECK(loaded.input_channels == 7);
  CHECK(loaded.dropout_rate == 0.25);
  CHECK(loaded.seed == 42);
  CHECK(loaded.epoch == 17);
  CHECK(loaded.val_accuracy == 0.8125);
  REQUIRE(loaded.params.size() == bundle.params.size());

  // save(load(x)) is byte-identical: f32 -> f64 -> f32 is exact
  save_checkpoint(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("loaded checkpoints reproduce forward outputs bit-identically") {
  namespace fs = std::filesystem;
  auto net = make_net();
  auto bundle = CheckpointBundle::from_network(net, 1, 1, 0.5);
  const auto path = (fs::temp_directory_path() / "ckpt_fwd.gpnw").string();
  save_checkpoint(bundle, path);

  auto n1 = load_checkpoint(path).to_network();
  auto n2 = load_checkpoint(path).to_network();
  Rng rng(5);
  std::vector<Tensor> xs(4, Tensor({2, 7}));
  for (auto& x : xs) {
    for (double& v : x.data) v = rng.uniform(0.0, 2.0);
  }
  autodiff::Graph g1, g2;
  auto r1 = n1.forward(g1, xs, {});
  auto r2 = n2.forward(g2, xs, {});
  for (std::size_t t = 0; t < xs.size(); ++t) {
    CHECK(r1.logits[t].tensor().data == r2.logits[t].tensor().data);
  }
  fs::remove(path);
}

TEST_CASE("checkpoint rejects corrupted containers") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "ckpt_bad.gpnw").string();
  {
    std::ofstream os(path, std::ios::binary);
    os << "WXYZ then some garbage";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);

  auto net = make_net();
  save_checkpoint(CheckpointBundle::from_network(net, 1, 1, 0.5), path);
  auto bytes = slurp(path);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  fs::remove(path);
}

TEST_CASE("checkpoint parameter snapshots override network weights") {
  auto net = make_net();
  std::vector<Tensor> snapshot;
  for (const auto& p : net.params()) {
    Tensor t = p.value;
    for (double& v : t.data) v += 1.0;
    snapshot.push_back(std::move(t));
  }
  auto bundle = CheckpointBundle::from_network(net, 1, 2, 0.25, &snapshot);
  auto rebuilt = bundle.to_network();
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    for (std::size_t j = 0; j < snapshot[i].numel(); ++j) {
      CHECK(rebuilt.params()[i].value.data[j] ==
            doctest::Approx(net.params()[i].value.data[j] + 1.0).epsilon(1e-7));
    }
  }
}

TEST_CASE("synthetic corpus: geometry, balance, determinism, order pairs") {
  datagen::SynthConfig cfg;
  cfg.channels = 60;
  cfg.classes = 6;
  cfg.phonemes = 5;
  cfg.sequences = 30;
  cfg.band_width = 6;
  cfg.seed = 3;

  auto ds = datagen::generate(cfg, 0);
  CHECK(ds.channels == 60);
  CHECK(ds.size() == 30);
  CHECK(ds.num_classes() == 6);

  // balanced labels, sorted times, units in range
  std::vector<int> counts(6, 0);
  for (const auto& s : ds.sequences) {
    ++counts[s.label];
    CHECK(std::is_sorted(s.times.begin(), s.times.end()));
    CHECK(s.num_events() > 0);
    for (double t : s.times) CHECK(t < 1.0);
    for (auto u : s.units) CHECK(u < 60);
  }
  for (int c : counts) CHECK(c == 5);

  // deterministic regeneration; different split tag differs
  auto again = datagen::generate(cfg, 0);
  REQUIRE(again.size() == ds.size());
  CHECK(again.sequences[7].times == ds.sequences[7].times);
  auto test_split = datagen::generate(cfg, 1);
  CHECK(test_split.sequences[7].times != ds.sequences[7].times);

  datagen::SynthConfig bad = cfg;
  bad.classes = 11;
  CHECK_THROWS_AS(datagen::generate(bad, 0), ConfigError);
}
