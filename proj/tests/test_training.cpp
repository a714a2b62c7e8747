#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gpn/training.hpp"
#include "gpn/rng.hpp"

using namespace gpn;
using namespace gpn::autodiff;
using namespace gpn::train;

namespace {

data::SpikeDataset random_spike_dataset(std::size_t n, std::uint16_t channels,
                                        std::size_t classes, std::size_t events,
                                        std::uint64_t seed) {
  Rng rng(seed);
  data::SpikeDataset ds;
  ds.channels = channels;
  for (std::size_t i = 0; i < n; ++i) {
    data::SpikeEventSequence s;
    s.label = static_cast<std::uint16_t>(rng.uniform_index(classes));
    for (std::size_t e = 0; e < events; ++e) s.times.push_back(rng.uniform(0.0, 1.0));
    std::sort(s.times.begin(), s.times.end());
    for (std::size_t e = 0; e < events; ++e) {
      s.units.push_back(static_cast<std::uint16_t>(rng.uniform_index(channels)));
    }
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

neurons::NeuronConfig default_cfg() {
  neurons::NeuronConfig c;
  c.beta = 0.5;
  c.alpha = 0.5;
  c.v_th = 1.0;
  return c;
}

}  // namespace

TEST_CASE("compute_loss: modes coincide for T=1 and for constant outputs") {
  Rng rng(3);
  Tensor o({2, 5});
  for (double& v : o.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> labels = {2, 4};
  {
    Graph g;
    std::vector<Value> logits = {g.constant(o)};
    auto a = compute_loss(g, logits, labels, LossMode::AllStep);
    auto b = compute_loss(g, logits, labels, LossMode::LastStep);
    CHECK(a.tensor().data[0] == b.tensor().data[0]);
  }
  {
    Graph g;
    std::vector<Value> logits = {g.constant(o), g.constant(o), g.constant(o)};
    auto a = compute_loss(g, logits, labels, LossMode::AllStep);
    auto b = compute_loss(g, logits, labels, LossMode::LastStep);
    CHECK(a.tensor().data[0] == doctest::Approx(b.tensor().data[0]).epsilon(1e-14));
  }
}

TEST_CASE("last-step loss sends no direct gradient to earlier outputs") {
  Rng rng(5);
  Graph g;
  std::vector<Value> logits;
  for (int t = 0; t < 4; ++t) {
    Tensor o({1, 3});
    for (double& v : o.data) v = rng.uniform(-1.0, 1.0);
    logits.push_back(g.leaf(o, true));
  }
  auto loss = compute_loss(g, logits, {1}, LossMode::LastStep);
  g.backward(loss);
  for (int t = 0; t < 3; ++t) {
    for (double v : logits[t].grad().data) CHECK(v == 0.0);
  }
  bool nonzero = false;
  for (double v : logits[3].grad().data) nonzero = nonzero || v != 0.0;
  CHECK(nonzero);
}

TEST_CASE("probability-averaging flag changes the all-step loss as expected") {
  // With identical outputs at every step both variants coincide; with
  // differing outputs the probability average is a different (valid) loss.
  Rng rng(7);
  Tensor o1({1, 4}), o2({1, 4});
  for (double& v : o1.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : o2.data) v = rng.uniform(-1.0, 1.0);
  Graph g;
  std::vector<Value> same = {g.constant(o1), g.constant(o1)};
  auto a = compute_loss(g, same, {0}, LossMode::AllStep, false);
  auto b = compute_loss(g, same, {0}, LossMode::AllStep, true);
  CHECK(a.tensor().data[0] == doctest::Approx(b.tensor().data[0]).epsilon(1e-12));

  std::vector<Value> diff = {g.constant(o1), g.constant(o2)};
  auto c = compute_loss(g, diff, {0}, LossMode::AllStep, false);
  auto d = compute_loss(g, diff, {0}, LossMode::AllStep, true);
  CHECK(c.tensor().data[0] != d.tensor().data[0]);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<network::Param> params;
  params.push_back({"w", Tensor({2, 2}, {1, 2, 3, 4})});
  AdamState st;
  st.init(params);
  adam_step(params, {Tensor::zeros({2, 2})}, st, 1e-3);
  CHECK(params[0].value.data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("adam: first-step displacement matches the closed form") {
  // hand-computed: m_hat = 1, v_hat = 1, delta = -lr / sqrt(1 + eps)
  std::vector<network::Param> params;
  params.push_back({"w", Tensor::scalar(0.0)});
  AdamState st;
  st.init(params);
  adam_step(params, {Tensor::scalar(1.0)}, st, 1e-3);
  const double expect = -1e-3 / std::sqrt(1.0 + 1e-8);
  CHECK(params[0].value.data[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(params[0].value.data[0] == doctest::Approx(-9.99999995e-4).epsilon(1e-10));

  // a second identical step moves by roughly -lr again
  const double before = params[0].value.data[0];
  adam_step(params, {Tensor::scalar(1.0)}, st, 1e-3);
  const double delta2 = params[0].value.data[0] - before;
  CHECK(delta2 == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam: non-finite gradient aborts") {
  std::vector<network::Param> params;
  params.push_back({"w", Tensor::scalar(0.0)});
  AdamState st;
  st.init(params);
  CHECK_THROWS_AS(
      adam_step(params, {Tensor::scalar(std::numeric_limits<double>::infinity())}, st, 1e-3),
      NumericError);
}

TEST_CASE("lr schedule: plateau detection and floor") {
  {
    LossPlateauLr s(1e-3, 0.5, 3, 1e-3, 1e-6);
    double loss = 10.0;
    for (int e = 0; e < 20; ++e) {
      CHECK(s.observe(loss) == 1e-3);  // strictly decreasing: never decays
      loss *= 0.9;
    }
  }
  {
    LossPlateauLr s(1e-3, 0.5, 3, 1e-3, 1e-6);
    s.observe(10.0);
    s.observe(5.0);
    CHECK(s.lr() == 1e-3);
    s.observe(5.0);
    s.observe(5.0);
    CHECK(s.lr() == 1e-3);  // two stale epochs: not yet
    s.observe(5.0);
    CHECK(s.lr() == doctest::Approx(5e-4));  // third stale epoch decays once
    s.observe(4.999);                         // within 1e-3 relative: still stale
    s.observe(5.0);
    s.observe(5.0);
    CHECK(s.lr() == doctest::Approx(2.5e-4));
  }
  {
    LossPlateauLr s(1e-5, 0.1, 1, 1e-3, 1e-6);
    for (int e = 0; e < 10; ++e) s.observe(1.0);
    CHECK(s.lr() == 1e-6);  // clamped at the floor
  }
}

TEST_CASE("one step at a tiny rate strictly decreases the batch loss") {
  auto ds = random_spike_dataset(8, 12, 4, 60, 11);
  neurons::NeuronConfig ncfg = default_cfg();
  ncfg.activation = ActivationMode::Smooth;
  network::NetworkInstance net(network::parse_architecture("FC10-GPN10-FC4"), 12, ncfg, 0.0, 5);

  std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5, 6, 7};
  const auto inputs = assemble_step_inputs(ds, rows, 5, false,
                                           data::RollGranularity::PerStep, 0, 0);
  const auto labels = gather_labels(ds, rows);

  auto batch_loss = [&](bool with_grad, std::vector<Tensor>* grads) {
    Graph g;
    network::ForwardOptions opt;
    opt.requires_grad = with_grad;
    auto fwd = net.forward(g, inputs, opt);
    auto loss = compute_loss(g, fwd.logits, labels, LossMode::AllStep);
    if (with_grad) {
      g.backward(loss);
      grads->clear();
      for (Value pv : fwd.params) grads->push_back(pv.grad());
    }
    return loss.tensor().data[0];
  };

  std::vector<Tensor> grads;
  const double before = batch_loss(true, &grads);
  AdamState st;
  st.init(net.params());
  adam_step(net.params(), grads, st, 1e-5);
  const double after = batch_loss(false, nullptr);
  CHECK(after < before);
}

TEST_CASE("training memorizes a small random-label set") {
  auto ds = random_spike_dataset(40, 16, 10, 50, 23);
  network::NetworkInstance net(network::parse_architecture("FC32-GPN32-FC10"), 16,
                               default_cfg(), 0.0, 1);
  TrainConfig cfg;
  cfg.steps = 6;
  cfg.lr = 4e-3;
  cfg.batch_size = 8;
  cfg.max_epochs = 80;
  cfg.seed = 1;
  cfg.augment = false;
  cfg.val_fraction = 0.1;
  cfg.early_stop_patience = 80;  // run to max; we watch train accuracy
  auto result = gpn::train::train(net, ds, cfg);
  CHECK_FALSE(result.diverged);
  // train accuracy: the reserved validation samples have unlearnable labels
  const auto split = data::split_train_val(ds.size(), cfg.val_fraction, cfg.seed);
  const auto end_state = evaluate(net, ds, split.train, cfg.steps, cfg.batch_size);
  CHECK(end_state.accuracy >= 0.95);
}

TEST_CASE("early stopping halts one epoch after the first with a frozen rate") {
  auto ds = random_spike_dataset(30, 10, 4, 40, 31);
  network::NetworkInstance net(network::parse_architecture("FC8-LIF8-FC4"), 10, default_cfg(),
                               0.0, 2);
  TrainConfig cfg;
  cfg.steps = 4;
  cfg.lr = 1e-300;  // effectively frozen
  cfg.batch_size = 16;
  cfg.max_epochs = 50;
  cfg.early_stop_patience = 1;
  cfg.seed = 3;
  cfg.augment = false;
  auto result = gpn::train::train(net, ds, cfg);
  CHECK(result.epochs_run == 2);
  CHECK(result.best_epoch == 1);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  auto ds = random_spike_dataset(30, 10, 4, 60, 41);
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.lr = 1e-3;
  cfg.batch_size = 10;
  cfg.max_epochs = 3;
  cfg.seed = 7;
  cfg.early_stop_patience = 10;

  network::NetworkInstance n1(network::parse_architecture("FC12-GPN12-DP-FC4"), 10,
                              default_cfg(), 0.25, 9);
  network::NetworkInstance n2(network::parse_architecture("FC12-GPN12-DP-FC4"), 10,
                              default_cfg(), 0.25, 9);
  auto r1 = gpn::train::train(n1, ds, cfg);
  auto r2 = gpn::train::train(n2, ds, cfg);

  REQUIRE(r1.metrics.rows.size() == r2.metrics.rows.size());
  for (std::size_t i = 0; i < r1.metrics.rows.size(); ++i) {
    CHECK(r1.metrics.rows[i].train_loss == r2.metrics.rows[i].train_loss);
    CHECK(r1.metrics.rows[i].val_acc == r2.metrics.rows[i].val_acc);
  }
  for (std::size_t p = 0; p < n1.params().size(); ++p) {
    CHECK(n1.params()[p].value.data == n2.params()[p].value.data);
  }
}

TEST_CASE("best checkpoint never has lower validation accuracy than any epoch") {
  auto ds = random_spike_dataset(60, 12, 5, 60, 51);
  network::NetworkInstance net(network::parse_architecture("FC10-LIF10-FC5"), 12,
                               default_cfg(), 0.0, 4);
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.lr = 2e-3;
  cfg.batch_size = 16;
  cfg.max_epochs = 8;
  cfg.seed = 5;
  cfg.augment = false;
  auto result = gpn::train::train(net, ds, cfg);
  for (const auto& r : result.metrics.rows) CHECK(result.best_val_acc >= r.val_acc);
}

TEST_CASE("evaluate: perfect and constant predictors") {
  // one active channel per class makes a hand-built perfect classifier
  data::SpikeDataset ds;
  ds.channels = 6;
  for (int c = 0; c < 6; ++c) {
    for (int k = 0; k < 3; ++k) {
      data::SpikeEventSequence s;
      s.label = static_cast<std::uint16_t>(c);
      for (int e = 0; e < 10; ++e) {
        s.times.push_back(0.05 * (e + 1));
        s.units.push_back(static_cast<std::uint16_t>(c));
      }
      ds.sequences.push_back(std::move(s));
    }
  }
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  network::NetworkInstance perfect(network::parse_architecture("FC6"), 6, default_cfg(), 0.0, 1);
  auto& w = perfect.params()[0].value;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) w.at(i, j) = (i == j) ? 1.0 : 0.0;
  CHECK(evaluate(perfect, ds, all, 4, 5).accuracy == 1.0);

  network::NetworkInstance constant(network::parse_architecture("FC6"), 6, default_cfg(), 0.0, 1);
  for (double& v : constant.params()[0].value.data) v = 0.0;
  // all-zero logits: ties break toward class 0, which is 1/6 of the set
  CHECK(evaluate(constant, ds, all, 4, 5).accuracy == doctest::Approx(1.0 / 6.0));

  CHECK_THROWS_AS(evaluate(constant, ds, {}, 4, 5), DataError);
}

TEST_CASE("metrics CSV layout") {
  MetricsLog log;
  log.rows.push_back({1, 2.5, 0.1, 0.2, 5e-4});
  log.rows.push_back({2, 2.25, 0.15, 0.22, 5e-4});
  const auto path = (std::filesystem::temp_directory_path() / "metrics_test.csv").string();
  log.write_csv(path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,train_loss,train_acc,val_acc,lr");
  std::getline(is, line);
  CHECK(line == "1,2.5,0.1,0.2,0.0005");
  std::filesystem::remove(path);
}
