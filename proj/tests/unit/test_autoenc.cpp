#include <cmath>

#include "cgrl/autoenc.hpp"
#include "cgrl/ingest.hpp"
#include "doctest.h"
#include "oracle/fixtures.hpp"
#include "oracle/oracle.hpp"
#include "temp_dir.hpp"

namespace {

cgrl::AutoencoderConfig tiny_config(std::size_t h1, std::size_t h2) {
  cgrl::AutoencoderConfig c;
  c.hidden1 = h1;
  c.hidden2 = h2;
  return c;
}

void fill_encoder(cgrl::AutoencoderParams& p, double value) {
  for (auto* layer : {&p.enc1, &p.enc2}) {
    for (auto& w : layer->weights) std::fill(w.data.begin(), w.data.end(), value);
    for (auto& b : layer->biases) std::fill(b.begin(), b.end(), value);
  }
}

std::vector<double> random_window(std::size_t n, std::uint64_t seed) {
  cgrl::Rng rng(seed);
  std::vector<double> w(n);
  for (double& v : w) v = rng.normal();
  return w;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Saturating gate biases: input and output open, forget closed, cell candidate 0.5.
void saturate(cgrl::LstmLayer& l) {
  std::fill(l.biases[cgrl::kInputGate].begin(), l.biases[cgrl::kInputGate].end(), 50.0);
  std::fill(l.biases[cgrl::kForgetGate].begin(), l.biases[cgrl::kForgetGate].end(), -50.0);
  std::fill(l.biases[cgrl::kCellGate].begin(), l.biases[cgrl::kCellGate].end(), 0.5);
  std::fill(l.biases[cgrl::kOutputGate].begin(), l.biases[cgrl::kOutputGate].end(), 50.0);
}

}  // namespace

TEST_CASE("init: shapes and forget bias") {
  const auto p = cgrl::init_params(cgrl::AutoencoderConfig{}, 6, 42);
  for (const auto& w : p.enc1.weights) {
    CHECK(w.rows == 16);
    CHECK(w.cols == 22);
  }
  CHECK(p.enc2.weights[0].rows == 12);
  CHECK(p.enc2.weights[0].cols == 28);
  CHECK(p.dec1.weights[0].cols == 6 + 12);
  CHECK(p.dec2.weights[0].rows == 16);
  CHECK(p.out_weights.rows == 6);
  CHECK(p.out_weights.cols == 16);
  for (double b : p.enc1.biases[cgrl::kForgetGate]) CHECK(b == 1.0);
  for (double b : p.enc1.biases[cgrl::kInputGate]) CHECK(b == 0.0);
  CHECK(p.flatten() == cgrl::init_params(cgrl::AutoencoderConfig{}, 6, 42).flatten());
  CHECK(p.flatten() != cgrl::init_params(cgrl::AutoencoderConfig{}, 6, 43).flatten());
  CHECK(p.flatten().size() == p.parameter_count());
}

TEST_CASE("flatten and assign are inverse") {
  auto p = cgrl::init_params(tiny_config(4, 2), 3, 1);
  auto flat = p.flatten();
  for (double& v : flat) v += 0.25;
  p.assign(flat);
  CHECK(p.flatten() == flat);
}

TEST_CASE("encode: zero parameters give a zero representation") {
  const cgrl::AutoencoderParams p(3, 4, 2);
  const auto r = cgrl::encode(p, random_window(15, 1), 5);
  CHECK(r.aecs == std::vector<double>{0.0, 0.0});
  CHECK(r.layer1.size() == 5);
}

TEST_CASE("encode: tiny network against hand computation") {
  // Computed offline by unrolling the recursion with every weight and bias 0.1.
  cgrl::AutoencoderParams p(1, 3, 2);
  fill_encoder(p, 0.1);
  const std::vector<double> two{0.5, -1.0};
  const auto r = cgrl::encode(p, two, 2);
  CHECK(r.aecs[0] == doctest::Approx(0.04792858698435134).epsilon(1e-12));
  CHECK(r.aecs[1] == doctest::Approx(0.04792858698435134).epsilon(1e-12));
  const std::vector<double> one{0.5};
  CHECK(cgrl::encode(p, one, 1).aecs[0] == doctest::Approx(0.03131989712999881).epsilon(1e-12));
}

TEST_CASE("encode: one step equals the closed-form cell update") {
  // Layer 1 with a single unit and only biases: h = o*tanh(i*g).
  cgrl::AutoencoderParams p(2, 2, 1);
  fill_encoder(p, 0.0);
  const std::vector<double> x{0.3, -0.7};
  const auto r = cgrl::encode(p, x, 1);
  CHECK(r.layer1[0].h[0] == 0.0);
  CHECK(r.aecs[0] == 0.0);
  p.enc2.biases[cgrl::kCellGate][0] = 0.8;
  const double expected = sigmoid(0.0) * std::tanh(sigmoid(0.0) * std::tanh(0.8));
  CHECK(cgrl::encode(p, x, 1).aecs[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("encode: matches an independent recursion for random uniform weights") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cgrl::Rng rng(seed);
    const double w = rng.uniform(-0.5, 0.5), b = rng.uniform(-0.5, 0.5);
    cgrl::AutoencoderParams p(2, 4, 3);
    fill_encoder(p, w);
    for (auto* layer : {&p.enc1, &p.enc2})
      for (auto& bias : layer->biases) std::fill(bias.begin(), bias.end(), b);
    const auto x = random_window(12, seed);
    const auto want = oracle::uniform_lstm_encode(x, 2, 4, 3, w, b);
    const auto got = cgrl::encode(p, x, 6).aecs;
    for (std::size_t k = 0; k < 3; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
}

TEST_CASE("decode: zero parameters reconstruct zeros") {
  const cgrl::AutoencoderParams p(3, 4, 2);
  const std::vector<double> a{0.4, -0.2};
  for (double v : cgrl::decode(p, a, 7).reconstruction.data) CHECK(v == 0.0);
}

TEST_CASE("decode: saturated gates give a constant sequence") {
  cgrl::AutoencoderParams p(1, 2, 1);
  saturate(p.dec1);
  saturate(p.dec2);
  p.out_weights(0, 0) = 1.0;
  const double level = std::tanh(std::tanh(0.5));
  for (double a : {-1.0, 0.0, 2.0}) {
    const std::vector<double> aecs{a};
    const auto r = cgrl::decode(p, aecs, 6);
    for (std::size_t s = 0; s < 6; ++s) CHECK(r.reconstruction(s, 0) == doctest::Approx(level).epsilon(1e-14));
  }
}

TEST_CASE("decode: initial state enters through the recurrent cell weight") {
  cgrl::AutoencoderParams p(1, 2, 1);
  saturate(p.dec1);
  saturate(p.dec2);
  p.dec1.weights[cgrl::kCellGate](0, 1) = 0.7;  // recurrent column
  p.dec2.weights[cgrl::kCellGate](0, 0) = 1.0;  // input column
  p.out_weights(0, 0) = 1.0;
  for (double a : {-1.0, 0.3, 1.5}) {
    const std::vector<double> aecs{a};
    const double hA = std::tanh(std::tanh(0.5 + 0.7 * a));
    const double y = std::tanh(std::tanh(0.5 + hA));
    CHECK(cgrl::decode(p, aecs, 1).reconstruction(0, 0) == doctest::Approx(y).epsilon(1e-14));
  }
}

TEST_CASE("loss: identity, constant offset and brute force") {
  const auto w = random_window(40, 3);
  CHECK(cgrl::reconstruction_loss(w, w) == 0.0);
  auto shifted = w;
  for (double& v : shifted) v += 2.0;
  CHECK(cgrl::reconstruction_loss(shifted, w) == doctest::Approx(4.0).epsilon(1e-12));
  const auto other = random_window(40, 4);
  CHECK(std::abs(cgrl::reconstruction_loss(other, w) - oracle::mse(other, w)) < 1e-12);
  const std::vector<double> short_one(3);
  CHECK_THROWS(cgrl::reconstruction_loss(short_one, w));
}

TEST_CASE("gradient check: random tiny networks") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto p = cgrl::init_params(tiny_config(3, 2), 2, seed);
    const auto res = cgrl::gradient_check(p, random_window(10, seed), 5);
    CHECK(res.parameters_checked == p.parameter_count());
    CHECK(res.max_relative_error < 1e-4);
  }
}

TEST_CASE("gradient check: all zero is consistent") {
  const cgrl::AutoencoderParams p(2, 3, 2);
  const std::vector<double> zeros(10, 0.0);
  CHECK(cgrl::gradient_check(p, zeros, 5).max_relative_error < 1e-4);
}

TEST_CASE("gradient check: a doubled entry is caught") {
  const auto p = cgrl::init_params(tiny_config(3, 2), 2, 7);
  const auto window = random_window(10, 7);
  cgrl::AutoencoderParams grad(2, 3, 2);
  cgrl::loss_and_gradient(p, window, 5, grad);
  const auto g = grad.flatten();
  std::size_t target = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(g[i]) > std::abs(g[target])) target = i;
  const auto res = cgrl::gradient_check(p, window, 5, 1e-5, [target](std::vector<double>& a) { a[target] *= 2.0; });
  CHECK(res.max_relative_error > 1e-4);
  CHECK(res.worst_index == target);
}

TEST_CASE("train step: loss drops on the trained example") {
  auto cfg = tiny_config(4, 2);
  auto p = cgrl::init_params(cfg, 2, 11);
  const auto window = random_window(12, 11);
  const auto before = cgrl::reconstruction_loss(cgrl::decode(p, cgrl::encode(p, window, 6).aecs, 6).reconstruction.data, window);
  std::vector<std::span<const double>> batch{window};
  cgrl::AdamState adam;
  const double reported = cgrl::train_step(p, batch, 6, adam, cfg);
  CHECK(reported == doctest::Approx(before).epsilon(1e-12));
  const auto after = cgrl::reconstruction_loss(cgrl::decode(p, cgrl::encode(p, window, 6).aecs, 6).reconstruction.data, window);
  CHECK(after < before);
  CHECK(adam.step == 1);
}

TEST_CASE("train step: zero learning rate leaves parameters alone") {
  auto cfg = tiny_config(4, 2);
  cfg.learning_rate = 0.0;
  auto p = cgrl::init_params(cfg, 2, 11);
  const auto before = p.flatten();
  const auto window = random_window(12, 5);
  std::vector<std::span<const double>> batch{window, window};
  cgrl::AdamState adam;
  cgrl::train_step(p, batch, 6, adam, cfg);
  CHECK(p.flatten() == before);
}

TEST_CASE("config validation") {
  cgrl::AutoencoderConfig c;
  CHECK_NOTHROW(c.validate(64, 6));
  CHECK_THROWS_AS(c.validate(2, 6), cgrl::ConfigError);  // 12 >= 2*6
  c.hidden2 = 16;
  CHECK_THROWS_AS(c.validate(64, 6), cgrl::ConfigError);
  c = {};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(64, 6), cgrl::ConfigError);
}

TEST_CASE("fit: thirty epochs halve the reconstruction error") {
  auto spec = cgrl::three_archetype_synthetic_spec(42);
  spec.timesteps = 16;
  spec.channels = 3;
  auto ds = cgrl::generate_synthetic(spec).data;
  cgrl::apply_normalization(ds, cgrl::fit_normalization(ds));
  cgrl::AutoencoderConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.early_stop_patience = 100;
  const auto fitted = cgrl::fit(ds, cfg);
  MESSAGE("initial " << fitted.report.initial_loss << " final " << fitted.report.final_loss);
  CHECK(fitted.report.train_loss.size() == 30);
  CHECK(fitted.report.final_loss < 0.5 * fitted.report.initial_loss);
}

TEST_CASE("fit: one full batch per epoch is one step") {
  const auto ds = fixtures::random_dataset(20, 4, 2, 2, 3);
  auto cfg = tiny_config(4, 2);
  cfg.epochs = 1;
  cfg.batch_size = 20;
  cfg.validation_fraction = 0.0;
  const auto fitted = cgrl::fit(ds, cfg);
  CHECK(fitted.report.optimizer_steps == 1);
  CHECK(fitted.report.stopped_epoch == 1);
}

TEST_CASE("fit: deterministic report and parameters") {
  const auto ds = fixtures::random_dataset(30, 5, 2, 2, 8);
  auto cfg = tiny_config(4, 2);
  cfg.epochs = 4;
  cfg.batch_size = 8;
  const auto a = cgrl::fit(ds, cfg), b = cgrl::fit(ds, cfg);
  CHECK(a.report.train_loss == b.report.train_loss);
  CHECK(a.report.validation_loss == b.report.validation_loss);
  CHECK(a.report.initial_loss == b.report.initial_loss);
  CHECK(a.report.optimizer_steps == b.report.optimizer_steps);
  CHECK(a.params.flatten() == b.params.flatten());
}

TEST_CASE("transform: shape, duplicates and provenance") {
  auto ds = fixtures::random_dataset(3, 5, 2, 2, 1);
  std::copy(ds.window(0).begin(), ds.window(0).end(), ds.values.begin() + 2 * 10);
  const auto p = cgrl::init_params(tiny_config(4, 3), 2, 2);
  const auto m = cgrl::transform(p, ds);
  CHECK(m.size() == 3);
  CHECK(m.dim() == 3);
  CHECK(std::equal(m.row(0).begin(), m.row(0).end(), m.row(2).begin()));
  CHECK(m.source_model_id == cgrl::model_id(p));
  CHECK(cgrl::transform(p, ds.subset(std::vector<std::size_t>{1})).size() == 1);
}

TEST_CASE("transform: default network gives 12 columns") {
  const auto ds = fixtures::random_dataset(1, 64, 6, 3, 1);
  const auto m = cgrl::transform(cgrl::init_params(cgrl::AutoencoderConfig{}, 6, 42), ds);
  CHECK(m.size() == 1);
  CHECK(m.dim() == 12);
}

TEST_CASE("model archive round trip") {
  TempDir tmp("autoenc");
  auto cfg = tiny_config(5, 3);
  cfg.learning_rate = 0.0123;
  auto p = cgrl::init_params(cfg, 2, 4);
  p.out_bias[1] = 0.1 + 0.2;
  cgrl::save_model(tmp.path() / "m.bin", p, cfg, 9);
  const auto back = cgrl::load_model(tmp.path() / "m.bin");
  CHECK(back.params.flatten() == p.flatten());
  CHECK(back.timesteps == 9);
  CHECK(back.config.learning_rate == cfg.learning_rate);
  CHECK(back.config.hidden1 == 5);
  CHECK(back.id == cgrl::model_id(p));
  CHECK_THROWS_AS(cgrl::load_model(tmp.path() / "missing.bin"), cgrl::IoError);
}
