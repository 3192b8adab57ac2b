#include "cgrl/autoenc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "cgrl/container.hpp"

namespace cgrl {
namespace {

constexpr std::string_view kModelMagic = "CGAEv1";

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void lstm_step(const LstmLayer& layer, std::span<const double> x, std::span<const double> h_prev,
               std::span<const double> c_prev, StepCache& s) {
  const std::size_t H = layer.hidden;
  s.z.assign(x.begin(), x.end());
  s.z.insert(s.z.end(), h_prev.begin(), h_prev.end());
  for (std::size_t g = 0; g < 4; ++g) {
    auto& act = s.gates[g];
    act.resize(H);
    const Matrix& W = layer.weights[g];
    for (std::size_t r = 0; r < H; ++r) {
      double a = layer.biases[g][r];
      const double* w = W.data.data() + r * W.cols;
      for (std::size_t k = 0; k < W.cols; ++k) a += w[k] * s.z[k];
      act[r] = g == kCellGate ? std::tanh(a) : sigmoid(a);
    }
  }
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  s.c.resize(H);
  s.tanh_c.resize(H);
  s.h.resize(H);
  for (std::size_t r = 0; r < H; ++r) {
    s.c[r] = s.gates[kForgetGate][r] * c_prev[r] + s.gates[kInputGate][r] * s.gates[kCellGate][r];
    s.tanh_c[r] = std::tanh(s.c[r]);
    s.h[r] = s.gates[kOutputGate][r] * s.tanh_c[r];
  }
}

// dh is the total gradient on h_t, dc the gradient on c_t arriving from step t+1.
void lstm_step_backward(const LstmLayer& layer, const StepCache& s, std::span<const double> dh,
                        std::span<const double> dc, LstmLayer& grad, std::vector<double>& dx,
                        std::vector<double>& dh_prev, std::vector<double>& dc_prev) {
  const std::size_t H = layer.hidden;
  const std::size_t in = layer.input;
  std::array<std::vector<double>, 4> da;
  for (auto& v : da) v.resize(H);
  dc_prev.resize(H);
  for (std::size_t r = 0; r < H; ++r) {
    const double i = s.gates[kInputGate][r];
    const double f = s.gates[kForgetGate][r];
    const double g = s.gates[kCellGate][r];
    const double o = s.gates[kOutputGate][r];
    const double dct = dc[r] + dh[r] * o * (1.0 - s.tanh_c[r] * s.tanh_c[r]);
    da[kOutputGate][r] = dh[r] * s.tanh_c[r] * o * (1.0 - o);
    da[kInputGate][r] = dct * g * i * (1.0 - i);
    da[kForgetGate][r] = dct * s.c_prev[r] * f * (1.0 - f);
    da[kCellGate][r] = dct * i * (1.0 - g * g);
    dc_prev[r] = dct * f;
  }
  std::vector<double> dz(in + H, 0.0);
  for (std::size_t gi = 0; gi < 4; ++gi) {
    const Matrix& W = layer.weights[gi];
    Matrix& dW = grad.weights[gi];
    for (std::size_t r = 0; r < H; ++r) {
      const double a = da[gi][r];
      grad.biases[gi][r] += a;
      if (a == 0.0) continue;
      const double* w = W.data.data() + r * W.cols;
      double* dw = dW.data.data() + r * W.cols;
      for (std::size_t k = 0; k < W.cols; ++k) {
        dw[k] += a * s.z[k];
        dz[k] += a * w[k];
      }
    }
  }
  dx.assign(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(in));
  dh_prev.assign(dz.begin() + static_cast<std::ptrdiff_t>(in), dz.end());
}

void append_tensors(LstmLayer& l, std::vector<std::span<double>>& out) {
  for (auto& w : l.weights) out.emplace_back(w.data);
  for (auto& b : l.biases) out.emplace_back(b);
}

void append_tensors(const LstmLayer& l, std::vector<std::span<const double>>& out) {
  for (const auto& w : l.weights) out.emplace_back(w.data);
  for (const auto& b : l.biases) out.emplace_back(b);
}

// Extended-precision forward pass used only for finite differences. Parameters come
// flattened in tensors() order.
struct WideLayer {
  std::size_t input = 0;
  std::size_t hidden = 0;
  const long double* w[4]{};
  const long double* b[4]{};
};

const long double* bind_layer(WideLayer& l, std::size_t in, std::size_t hid, const long double* p) {
  l.input = in;
  l.hidden = hid;
  for (auto& w : l.w) {
    w = p;
    p += hid * (in + hid);
  }
  for (auto& b : l.b) {
    b = p;
    p += hid;
  }
  return p;
}

void wide_step(const WideLayer& l, const std::vector<long double>& x, std::vector<long double>& h,
               std::vector<long double>& c) {
  std::vector<long double> z(x);
  z.insert(z.end(), h.begin(), h.end());
  const std::size_t cols = l.input + l.hidden;
  for (std::size_t r = 0; r < l.hidden; ++r) {
    long double a[4];
    for (std::size_t g = 0; g < 4; ++g) {
      a[g] = l.b[g][r];
      for (std::size_t k = 0; k < cols; ++k) a[g] += l.w[g][r * cols + k] * z[k];
    }
    const long double i = 1.0L / (1.0L + std::exp(-a[kInputGate]));
    const long double f = 1.0L / (1.0L + std::exp(-a[kForgetGate]));
    const long double g = std::tanh(a[kCellGate]);
    const long double o = 1.0L / (1.0L + std::exp(-a[kOutputGate]));
    c[r] = f * c[r] + i * g;
    h[r] = o * std::tanh(c[r]);
  }
}

long double wide_loss(const std::vector<long double>& flat, std::size_t d, std::size_t h1, std::size_t h2,
                      std::span<const double> window, std::size_t timesteps) {
  WideLayer e1, e2, d1, d2;
  const long double* p = flat.data();
  p = bind_layer(e1, d, h1, p);
  p = bind_layer(e2, h1, h2, p);
  p = bind_layer(d1, d, h2, p);
  p = bind_layer(d2, h2, h1, p);
  const long double* out_w = p;
  const long double* out_b = p + d * h1;

  std::vector<long double> ha(h1, 0.0L), ca(h1, 0.0L), hb(h2, 0.0L), cb(h2, 0.0L);
  for (std::size_t s = 0; s < timesteps; ++s) {
    std::vector<long double> x(window.begin() + static_cast<std::ptrdiff_t>(s * d),
                               window.begin() + static_cast<std::ptrdiff_t>((s + 1) * d));
    wide_step(e1, x, ha, ca);
    wide_step(e2, ha, hb, cb);
  }
  std::vector<long double> da(hb), dca(h2, 0.0L), db(h1, 0.0L), dcb(h1, 0.0L), input(d, 0.0L);
  long double sum = 0.0L;
  for (std::size_t s = 0; s < timesteps; ++s) {
    wide_step(d1, input, da, dca);
    wide_step(d2, da, db, dcb);
    for (std::size_t k = 0; k < d; ++k) {
      long double v = out_b[k];
      for (std::size_t j = 0; j < h1; ++j) v += out_w[k * h1 + j] * db[j];
      input[k] = v;
      const long double e = v - window[s * d + k];
      sum += e * e;
    }
  }
  return sum / static_cast<long double>(timesteps * d);
}

Json config_to_json(const AutoencoderConfig& c) {
  return {{"hidden1", c.hidden1},
          {"hidden2", c.hidden2},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"early_stop_patience", c.early_stop_patience},
          {"validation_fraction", c.validation_fraction},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed}};
}

AutoencoderConfig config_from_json(const Json& j) {
  AutoencoderConfig c;
  c.hidden1 = j.at("hidden1");
  c.hidden2 = j.at("hidden2");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.epsilon = j.at("epsilon");
  c.early_stop_patience = j.at("early_stop_patience");
  c.validation_fraction = j.at("validation_fraction");
  c.clip_norm = j.at("clip_norm");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

void AutoencoderConfig::validate(std::size_t timesteps, std::size_t channels) const {
  if (hidden1 == 0 || hidden2 == 0) throw ConfigError("autoencoder: hidden sizes must be positive");
  if (hidden2 >= hidden1) throw ConfigError("autoencoder: hidden2 must be smaller than hidden1");
  if (hidden2 >= timesteps * channels) throw ConfigError("autoencoder: representation must be undercomplete (hidden2 < t*d)");
  if (!(learning_rate > 0.0)) throw ConfigError("autoencoder: learning rate must be positive");
  if (epochs < 1) throw ConfigError("autoencoder: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("autoencoder: batch size must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("autoencoder: validation fraction must lie in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("autoencoder: clip norm must be positive");
}

LstmLayer::LstmLayer(std::size_t in, std::size_t hid) : input(in), hidden(hid) {
  for (auto& w : weights) w = Matrix(hid, in + hid);
  for (auto& b : biases) b.assign(hid, 0.0);
}

AutoencoderParams::AutoencoderParams(std::size_t d, std::size_t h1, std::size_t h2)
    : channels(d),
      enc1(d, h1),
      enc2(h1, h2),
      dec1(d, h2),
      dec2(h2, h1),
      out_weights(d, h1),
      out_bias(d, 0.0) {}

std::vector<std::span<double>> AutoencoderParams::tensors() {
  std::vector<std::span<double>> out;
  append_tensors(enc1, out);
  append_tensors(enc2, out);
  append_tensors(dec1, out);
  append_tensors(dec2, out);
  out.emplace_back(out_weights.data);
  out.emplace_back(out_bias);
  return out;
}

std::vector<std::span<const double>> AutoencoderParams::tensors() const {
  std::vector<std::span<const double>> out;
  append_tensors(enc1, out);
  append_tensors(enc2, out);
  append_tensors(dec1, out);
  append_tensors(dec2, out);
  out.emplace_back(out_weights.data);
  out.emplace_back(out_bias);
  return out;
}

std::size_t AutoencoderParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

std::vector<double> AutoencoderParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (auto t : tensors()) out.insert(out.end(), t.begin(), t.end());
  return out;
}

void AutoencoderParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("autoencoder: parameter count mismatch");
  std::size_t pos = 0;
  for (auto t : tensors()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), t.size(), t.begin());
    pos += t.size();
  }
}

AutoencoderParams init_params(const AutoencoderConfig& config, std::size_t channels, std::uint64_t seed) {
  AutoencoderParams p(channels, config.hidden1, config.hidden2);
  Rng rng(seed);
  auto init_layer = [&rng](LstmLayer& l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(l.input + l.hidden));
    for (auto& w : l.weights)
      for (double& v : w.data) v = rng.uniform(-scale, scale);
    std::fill(l.biases[kForgetGate].begin(), l.biases[kForgetGate].end(), 1.0);
  };
  init_layer(p.enc1);
  init_layer(p.enc2);
  init_layer(p.dec1);
  init_layer(p.dec2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.hidden1));
  for (double& v : p.out_weights.data) v = rng.uniform(-scale, scale);
  return p;
}

EncodeResult encode(const AutoencoderParams& params, std::span<const double> window, std::size_t timesteps) {
  const std::size_t d = params.channels;
  if (window.size() != timesteps * d) throw std::invalid_argument("encode: window shape mismatch");
  EncodeResult r;
  r.layer1.resize(timesteps);
  r.layer2.resize(timesteps);
  std::vector<double> h1(params.hidden1(), 0.0), c1(params.hidden1(), 0.0);
  std::vector<double> h2(params.hidden2(), 0.0), c2(params.hidden2(), 0.0);
  for (std::size_t s = 0; s < timesteps; ++s) {
    lstm_step(params.enc1, window.subspan(s * d, d), h1, c1, r.layer1[s]);
    h1 = r.layer1[s].h;
    c1 = r.layer1[s].c;
    lstm_step(params.enc2, h1, h2, c2, r.layer2[s]);
    h2 = r.layer2[s].h;
    c2 = r.layer2[s].c;
  }
  if (!all_finite(h2) || !all_finite(c2)) throw DivergenceError("encode: non-finite activation (training diverged)");
  r.aecs = std::move(h2);
  return r;
}

DecodeResult decode(const AutoencoderParams& params, std::span<const double> aecs, std::size_t timesteps) {
  const std::size_t d = params.channels;
  if (aecs.size() != params.hidden2()) throw std::invalid_argument("decode: representation length mismatch");
  DecodeResult r;
  r.reconstruction = Matrix(timesteps, d);
  r.layer1.resize(timesteps);
  r.layer2.resize(timesteps);
  std::vector<double> hA(aecs.begin(), aecs.end()), cA(params.hidden2(), 0.0);
  std::vector<double> hB(params.hidden1(), 0.0), cB(params.hidden1(), 0.0);
  std::vector<double> input(d, 0.0);
  for (std::size_t s = 0; s < timesteps; ++s) {
    lstm_step(params.dec1, input, hA, cA, r.layer1[s]);
    hA = r.layer1[s].h;
    cA = r.layer1[s].c;
    lstm_step(params.dec2, hA, hB, cB, r.layer2[s]);
    hB = r.layer2[s].h;
    cB = r.layer2[s].c;
    auto y = r.reconstruction.row(s);
    for (std::size_t k = 0; k < d; ++k) {
      double v = params.out_bias[k];
      for (std::size_t j = 0; j < hB.size(); ++j) v += params.out_weights(k, j) * hB[j];
      y[k] = v;
    }
    input.assign(y.begin(), y.end());
  }
  if (!all_finite(r.reconstruction.data)) throw DivergenceError("decode: non-finite output (training diverged)");
  return r;
}

double reconstruction_loss(std::span<const double> reconstruction, std::span<const double> window) {
  if (reconstruction.size() != window.size()) throw std::invalid_argument("loss: shape mismatch");
  if (window.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double e = reconstruction[i] - window[i];
    sum += e * e;
  }
  return sum / static_cast<double>(window.size());
}

double loss_and_gradient(const AutoencoderParams& params, std::span<const double> window, std::size_t timesteps,
                         AutoencoderParams& grad) {
  const std::size_t d = params.channels;
  const std::size_t H1 = params.hidden1();
  const std::size_t H2 = params.hidden2();
  const EncodeResult enc = encode(params, window, timesteps);
  const DecodeResult dec = decode(params, enc.aecs, timesteps);
  const double loss = reconstruction_loss(dec.reconstruction.data, window);
  const double scale = 2.0 / static_cast<double>(timesteps * d);

  std::vector<double> dhA(H2, 0.0), dcA(H2, 0.0), dhB(H1, 0.0), dcB(H1, 0.0);
  std::vector<double> dnext_input(d, 0.0);
  std::vector<double> dy(d), dhB_total(H1), dhA_total(H2);
  std::vector<double> dx, dh_prev, dc_prev;

  for (std::size_t s = timesteps; s-- > 0;) {
    const auto y = dec.reconstruction.row(s);
    for (std::size_t k = 0; k < d; ++k) dy[k] = scale * (y[k] - window[s * d + k]) + dnext_input[k];

    const std::vector<double>& hB = dec.layer2[s].h;
    dhB_total = dhB;
    for (std::size_t k = 0; k < d; ++k) {
      grad.out_bias[k] += dy[k];
      for (std::size_t j = 0; j < H1; ++j) {
        grad.out_weights(k, j) += dy[k] * hB[j];
        dhB_total[j] += params.out_weights(k, j) * dy[k];
      }
    }
    lstm_step_backward(params.dec2, dec.layer2[s], dhB_total, dcB, grad.dec2, dx, dh_prev, dc_prev);
    dhB = dh_prev;
    dcB = dc_prev;

    for (std::size_t j = 0; j < H2; ++j) dhA_total[j] = dx[j] + dhA[j];
    lstm_step_backward(params.dec1, dec.layer1[s], dhA_total, dcA, grad.dec1, dx, dh_prev, dc_prev);
    dhA = dh_prev;
    dcA = dc_prev;
    // The decoder input at step s is the output of step s-1; step 0 reads a constant zero frame.
    dnext_input = dx;
  }

  // The decoder's initial hidden state is the representation.
  std::vector<double> dh2 = dhA, dc2(H2, 0.0);
  std::vector<double> dh1(H1, 0.0), dc1(H1, 0.0), dh1_total(H1);
  for (std::size_t s = timesteps; s-- > 0;) {
    lstm_step_backward(params.enc2, enc.layer2[s], dh2, dc2, grad.enc2, dx, dh_prev, dc_prev);
    dh2 = dh_prev;
    dc2 = dc_prev;
    for (std::size_t j = 0; j < H1; ++j) dh1_total[j] = dx[j] + dh1[j];
    lstm_step_backward(params.enc1, enc.layer1[s], dh1_total, dc1, grad.enc1, dx, dh_prev, dc_prev);
    dh1 = dh_prev;
    dc1 = dc_prev;
  }
  return loss;
}

double train_step(AutoencoderParams& params, std::span<const std::span<const double>> batch, std::size_t timesteps,
                  AdamState& adam, const AutoencoderConfig& config) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  AutoencoderParams grad(params.channels, params.hidden1(), params.hidden2());
  double loss = 0.0;
  for (auto window : batch) loss += loss_and_gradient(params, window, timesteps, grad);
  const double inv = 1.0 / static_cast<double>(batch.size());
  loss *= inv;
  if (!std::isfinite(loss)) throw DivergenceError("train_step: non-finite loss");

  auto gt = grad.tensors();
  double norm_sq = 0.0;
  for (auto t : gt)
    for (double& g : t) {
      g *= inv;
      norm_sq += g * g;
    }
  const double norm = std::sqrt(norm_sq);
  const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;

  const std::size_t n = params.parameter_count();
  if (adam.m.size() != n) {
    adam.m.assign(n, 0.0);
    adam.v.assign(n, 0.0);
    adam.step = 0;
  }
  ++adam.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
  auto pt = params.tensors();
  std::size_t idx = 0;
  for (std::size_t ti = 0; ti < pt.size(); ++ti) {
    for (std::size_t k = 0; k < pt[ti].size(); ++k, ++idx) {
      const double g = gt[ti][k] * clip;
      adam.m[idx] = config.beta1 * adam.m[idx] + (1.0 - config.beta1) * g;
      adam.v[idx] = config.beta2 * adam.v[idx] + (1.0 - config.beta2) * g * g;
      const double mhat = adam.m[idx] / bc1;
      const double vhat = adam.v[idx] / bc2;
      pt[ti][k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
  return loss;
}

namespace {

double mean_loss(const AutoencoderParams& params, const WindowedDataset& ds, std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : idx) {
    const EncodeResult e = encode(params, ds.window(i), ds.timesteps);
    const DecodeResult r = decode(params, e.aecs, ds.timesteps);
    sum += reconstruction_loss(r.reconstruction.data, ds.window(i));
  }
  return sum / static_cast<double>(idx.size());
}

}  // namespace

FitResult fit(const WindowedDataset& train, const AutoencoderConfig& config) {
  train.validate();
  config.validate(train.timesteps, train.channels);
  FitResult result{init_params(config, train.channels, config.seed), {}};
  TrainReport& report = result.report;
  AutoencoderParams& params = result.params;

  const std::size_t M = train.size();
  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(M);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::size_t n_val = 0;
  if (M >= 10 && config.validation_fraction > 0.0)
    n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(M))));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  report.initial_loss = mean_loss(params, train, train_idx);
  AdamState adam;
  AutoencoderParams best = params;
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::span<const double>> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(std::span<std::size_t>(train_idx));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(train_idx.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train.window(train_idx[k]));
      epoch_loss += train_step(params, batch, train.timesteps, adam, config) * static_cast<double>(end - start);
      ++report.optimizer_steps;
    }
    epoch_loss /= static_cast<double>(train_idx.size());
    report.train_loss.push_back(epoch_loss);
    const double val_loss = n_val > 0 ? mean_loss(params, train, val_idx) : epoch_loss;
    report.validation_loss.push_back(val_loss);
    report.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    report.stopped_epoch = epoch;

    if (val_loss < best_score) {
      best_score = val_loss;
      best = params;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  report.final_loss = report.train_loss.back();
  params = std::move(best);
  return result;
}

std::string model_id(const AutoencoderParams& params) { return "ae-" + fingerprint(params.flatten()); }

AecsMatrix transform(const AutoencoderParams& params, const WindowedDataset& ds) {
  if (ds.channels != params.channels) throw std::invalid_argument("transform: channel count does not match model");
  AecsMatrix out;
  out.source_model_id = model_id(params);
  out.vectors = Matrix(ds.size(), params.hidden2());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const EncodeResult e = encode(params, ds.window(i), ds.timesteps);
    std::copy(e.aecs.begin(), e.aecs.end(), out.vectors.row(i).begin());
  }
  return out;
}

GradientCheck gradient_check(const AutoencoderParams& params, std::span<const double> window, std::size_t timesteps,
                             double epsilon, const std::function<void(std::vector<double>&)>& tamper) {
  AutoencoderParams grad(params.channels, params.hidden1(), params.hidden2());
  loss_and_gradient(params, window, timesteps, grad);
  std::vector<double> analytic = grad.flatten();
  if (tamper) tamper(analytic);

  const std::vector<double> base = params.flatten();
  std::vector<long double> probe(base.begin(), base.end());
  const long double step = epsilon;

  GradientCheck out;
  out.parameters_checked = probe.size();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const long double saved = probe[i];
    probe[i] = saved + step;
    const long double plus = wide_loss(probe, params.channels, params.hidden1(), params.hidden2(), window, timesteps);
    probe[i] = saved - step;
    const long double minus = wide_loss(probe, params.channels, params.hidden1(), params.hidden2(), window, timesteps);
    probe[i] = saved;
    const double numeric = static_cast<double>((plus - minus) / (2.0L * step));
    const double rel = std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    if (rel > out.max_relative_error) {
      out.max_relative_error = rel;
      out.worst_index = i;
    }
  }
  return out;
}

void save_model(const std::filesystem::path& path, const AutoencoderParams& params, const AutoencoderConfig& config,
                std::size_t timesteps) {
  Json header;
  header["format"] = "cgrl-autoencoder";
  header["version"] = 1;
  header["config"] = config_to_json(config);
  header["d"] = params.channels;
  header["t"] = timesteps;
  header["model_id"] = model_id(params);
  header["seed"] = config.seed;
  write_container(path, kModelMagic, header, params.flatten());
}

LoadedModel load_model(const std::filesystem::path& path) {
  Container c = read_container(path, kModelMagic);
  LoadedModel m;
  try {
    if (c.header.at("format") != "cgrl-autoencoder") throw IoError("not an autoencoder model: " + path.string());
    m.config = config_from_json(c.header.at("config"));
    m.timesteps = c.header.at("t");
    m.id = c.header.at("model_id");
    m.params = AutoencoderParams(c.header.at("d").get<std::size_t>(), m.config.hidden1, m.config.hidden2);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model header in " + path.string() + ": " + e.what());
  }
  if (c.payload.size() != m.params.parameter_count()) throw IoError("model weight blob size mismatch: " + path.string());
  m.params.assign(c.payload);
  if (model_id(m.params) != m.id) throw IoError("model digest mismatch: " + path.string());
  return m;
}

}  // namespace cgrl
