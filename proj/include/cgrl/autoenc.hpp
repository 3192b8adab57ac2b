#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cgrl/core.hpp"

namespace cgrl {

struct AutoencoderConfig {
  std::size_t hidden1 = 16;
  std::size_t hidden2 = 12;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t early_stop_patience = 10;
  double validation_fraction = 0.1;
  double clip_norm = 5.0;
  std::uint64_t seed = 42;

  // Throws ConfigError. t and d are the window shape the model will see.
  void validate(std::size_t timesteps, std::size_t channels) const;
};

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCellGate = 2, kOutputGate = 3 };

/// One LSTM layer. Each gate matrix acts on the concatenation [x; h_prev] and is
/// therefore shaped hidden x (input + hidden).
struct LstmLayer {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::array<Matrix, 4> weights;
  std::array<std::vector<double>, 4> biases;

  LstmLayer() = default;
  LstmLayer(std::size_t in, std::size_t hid);
};

/// Encoder: d -> hidden1 -> hidden2. Decoder mirrors it (hidden2 -> hidden1) and
/// projects back to d channels.
struct AutoencoderParams {
  std::size_t channels = 0;
  LstmLayer enc1;
  LstmLayer enc2;
  LstmLayer dec1;
  LstmLayer dec2;
  Matrix out_weights;  // d x hidden1
  std::vector<double> out_bias;

  AutoencoderParams() = default;
  AutoencoderParams(std::size_t d, std::size_t hidden1, std::size_t hidden2);

  std::size_t hidden1() const { return enc1.hidden; }
  std::size_t hidden2() const { return enc2.hidden; }

  // Every parameter tensor, in a fixed order shared by flatten/assign/Adam.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

AutoencoderParams init_params(const AutoencoderConfig& config, std::size_t channels, std::uint64_t seed);

// Activations kept per timestep for backpropagation.
struct StepCache {
  std::vector<double> z;  // [x; h_prev]
  std::array<std::vector<double>, 4> gates;
  std::vector<double> c_prev;
  std::vector<double> c;
  std::vector<double> tanh_c;
  std::vector<double> h;
};

struct EncodeResult {
  std::vector<double> aecs;
  std::vector<StepCache> layer1;
  std::vector<StepCache> layer2;
};

struct DecodeResult {
  Matrix reconstruction;  // t x d
  std::vector<StepCache> layer1;
  std::vector<StepCache> layer2;
};

// window is t x d row-major. Throws DivergenceError on non-finite activations.
EncodeResult encode(const AutoencoderParams& params, std::span<const double> window, std::size_t timesteps);
DecodeResult decode(const AutoencoderParams& params, std::span<const double> aecs, std::size_t timesteps);

double reconstruction_loss(std::span<const double> reconstruction, std::span<const double> window);

// Loss of one window; adds dLoss/dParams into grad (same shape as params).
double loss_and_gradient(const AutoencoderParams& params, std::span<const double> window, std::size_t timesteps,
                         AutoencoderParams& grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

// One optimizer step on the mean batch loss. Returns the batch loss before the update.
double train_step(AutoencoderParams& params, std::span<const std::span<const double>> batch, std::size_t timesteps,
                  AdamState& adam, const AutoencoderConfig& config);

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<double> epoch_seconds;  // wall time, excluded from artifact digests
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  std::size_t optimizer_steps = 0;
  double final_loss = 0.0;
};

struct FitResult {
  AutoencoderParams params;
  TrainReport report;
};

FitResult fit(const WindowedDataset& train, const AutoencoderConfig& config);

AecsMatrix transform(const AutoencoderParams& params, const WindowedDataset& ds);

std::string model_id(const AutoencoderParams& params);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t parameters_checked = 0;
};

// Central finite differences against the analytic gradient for every parameter. The
// perturbed losses are evaluated in long double so rounding does not swamp small entries.
// tamper, when set, edits the flattened analytic gradient before comparison.
GradientCheck gradient_check(const AutoencoderParams& params, std::span<const double> window, std::size_t timesteps,
                             double epsilon = 1e-5,
                             const std::function<void(std::vector<double>&)>& tamper = {});

void save_model(const std::filesystem::path& path, const AutoencoderParams& params, const AutoencoderConfig& config,
                std::size_t timesteps);

struct LoadedModel {
  AutoencoderParams params;
  AutoencoderConfig config;
  std::size_t timesteps = 0;
  std::string id;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace cgrl
