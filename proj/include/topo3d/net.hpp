#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topo3d/dataset.hpp"

namespace topo3d {

enum class LayerKind { conv3d, maxpool, transpose_conv3d };
enum class Activation { none, relu, tanh };

struct LayerSpec {
  LayerKind kind = LayerKind::conv3d;
  int kernel = 3;
  int stride = 1;
  int padding = 0;
  int in_channels = 1;
  int out_channels = 1;
  Activation activation = Activation::none;

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkConfig {
  std::vector<int> channels;  // input channel ids, subset of the eight
  std::vector<LayerSpec> layers;

  bool operator==(const NetworkConfig&) const = default;
};

struct Shape3 {
  int x = 0, y = 0, z = 0;
  std::size_t size() const { return static_cast<std::size_t>(x) * y * z; }
  bool operator==(const Shape3&) const = default;
};

Shape3 layer_output_shape(const LayerSpec& layer, Shape3 in);

// Throws unless channel counts chain, the final layer is a one-channel tanh,
// and the network maps `grid` onto itself.
void validate_network(const NetworkConfig& config, Shape3 grid);

// conv(3, C->16)+ReLU, maxpool 2, conv(3, 16->32)+ReLU, tconv(2, s2, 32->16)+ReLU,
// conv(3, 16->8)+ReLU, conv(3, 8->1)+tanh.
NetworkConfig reference_network(std::vector<int> channels);

nlohmann::json to_json(const NetworkConfig& config);
NetworkConfig network_from_json(const nlohmann::json& j);

// Conv weights: (out, in, kz, ky, kx). Transpose-conv weights: (in, out, kz, ky, kx).
struct LayerParams {
  std::vector<double> weights;
  std::vector<double> bias;
};

struct NetworkParameters {
  std::vector<LayerParams> layers;

  std::size_t scalar_count() const;
  bool operator==(const NetworkParameters& o) const;
};

NetworkParameters zero_parameters(const NetworkConfig& config);

// Uniform(-b, b) weights with b = sqrt(6 / fan_in) for ReLU layers and
// sqrt(3 / fan_in) otherwise; zero biases.
NetworkParameters init_parameters(const NetworkConfig& config, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double beta = 1.0;
  int epochs = 30;
  std::uint64_t seed = 0;
  double epsilon = 1e-7;
};

void validate_train_config(const TrainConfig& config);

// Forward/backward workspace for one network on one grid.
class Network {
 public:
  Network(NetworkConfig config, Shape3 grid, double epsilon = 1e-7);

  const NetworkConfig& config() const { return config_; }
  Shape3 grid() const { return grid_; }
  double epsilon() const { return epsilon_; }

  // Input: selected channels stacked channel-major. Returns densities
  // clamp((tanh + 1) / 2, eps, 1 - eps).
  std::span<const double> forward(const NetworkParameters& params, std::span<const double> input);

  // Gradient of a scalar loss given dL/d(density) for the last forward pass.
  // Gradients are accumulated into `grads`.
  void backward(const NetworkParameters& params, std::span<const double> d_density,
                NetworkParameters& grads);

 private:
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  NetworkConfig config_;
  Shape3 grid_;
  double epsilon_;
  std::vector<Shape3> shapes_;          // shapes_[l] = input shape of layer l
  std::vector<Mat> activations_;        // activations_[l] = input of layer l
  std::vector<Mat> cols_;               // im2col buffers per layer
  std::vector<std::vector<std::size_t>> argmax_;
  std::vector<double> raw_tanh_;
  std::vector<double> density_;
  Mat grad_a_, grad_b_, dcol_;
};

// Stack the configured channels of a tensor as doubles.
std::vector<double> select_channels(const ChannelTensor& tensor, std::span<const int> channels);

// Mean BCE plus beta times mean squared error.
double loss(std::span<const double> pred, std::span<const float> target, double beta);
std::vector<double> loss_gradient(std::span<const double> pred, std::span<const float> target,
                                  double beta);

// v' = mu v + g; w' = w - lr v'.
void sgd_momentum_step(NetworkParameters& params, const NetworkParameters& grads,
                       NetworkParameters& velocity, double learning_rate, double momentum);

struct StepTelemetry {
  int epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double binary_accuracy = 0.0;
  double rms_accuracy = 0.0;
};

struct EpochTelemetry {
  int epoch = 0;
  double loss = 0.0;
  double binary_accuracy = 0.0;
  double rms_accuracy = 0.0;
};

struct Telemetry {
  std::vector<StepTelemetry> steps;
  std::vector<EpochTelemetry> epochs;
};

struct TrainResult {
  NetworkParameters params;
  Telemetry telemetry;
};

// Called after every update; returning false stops training.
using StepObserver = std::function<bool(const StepTelemetry&)>;

// Batch size one, seeded shuffle each epoch.
TrainResult train(std::span<const SampleRecord> records, const NetworkConfig& net,
                  const TrainConfig& config, const StepObserver& observer = {});

struct Prediction {
  std::vector<double> density;
  std::vector<std::uint8_t> binary;
};

// binary = density >= threshold
Prediction predict(Network& network, const NetworkParameters& params, const ChannelTensor& input,
                   double threshold = 0.5);

std::string telemetry_steps_csv(const Telemetry& t);
std::string telemetry_epochs_csv(const Telemetry& t);

// Checkpoint: magic TOPO3DNN, u32 version, u32 config length, config JSON,
// u32 grid x3, then float32 weights and biases per layer in order.
inline constexpr char kCheckpointMagic[8] = {'T', 'O', 'P', 'O', '3', 'D', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkConfig config;
  Shape3 grid;
  NetworkParameters params;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace topo3d
