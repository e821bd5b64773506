#include "topo3d/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "topo3d/error.hpp"
#include "topo3d/rng.hpp"

namespace topo3d {

namespace {

std::size_t cube(int k) { return static_cast<std::size_t>(k) * k * k; }

bool has_params(const LayerSpec& l) { return l.kind != LayerKind::maxpool; }

std::size_t weight_count(const LayerSpec& l) {
  return has_params(l) ? static_cast<std::size_t>(l.in_channels) * l.out_channels * cube(l.kernel) : 0;
}

std::size_t bias_count(const LayerSpec& l) {
  return has_params(l) ? static_cast<std::size_t>(l.out_channels) : 0;
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::transpose_conv3d: return "transpose_conv3d";
  }
  return "?";
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

}  // namespace

Shape3 layer_output_shape(const LayerSpec& l, Shape3 in) {
  require(l.kernel >= 1 && l.stride >= 1 && l.padding >= 0, "layer: bad kernel/stride/padding");
  auto dim = [&](int n) {
    switch (l.kind) {
      case LayerKind::conv3d: return (n + 2 * l.padding - l.kernel) / l.stride + 1;
      case LayerKind::maxpool: return (n - l.kernel) / l.stride + 1;
      case LayerKind::transpose_conv3d: return (n - 1) * l.stride - 2 * l.padding + l.kernel;
    }
    return 0;
  };
  const Shape3 out{dim(in.x), dim(in.y), dim(in.z)};
  require(out.x >= 1 && out.y >= 1 && out.z >= 1, "layer: output shape collapses to zero",
          ErrorCode::shape_mismatch);
  return out;
}

void validate_network(const NetworkConfig& c, Shape3 grid) {
  require(!c.channels.empty() && c.channels.size() <= kChannelCount,
          "network: need between 1 and 8 input channels", ErrorCode::invalid_config);
  for (std::size_t i = 0; i < c.channels.size(); ++i) {
    require(c.channels[i] >= 0 && c.channels[i] < kChannelCount, "network: channel id out of range",
            ErrorCode::invalid_config);
    for (std::size_t j = 0; j < i; ++j)
      require(c.channels[i] != c.channels[j], "network: duplicate input channel", ErrorCode::invalid_config);
  }
  require(!c.layers.empty(), "network: no layers", ErrorCode::invalid_config);
  int channels = static_cast<int>(c.channels.size());
  Shape3 shape = grid;
  for (const auto& l : c.layers) {
    require(l.in_channels == channels, "network: layer input channels do not chain",
            ErrorCode::invalid_config);
    if (l.kind == LayerKind::maxpool)
      require(l.out_channels == l.in_channels, "network: maxpool cannot change channel count",
              ErrorCode::invalid_config);
    require(l.out_channels >= 1, "network: layer needs output channels", ErrorCode::invalid_config);
    shape = layer_output_shape(l, shape);
    channels = l.out_channels;
  }
  require(channels == 1, "network: final layer must emit one channel", ErrorCode::invalid_config);
  require(c.layers.back().activation == Activation::tanh, "network: final activation must be tanh",
          ErrorCode::invalid_config);
  require(shape == grid, "network: output grid differs from input grid", ErrorCode::shape_mismatch);
}

NetworkConfig reference_network(std::vector<int> channels) {
  const int c = static_cast<int>(channels.size());
  NetworkConfig n;
  n.channels = std::move(channels);
  n.layers = {
      {LayerKind::conv3d, 3, 1, 1, c, 16, Activation::relu},
      {LayerKind::maxpool, 2, 2, 0, 16, 16, Activation::none},
      {LayerKind::conv3d, 3, 1, 1, 16, 32, Activation::relu},
      {LayerKind::transpose_conv3d, 2, 2, 0, 32, 16, Activation::relu},
      {LayerKind::conv3d, 3, 1, 1, 16, 8, Activation::relu},
      {LayerKind::conv3d, 3, 1, 1, 8, 1, Activation::tanh},
  };
  return n;
}

nlohmann::json to_json(const NetworkConfig& c) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : c.layers) {
    layers.push_back({{"kind", kind_name(l.kind)},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"padding", l.padding},
                      {"in_channels", l.in_channels},
                      {"out_channels", l.out_channels},
                      {"activation", activation_name(l.activation)}});
  }
  return {{"channels", c.channels}, {"layers", layers}};
}

NetworkConfig network_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  try {
    for (const auto& [key, value] : j.items())
      require(key == "channels" || key == "layers", "network: unknown key '" + key + "'",
              ErrorCode::invalid_config);
    c.channels = j.at("channels").get<std::vector<int>>();
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      for (const auto& [key, value] : lj.items()) {
        static constexpr const char* keys[] = {"kind", "kernel", "stride", "padding",
                                               "in_channels", "out_channels", "activation"};
        require(std::find_if(std::begin(keys), std::end(keys),
                             [&](const char* k) { return key == k; }) != std::end(keys),
                "network layer: unknown key '" + key + "'", ErrorCode::invalid_config);
      }
      const auto kind = lj.at("kind").get<std::string>();
      if (kind == "conv3d") l.kind = LayerKind::conv3d;
      else if (kind == "maxpool") l.kind = LayerKind::maxpool;
      else if (kind == "transpose_conv3d") l.kind = LayerKind::transpose_conv3d;
      else fail(ErrorCode::invalid_config, "network: unknown layer kind '" + kind + "'");
      l.kernel = lj.at("kernel").get<int>();
      l.stride = lj.value("stride", 1);
      l.padding = lj.value("padding", 0);
      l.in_channels = lj.at("in_channels").get<int>();
      l.out_channels = lj.at("out_channels").get<int>();
      const auto act = lj.value("activation", std::string("none"));
      if (act == "none") l.activation = Activation::none;
      else if (act == "relu") l.activation = Activation::relu;
      else if (act == "tanh") l.activation = Activation::tanh;
      else fail(ErrorCode::invalid_config, "network: unknown activation '" + act + "'");
      c.layers.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, std::string("network: ") + e.what());
  }
  return c;
}

std::size_t NetworkParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

bool NetworkParameters::operator==(const NetworkParameters& o) const {
  if (layers.size() != o.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].weights != o.layers[i].weights || layers[i].bias != o.layers[i].bias) return false;
  return true;
}

NetworkParameters zero_parameters(const NetworkConfig& c) {
  NetworkParameters p;
  for (const auto& l : c.layers) p.layers.push_back({std::vector<double>(weight_count(l), 0.0),
                                                     std::vector<double>(bias_count(l), 0.0)});
  return p;
}

NetworkParameters init_parameters(const NetworkConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  auto p = zero_parameters(c);
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const auto& l = c.layers[i];
    if (!has_params(l)) continue;
    // Each output of a transpose conv sees in_channels * (k / stride)^3 taps.
    double fan_in = static_cast<double>(l.in_channels) * static_cast<double>(cube(l.kernel));
    if (l.kind == LayerKind::transpose_conv3d)
      fan_in /= std::pow(static_cast<double>(std::min(l.stride, l.kernel)), 3.0);
    const double gain = l.activation == Activation::relu ? 6.0 : 3.0;
    const double bound = std::sqrt(gain / fan_in);
    for (auto& w : p.layers[i].weights) w = rng.uniform(-bound, bound);
  }
  return p;
}

void validate_train_config(const TrainConfig& t) {
  require(t.epochs >= 1, "train: epochs must be >= 1", ErrorCode::invalid_config);
  require(t.epsilon > 0.0 && t.epsilon <= 0.01, "train: epsilon must be in (0, 0.01]",
          ErrorCode::invalid_config);
  require(t.learning_rate >= 0.0 && t.momentum >= 0.0 && t.momentum < 1.0 && t.beta >= 0.0,
          "train: bad learning rate, momentum or beta", ErrorCode::invalid_config);
}

namespace {

// Maps between a "large" grid and the positions a kernel visits from a
// "small" grid: large = small * stride - padding + offset. Rows of `cols` are
// (channel, kz, ky, kx), columns are small-grid positions.
template <typename Mat>
void gather(const Mat& large, Shape3 large_shape, Shape3 small_shape, int channels, int k,
            int stride, int pad, Mat& cols) {
  const auto kk = cube(k);
  cols.setZero(static_cast<Eigen::Index>(channels * kk), static_cast<Eigen::Index>(small_shape.size()));
  for (int c = 0; c < channels; ++c) {
    const double* src = large.row(c).data();
    for (int kz = 0; kz < k; ++kz)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const auto row = static_cast<Eigen::Index>(c * kk + (kz * k + ky) * k + kx);
          double* dst = cols.row(row).data();
          std::size_t o = 0;
          for (int z = 0; z < small_shape.z; ++z) {
            const int lz = z * stride - pad + kz;
            const bool zin = lz >= 0 && lz < large_shape.z;
            for (int y = 0; y < small_shape.y; ++y) {
              const int ly = y * stride - pad + ky;
              const bool yin = zin && ly >= 0 && ly < large_shape.y;
              for (int x = 0; x < small_shape.x; ++x, ++o) {
                const int lx = x * stride - pad + kx;
                if (yin && lx >= 0 && lx < large_shape.x)
                  dst[o] = src[lx + large_shape.x * (ly + static_cast<std::size_t>(large_shape.y) * lz)];
              }
            }
          }
        }
  }
}

template <typename Mat>
void scatter_add(const Mat& cols, Shape3 large_shape, Shape3 small_shape, int channels, int k,
                 int stride, int pad, Mat& large) {
  const auto kk = cube(k);
  for (int c = 0; c < channels; ++c) {
    double* dst = large.row(c).data();
    for (int kz = 0; kz < k; ++kz)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const auto row = static_cast<Eigen::Index>(c * kk + (kz * k + ky) * k + kx);
          const double* src = cols.row(row).data();
          std::size_t o = 0;
          for (int z = 0; z < small_shape.z; ++z) {
            const int lz = z * stride - pad + kz;
            const bool zin = lz >= 0 && lz < large_shape.z;
            for (int y = 0; y < small_shape.y; ++y) {
              const int ly = y * stride - pad + ky;
              const bool yin = zin && ly >= 0 && ly < large_shape.y;
              for (int x = 0; x < small_shape.x; ++x, ++o) {
                const int lx = x * stride - pad + kx;
                if (yin && lx >= 0 && lx < large_shape.x)
                  dst[lx + large_shape.x * (ly + static_cast<std::size_t>(large_shape.y) * lz)] += src[o];
              }
            }
          }
        }
  }
}

}  // namespace

Network::Network(NetworkConfig config, Shape3 grid, double epsilon)
    : config_(std::move(config)), grid_(grid), epsilon_(epsilon) {
  validate_network(config_, grid_);
  require(epsilon > 0.0 && epsilon <= 0.01, "network: epsilon must be in (0, 0.01]");
  shapes_.push_back(grid_);
  for (const auto& l : config_.layers) shapes_.push_back(layer_output_shape(l, shapes_.back()));
  const auto n = config_.layers.size();
  activations_.resize(n + 1);
  cols_.resize(n);
  argmax_.resize(n);
}

std::span<const double> Network::forward(const NetworkParameters& params,
                                         std::span<const double> input) {
  const auto n_layers = config_.layers.size();
  require(params.layers.size() == n_layers, "forward: parameter/layer count mismatch",
          ErrorCode::shape_mismatch);
  const auto in_ch = static_cast<Eigen::Index>(config_.channels.size());
  require(input.size() == static_cast<std::size_t>(in_ch) * grid_.size(),
          "forward: input size does not match the configured channels and grid",
          ErrorCode::shape_mismatch);
  activations_[0] = Eigen::Map<const Mat>(input.data(), in_ch, static_cast<Eigen::Index>(grid_.size()));

  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto& l = config_.layers[i];
    const auto& p = params.layers[i];
    require(p.weights.size() == weight_count(l) && p.bias.size() == bias_count(l),
            "forward: parameter shape mismatch", ErrorCode::shape_mismatch);
    const Shape3 in_shape = shapes_[i], out_shape = shapes_[i + 1];
    const auto out_size = static_cast<Eigen::Index>(out_shape.size());
    const Mat& x = activations_[i];
    Mat& y = activations_[i + 1];
    switch (l.kind) {
      case LayerKind::conv3d: {
        gather(x, in_shape, out_shape, l.in_channels, l.kernel, l.stride, l.padding, cols_[i]);
        Eigen::Map<const Mat> w(p.weights.data(), l.out_channels,
                                static_cast<Eigen::Index>(l.in_channels * cube(l.kernel)));
        y.noalias() = w * cols_[i];
        break;
      }
      case LayerKind::transpose_conv3d: {
        Eigen::Map<const Mat> w(p.weights.data(), l.in_channels,
                                static_cast<Eigen::Index>(l.out_channels * cube(l.kernel)));
        cols_[i].noalias() = w.transpose() * x;
        y.setZero(l.out_channels, out_size);
        scatter_add(cols_[i], out_shape, in_shape, l.out_channels, l.kernel, l.stride, l.padding, y);
        break;
      }
      case LayerKind::maxpool: {
        y.resize(l.out_channels, out_size);
        auto& arg = argmax_[i];
        arg.assign(static_cast<std::size_t>(l.out_channels) * out_shape.size(), 0);
        for (int c = 0; c < l.out_channels; ++c) {
          const double* src = x.row(c).data();
          double* dst = y.row(c).data();
          std::size_t o = 0;
          for (int z = 0; z < out_shape.z; ++z)
            for (int yy = 0; yy < out_shape.y; ++yy)
              for (int xx = 0; xx < out_shape.x; ++xx, ++o) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_at = 0;
                for (int kz = 0; kz < l.kernel; ++kz)
                  for (int ky = 0; ky < l.kernel; ++ky)
                    for (int kx = 0; kx < l.kernel; ++kx) {
                      const std::size_t at =
                          (xx * l.stride + kx) +
                          in_shape.x * ((yy * l.stride + ky) +
                                        static_cast<std::size_t>(in_shape.y) * (z * l.stride + kz));
                      if (src[at] > best) {
                        best = src[at];
                        best_at = at;
                      }
                    }
                dst[o] = best;
                arg[c * out_shape.size() + o] = best_at;
              }
        }
        break;
      }
    }
    if (has_params(l)) {
      for (int c = 0; c < l.out_channels; ++c) y.row(c).array() += p.bias[static_cast<std::size_t>(c)];
    }
    switch (l.activation) {
      case Activation::none: break;
      case Activation::relu: y = y.cwiseMax(0.0); break;
      case Activation::tanh: y = y.array().tanh(); break;
    }
  }

  const Mat& out = activations_[n_layers];
  raw_tanh_.assign(out.data(), out.data() + out.size());
  density_.resize(raw_tanh_.size());
  for (std::size_t i = 0; i < raw_tanh_.size(); ++i)
    density_[i] = std::clamp(0.5 * (raw_tanh_[i] + 1.0), epsilon_, 1.0 - epsilon_);
  return density_;
}

void Network::backward(const NetworkParameters& params, std::span<const double> d_density,
                       NetworkParameters& grads) {
  const auto n_layers = config_.layers.size();
  require(d_density.size() == density_.size(), "backward: gradient size mismatch",
          ErrorCode::shape_mismatch);
  require(grads.layers.size() == n_layers, "backward: gradient/layer count mismatch",
          ErrorCode::shape_mismatch);

  // Through the affine map and the clamp (identity strictly inside).
  Mat* grad = &grad_a_;
  Mat* next = &grad_b_;
  grad->resize(1, static_cast<Eigen::Index>(density_.size()));
  for (std::size_t i = 0; i < density_.size(); ++i) {
    const double d = 0.5 * (raw_tanh_[i] + 1.0);
    (*grad)(0, static_cast<Eigen::Index>(i)) = (d > epsilon_ && d < 1.0 - epsilon_) ? 0.5 * d_density[i] : 0.0;
  }

  for (std::size_t li = n_layers; li-- > 0;) {
    const auto& l = config_.layers[li];
    const auto& p = params.layers[li];
    auto& g = grads.layers[li];
    const Mat& y = activations_[li + 1];
    switch (l.activation) {
      case Activation::none: break;
      case Activation::relu: grad->array() *= (y.array() > 0.0).cast<double>(); break;
      case Activation::tanh: grad->array() *= 1.0 - y.array().square(); break;
    }
    const Shape3 in_shape = shapes_[li], out_shape = shapes_[li + 1];
    const auto in_size = static_cast<Eigen::Index>(in_shape.size());
    if (has_params(l)) {
      for (int c = 0; c < l.out_channels; ++c) g.bias[static_cast<std::size_t>(c)] += grad->row(c).sum();
    }
    switch (l.kind) {
      case LayerKind::conv3d: {
        const auto k_rows = static_cast<Eigen::Index>(l.in_channels * cube(l.kernel));
        Eigen::Map<Mat> gw(g.weights.data(), l.out_channels, k_rows);
        gw.noalias() += (*grad) * cols_[li].transpose();
        if (li == 0) break;  // input gradient not needed
        Eigen::Map<const Mat> w(p.weights.data(), l.out_channels, k_rows);
        dcol_.noalias() = w.transpose() * (*grad);
        next->setZero(l.in_channels, in_size);
        scatter_add(dcol_, in_shape, out_shape, l.in_channels, l.kernel, l.stride, l.padding, *next);
        std::swap(grad, next);
        break;
      }
      case LayerKind::transpose_conv3d: {
        const auto k_cols = static_cast<Eigen::Index>(l.out_channels * cube(l.kernel));
        gather(*grad, out_shape, in_shape, l.out_channels, l.kernel, l.stride, l.padding, dcol_);
        Eigen::Map<Mat> gw(g.weights.data(), l.in_channels, k_cols);
        gw.noalias() += activations_[li] * dcol_.transpose();
        if (li == 0) break;
        Eigen::Map<const Mat> w(p.weights.data(), l.in_channels, k_cols);
        next->noalias() = w * dcol_;
        std::swap(grad, next);
        break;
      }
      case LayerKind::maxpool: {
        next->setZero(l.in_channels, in_size);
        const auto& arg = argmax_[li];
        const auto out_size = out_shape.size();
        for (int c = 0; c < l.in_channels; ++c) {
          const double* src = grad->row(c).data();
          double* dst = next->row(c).data();
          for (std::size_t o = 0; o < out_size; ++o) dst[arg[c * out_size + o]] += src[o];
        }
        std::swap(grad, next);
        break;
      }
    }
  }
}

std::vector<double> select_channels(const ChannelTensor& t, std::span<const int> channels) {
  const auto nv = t.dims.voxels();
  std::vector<double> out(channels.size() * nv);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    require(channels[c] >= 0 && channels[c] < kChannelCount, "select_channels: bad channel id");
    const auto src = t.channel(channels[c]);
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(c * nv));
  }
  return out;
}

double loss(std::span<const double> pred, std::span<const float> target, double beta) {
  require(pred.size() == target.size() && !pred.empty(), "loss: size mismatch",
          ErrorCode::shape_mismatch);
  double bce = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], t = target[i];
    require(p > 0.0 && p < 1.0, "loss: prediction must lie strictly inside (0, 1)");
    bce -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    mse += (p - t) * (p - t);
  }
  const double n = static_cast<double>(pred.size());
  return bce / n + beta * mse / n;
}

std::vector<double> loss_gradient(std::span<const double> pred, std::span<const float> target,
                                  double beta) {
  require(pred.size() == target.size() && !pred.empty(), "loss: size mismatch",
          ErrorCode::shape_mismatch);
  const double n = static_cast<double>(pred.size());
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], t = target[i];
    g[i] = (-t / p + (1.0 - t) / (1.0 - p) + 2.0 * beta * (p - t)) / n;
  }
  return g;
}

void sgd_momentum_step(NetworkParameters& params, const NetworkParameters& grads,
                       NetworkParameters& velocity, double lr, double mu) {
  require(params.layers.size() == grads.layers.size() &&
              params.layers.size() == velocity.layers.size(),
          "sgd: layer count mismatch", ErrorCode::shape_mismatch);
  auto step = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& v) {
    require(w.size() == g.size() && w.size() == v.size(), "sgd: tensor size mismatch",
            ErrorCode::shape_mismatch);
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = mu * v[i] + g[i];
      w[i] -= lr * v[i];
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    step(params.layers[l].weights, grads.layers[l].weights, velocity.layers[l].weights);
    step(params.layers[l].bias, grads.layers[l].bias, velocity.layers[l].bias);
  }
}

namespace {

void zero(NetworkParameters& p) {
  for (auto& l : p.layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

double binary_agreement(std::span<const double> pred, std::span<const float> target) {
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) agree += (pred[i] >= 0.5) == (target[i] >= 0.5);
  return static_cast<double>(agree) / static_cast<double>(pred.size());
}

double rms_agreement(std::span<const double> pred, std::span<const float> target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return 1.0 - std::sqrt(s / static_cast<double>(pred.size()));
}

}  // namespace

TrainResult train(std::span<const SampleRecord> records, const NetworkConfig& net,
                  const TrainConfig& config, const StepObserver& observer) {
  require(!records.empty(), "train: empty dataset");
  validate_train_config(config);
  const auto dims = records.front().input.dims;
  const Shape3 grid{static_cast<int>(dims.nx), static_cast<int>(dims.ny), static_cast<int>(dims.nz)};
  Network network(net, grid, config.epsilon);

  TrainResult out;
  out.params = init_parameters(net, config.seed);
  auto grads = zero_parameters(net);
  auto velocity = zero_parameters(net);
  Rng shuffle(config.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i)))]);
    EpochTelemetry summary;
    summary.epoch = epoch;
    for (auto idx : order) {
      const auto& rec = records[idx];
      require(rec.input.dims == dims, "train: records have different grids", ErrorCode::shape_mismatch);
      const auto input = select_channels(rec.input, net.channels);
      const auto pred = network.forward(out.params, input);
      const bool finite = std::all_of(pred.begin(), pred.end(), [](double v) { return std::isfinite(v); });
      const double value = finite ? loss(pred, rec.target, config.beta) : std::nan("");
      if (!std::isfinite(value))
        fail(ErrorCode::non_finite, "train: non-finite loss at epoch " + std::to_string(epoch) +
                                        ", step " + std::to_string(step) + " (record seed " +
                                        std::to_string(rec.seed) + ")");
      StepTelemetry st{epoch, step, value, binary_agreement(pred, rec.target),
                       rms_agreement(pred, rec.target)};
      zero(grads);
      network.backward(out.params, loss_gradient(pred, rec.target, config.beta), grads);
      sgd_momentum_step(out.params, grads, velocity, config.learning_rate, config.momentum);
      for (const auto& l : out.params.layers)
        for (double w : l.weights)
          if (!std::isfinite(w))
            fail(ErrorCode::non_finite, "train: parameters diverged at step " + std::to_string(step));
      out.telemetry.steps.push_back(st);
      summary.loss += st.loss;
      summary.binary_accuracy += st.binary_accuracy;
      summary.rms_accuracy += st.rms_accuracy;
      ++step;
      if (observer && !observer(st)) {
        const double seen = static_cast<double>(out.telemetry.steps.size() -
                                                (out.telemetry.epochs.size() * records.size()));
        summary.loss /= seen;
        summary.binary_accuracy /= seen;
        summary.rms_accuracy /= seen;
        out.telemetry.epochs.push_back(summary);
        return out;
      }
    }
    const double n = static_cast<double>(records.size());
    summary.loss /= n;
    summary.binary_accuracy /= n;
    summary.rms_accuracy /= n;
    out.telemetry.epochs.push_back(summary);
  }
  return out;
}

Prediction predict(Network& network, const NetworkParameters& params, const ChannelTensor& input,
                   double threshold) {
  const auto x = select_channels(input, network.config().channels);
  const auto y = network.forward(params, x);
  Prediction p;
  p.density.assign(y.begin(), y.end());
  p.binary.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) p.binary[i] = y[i] >= threshold ? 1 : 0;
  return p;
}

std::string telemetry_steps_csv(const Telemetry& t) {
  std::string out = "epoch,step,loss,binary_accuracy,rms_accuracy\n";
  char buf[160];
  for (const auto& s : t.steps) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g\n", s.epoch, s.step, s.loss,
                  s.binary_accuracy, s.rms_accuracy);
    out += buf;
  }
  return out;
}

std::string telemetry_epochs_csv(const Telemetry& t) {
  std::string out = "epoch,loss,binary_accuracy,rms_accuracy\n";
  char buf[160];
  for (const auto& e : t.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.loss, e.binary_accuracy,
                  e.rms_accuracy);
    out += buf;
  }
  return out;
}

std::string encode_checkpoint(const Checkpoint& c) {
  validate_network(c.config, c.grid);
  const auto config_text = to_json(c.config).dump();
  std::string out(kCheckpointMagic, 8);
  le::put_u32(out, kCheckpointVersion);
  le::put_u32(out, static_cast<std::uint32_t>(config_text.size()));
  out += config_text;
  le::put_u32(out, static_cast<std::uint32_t>(c.grid.x));
  le::put_u32(out, static_cast<std::uint32_t>(c.grid.y));
  le::put_u32(out, static_cast<std::uint32_t>(c.grid.z));
  require(c.params.layers.size() == c.config.layers.size(), "checkpoint: parameter count mismatch",
          ErrorCode::shape_mismatch);
  for (std::size_t i = 0; i < c.config.layers.size(); ++i) {
    const auto& l = c.params.layers[i];
    require(l.weights.size() == weight_count(c.config.layers[i]) &&
                l.bias.size() == bias_count(c.config.layers[i]),
            "checkpoint: parameter shape mismatch", ErrorCode::shape_mismatch);
    for (double w : l.weights) le::put_f32(out, static_cast<float>(w));
    for (double b : l.bias) le::put_f32(out, static_cast<float>(b));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    fail(ErrorCode::bad_magic, "checkpoint: bad magic");
  le::Reader r(bytes, "checkpoint");
  r.take(8);
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorCode::version_mismatch, "checkpoint: unsupported version " + std::to_string(version));
  const auto len = r.u32();
  const auto text = r.take(len);
  Checkpoint c;
  try {
    c.config = network_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::invalid_config, std::string("checkpoint: config echo: ") + e.what());
  }
  c.grid.x = static_cast<int>(r.u32());
  c.grid.y = static_cast<int>(r.u32());
  c.grid.z = static_cast<int>(r.u32());
  validate_network(c.config, c.grid);
  c.params = zero_parameters(c.config);
  for (auto& l : c.params.layers) {
    for (auto& w : l.weights) w = r.f32();
    for (auto& b : l.bias) b = r.f32();
  }
  if (r.remaining() != 0) fail(ErrorCode::truncated, "checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace topo3d
