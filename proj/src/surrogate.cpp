#include "surropt/surrogate.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surropt/error.hpp"
#include "surropt/rng.hpp"

namespace surropt::surrogate {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'G', 'T'};

void apply_activation(Activation a, Eigen::MatrixXd& z) {
  if (a == Activation::Relu) z = z.cwiseMax(0.0);
}

// Activations of every layer for a batch; acts[0] is the input.
void forward_all(const DenseNetwork& net, const Eigen::MatrixXd& inputs,
                 std::vector<Eigen::MatrixXd>& acts) {
  const auto& layers = net.layers();
  acts.resize(layers.size() + 1);
  acts[0] = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    acts[l + 1].noalias() = layers[l].weights * acts[l];
    acts[l + 1].colwise() += layers[l].bias;
    apply_activation(layers[l].activation, acts[l + 1]);
  }
}

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  explicit Gradients(const DenseNetwork& net) {
    for (const auto& layer : net.layers()) {
      weights.emplace_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      bias.emplace_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
  }
};

// Backpropagates d(mean squared error)/d(output) through the cached activations.
// Returns the batch loss.
double backward(const DenseNetwork& net, const std::vector<Eigen::MatrixXd>& acts,
                const Eigen::Ref<const Eigen::RowVectorXd>& targets, Gradients& grads) {
  const auto& layers = net.layers();
  const double n = static_cast<double>(targets.size());
  Eigen::MatrixXd delta = acts.back() - targets;
  const double loss = delta.squaredNorm() / n;
  delta *= 2.0 / n;
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads.weights[l].noalias() = delta * acts[l].transpose();
    grads.bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd prev = layers[l].weights.transpose() * delta;
    if (layers[l - 1].activation == Activation::Relu) {
      prev = prev.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
    delta = std::move(prev);
  }
  return loss;
}

void check_input(const DenseNetwork& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.input_dim()) {
    throw DimensionError("input has " + std::to_string(x.size()) + " entries, network expects " +
                         std::to_string(net.input_dim()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw DimensionError("input contains a non-finite value");
  }
}

void check_data(const DenseNetwork& net, const LabeledSet& data, const char* what) {
  if (data.size() == 0) throw Error(std::string(what) + " set is empty");
  if (data.inputs.cols() != data.size()) throw DimensionError("input/target count mismatch");
  if (data.inputs.rows() != net.input_dim()) {
    throw DimensionError(std::string(what) + " features have dimension " +
                         std::to_string(data.inputs.rows()) + ", network expects " +
                         std::to_string(net.input_dim()));
  }
}

}  // namespace

const char* activation_name(Activation a) {
  return a == Activation::Relu ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw InvalidSpecError("unknown activation '" + name + "'");
}

int NetworkSpec::total_nodes() const {
  return std::accumulate(hidden_widths.begin(), hidden_widths.end(), 0);
}

std::string NetworkSpec::label() const {
  std::string out;
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(hidden_widths[i]);
  }
  return out;
}

std::vector<NetworkSpec> table1_specs() {
  const std::vector<std::vector<int>> rows = {
      {20, 10},
      {50, 20, 10},
      {100, 50, 20, 10},
      {500, 100, 50, 20, 10},
      {500, 100, 20, 10},
      {1000, 100, 50, 20, 10},
      {1000, 100, 10},
      {400, 300, 200, 100, 50, 20, 10},
      {1000, 300, 200, 100, 50, 20, 10},
      {5000, 1000, 500, 400, 300, 200, 100, 50, 20, 10},
  };
  std::vector<NetworkSpec> specs;
  specs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    specs.push_back({rows[i], static_cast<int>(i + 1)});
  }
  return specs;
}

NetworkSpec table1_spec(int index) {
  if (index < 1 || index > 10) {
    throw InvalidSpecError("reference model index must be in [1,10], got " + std::to_string(index));
  }
  return table1_specs()[static_cast<std::size_t>(index - 1)];
}

void validate(const NetworkSpec& spec) {
  if (spec.hidden_widths.empty()) throw InvalidSpecError("network spec has no hidden layers");
  for (std::size_t i = 0; i < spec.hidden_widths.size(); ++i) {
    if (spec.hidden_widths[i] < 1) {
      throw InvalidSpecError("hidden layer " + std::to_string(i + 1) + " has width " +
                             std::to_string(spec.hidden_widths[i]));
    }
  }
}

DenseNetwork::DenseNetwork(int input_dim, std::vector<DenseLayer> layers,
                           std::optional<int> table_index)
    : input_dim_(input_dim), layers_(std::move(layers)), table_index_(table_index) {
  if (input_dim_ < 1) throw DimensionError("input dimension must be >= 1");
  if (layers_.empty()) throw InvalidSpecError("network needs at least one layer");
  Eigen::Index in = input_dim_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.cols() != in || layer.bias.size() != layer.weights.rows() ||
        layer.weights.rows() < 1) {
      throw DimensionError("layer " + std::to_string(l + 1) + " does not chain");
    }
    in = layer.weights.rows();
  }
  if (in != 1) throw DimensionError("final layer must have a single output");
  if (layers_.back().activation != Activation::Identity) {
    throw InvalidSpecError("final layer must be linear");
  }
}

int DenseNetwork::output_dim() const noexcept {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weights.rows());
}

NetworkSpec DenseNetwork::spec() const {
  NetworkSpec s;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    s.hidden_widths.push_back(static_cast<int>(layers_[l].weights.rows()));
  }
  s.table_index = table_index_;
  return s;
}

std::size_t DenseNetwork::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

Eigen::VectorXd DenseNetwork::parameters() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) flat[at++] = layer.weights(r, c);
    }
    flat.segment(at, layer.bias.size()) = layer.bias;
    at += layer.bias.size();
  }
  return flat;
}

void DenseNetwork::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw DimensionError("parameter vector has wrong length");
  }
  Eigen::Index at = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = flat[at++];
    }
    layer.bias = flat.segment(at, layer.bias.size());
    at += layer.bias.size();
  }
}

bool DenseNetwork::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

DenseNetwork build_network(const NetworkSpec& spec, int input_dim, std::uint64_t seed) {
  validate(spec);
  if (input_dim < 1) throw DimensionError("input dimension must be >= 1");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  int in = input_dim;
  auto make_layer = [&](int out, Activation act) {
    const double limit = std::sqrt(3.0 / in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = act;
    layers.push_back(std::move(layer));
    in = out;
  };
  for (int width : spec.hidden_widths) make_layer(width, Activation::Relu);
  make_layer(1, Activation::Identity);
  return DenseNetwork(input_dim, std::move(layers), spec.table_index);
}

double forward(const DenseNetwork& net, std::span<const double> x) {
  check_input(net, x);
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (const auto& layer : net.layers()) {
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    if (layer.activation == Activation::Relu) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a[0];
}

Eigen::VectorXd forward_batch(const DenseNetwork& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim()) throw DimensionError("batch has wrong feature dimension");
  std::vector<Eigen::MatrixXd> acts;
  forward_all(net, inputs, acts);
  return acts.back().row(0).transpose();
}

void TrainingConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be >= 0");
}

double mse(const DenseNetwork& net, const LabeledSet& data) {
  check_data(net, data, "evaluation");
  const Eigen::VectorXd pred = forward_batch(net, data.inputs);
  return (pred - data.targets).squaredNorm() / static_cast<double>(data.size());
}

LossGradient loss_and_gradient(const DenseNetwork& net, const LabeledSet& data) {
  check_data(net, data, "gradient");
  std::vector<Eigen::MatrixXd> acts;
  forward_all(net, data.inputs, acts);
  Gradients grads(net);
  LossGradient out;
  out.loss = backward(net, acts, data.targets.transpose(), grads);
  out.gradient.resize(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    const auto& gw = grads.weights[l];
    for (Eigen::Index r = 0; r < gw.rows(); ++r) {
      for (Eigen::Index c = 0; c < gw.cols(); ++c) out.gradient[at++] = gw(r, c);
    }
    out.gradient.segment(at, grads.bias[l].size()) = grads.bias[l];
    at += grads.bias[l].size();
  }
  return out;
}

TrainingReport train(DenseNetwork& net, const RegressionData& data, const TrainingConfig& cfg) {
  cfg.validate();
  check_data(net, data.train, "training");
  check_data(net, data.test, "test");
  const auto started = std::chrono::steady_clock::now();

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  const Eigen::Index n = data.train.size();
  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Gradients grads(net);
  Gradients first(net);  // Adam moment estimates, zero-initialised
  Gradients second(net);
  std::vector<Eigen::MatrixXd> acts;
  Eigen::MatrixXd batch_x;
  Eigen::RowVectorXd batch_y;

  auto& layers = net.layers_;

  TrainingReport report;
  report.spec = net.spec();
  std::vector<DenseLayer> best = layers;
  double best_test = std::numeric_limits<double>::infinity();
  int since_best = 0;
  long long step = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
      batch_x.resize(data.train.inputs.rows(), len);
      batch_y.resize(len);
      for (Eigen::Index k = 0; k < len; ++k) {
        const auto idx = order[static_cast<std::size_t>(start + k)];
        batch_x.col(k) = data.train.inputs.col(idx);
        batch_y[k] = data.train.targets[idx];
      }
      forward_all(net, batch_x, acts);
      const double loss = backward(net, acts, batch_y, grads);
      if (!std::isfinite(loss)) {
        throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch), epoch);
      }
      loss_sum += loss * static_cast<double>(len);

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        first.weights[l] = kBeta1 * first.weights[l] + (1.0 - kBeta1) * grads.weights[l];
        second.weights[l] = kBeta2 * second.weights[l] + (1.0 - kBeta2) * grads.weights[l].cwiseAbs2();
        layers[l].weights.array() -=
            lr * first.weights[l].array() / (second.weights[l].array().sqrt() + kEps);
        first.bias[l] = kBeta1 * first.bias[l] + (1.0 - kBeta1) * grads.bias[l];
        second.bias[l] = kBeta2 * second.bias[l] + (1.0 - kBeta2) * grads.bias[l].cwiseAbs2();
        layers[l].bias.array() -= lr * first.bias[l].array() / (second.bias[l].array().sqrt() + kEps);
      }
    }

    EpochRecord record{loss_sum / static_cast<double>(n), mse(net, data.test)};
    if (!std::isfinite(record.train_mse) || !std::isfinite(record.test_mse)) {
      throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch), epoch);
    }
    report.mse_history.push_back(record);
    if (record.test_mse < best_test) {
      best_test = record.test_mse;
      best = layers;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > cfg.early_stop_patience) {
      break;
    }
  }

  layers = std::move(best);
  report.final_test_mse = best_test;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

double SurrogateModel::predict_normalized(std::span<const double> x_unit) const {
  return forward(network, x_unit);
}

double SurrogateModel::predict(std::span<const double> x_raw) const {
  if (x_raw.size() != input_min.size()) throw DimensionError("input has wrong dimension");
  std::vector<double> unit(x_raw.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const double span = input_max[i] - input_min[i];
    unit[i] = span > 0.0 ? (x_raw[i] - input_min[i]) / span : 0.0;
  }
  return predict_normalized(unit) * target_stddev + target_mean;
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), bytes.size());
  if (!in) throw IoError("model file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

void save_model(const SurrogateModel& model, const std::filesystem::path& path) {
  const auto& net = model.network;
  nlohmann::json header;
  header["format"] = "surropt-model";
  header["version"] = kModelFormatVersion;
  header["metric"] = model.metric;
  header["input_dim"] = net.input_dim();
  const auto spec = net.spec();
  header["hidden_widths"] = spec.hidden_widths;
  header["table_index"] = spec.table_index ? nlohmann::json(*spec.table_index) : nlohmann::json();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"activation", activation_name(layer.activation)}});
  }
  header["layers"] = layers;
  header["parameter_layout"] = "per layer: weights row-major, then bias; float64 little-endian";
  header["parameter_count"] = net.parameter_count();
  header["input_min"] = model.input_min;
  header["input_max"] = model.input_max;
  header["target_mean"] = model.target_mean;
  header["target_stddev"] = model.target_stddev;
  const std::string text = header.dump();

  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  write_le<std::uint32_t>(out, kModelFormatVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const Eigen::VectorXd params = net.parameters();
  for (Eigen::Index i = 0; i < params.size(); ++i) write_le<double>(out, params[i]);
  if (!out) throw IoError("failed writing " + path.string());
}

SurrogateModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError(path.string() + " is not a surropt model file");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version));
  }
  const auto header_len = read_le<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("model header truncated");

  SurrogateModel model;
  try {
    const auto header = nlohmann::json::parse(text);
    model.metric = header.at("metric").get<std::string>();
    const int input_dim = header.at("input_dim").get<int>();
    std::vector<DenseLayer> layers;
    for (const auto& l : header.at("layers")) {
      DenseLayer layer;
      layer.weights = Eigen::MatrixXd::Zero(l.at("rows").get<Eigen::Index>(), l.at("cols").get<Eigen::Index>());
      layer.bias = Eigen::VectorXd::Zero(layer.weights.rows());
      layer.activation = activation_from_name(l.at("activation").get<std::string>());
      layers.push_back(std::move(layer));
    }
    std::optional<int> table_index;
    if (!header.at("table_index").is_null()) table_index = header.at("table_index").get<int>();
    model.network = DenseNetwork(input_dim, std::move(layers), table_index);
    model.input_min = header.at("input_min").get<std::vector<double>>();
    model.input_max = header.at("input_max").get<std::vector<double>>();
    model.target_mean = header.at("target_mean").get<double>();
    model.target_stddev = header.at("target_stddev").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model header in " + path.string() + ": " + e.what());
  }

  Eigen::VectorXd params(static_cast<Eigen::Index>(model.network.parameter_count()));
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = read_le<double>(in);
  model.network.set_parameters(params);
  return model;
}

}  // namespace surropt::surrogate
