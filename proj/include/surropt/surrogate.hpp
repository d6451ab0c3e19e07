#pragma once

// Dense feedforward regression networks: one network realizes the mapping
// from a layout vector to a single performance metric.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace surropt::surrogate {

enum class Activation { Relu, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct NetworkSpec {
  std::vector<int> hidden_widths;
  std::optional<int> table_index;  // 1..10 for the reference configurations

  int total_nodes() const;
  std::string label() const;  // "100-50-20-10"
  bool operator==(const NetworkSpec&) const = default;
};

/// The ten reference architectures, row order 1..10.
std::vector<NetworkSpec> table1_specs();

/// One reference architecture by its 1-based index.
NetworkSpec table1_spec(int index);

/// Throws InvalidSpecError when the spec has no layers or a non-positive width.
void validate(const NetworkSpec& spec);

struct LabeledSet {
  Eigen::MatrixXd inputs;   // input_dim x n, one sample per column
  Eigen::VectorXd targets;  // n

  Eigen::Index size() const noexcept { return targets.size(); }
};

struct RegressionData {
  LabeledSet train;
  LabeledSet test;
};

struct TrainingConfig {
  int max_epochs = 500;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int early_stop_patience = 50;

  void validate() const;
};

struct EpochRecord {
  double train_mse = 0.0;
  double test_mse = 0.0;
};

struct TrainingReport {
  std::vector<EpochRecord> mse_history;
  double final_test_mse = 0.0;
  int best_epoch = 0;  // 1-based epoch of the retained snapshot
  double wall_time_seconds = 0.0;
  NetworkSpec spec;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Relu;
};

class DenseNetwork {
 public:
  DenseNetwork() = default;

  /// Validates that layer shapes chain from input_dim down to a single output
  /// and that the final layer is linear.
  DenseNetwork(int input_dim, std::vector<DenseLayer> layers,
               std::optional<int> table_index = std::nullopt);

  int input_dim() const noexcept { return input_dim_; }
  int output_dim() const noexcept;
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  NetworkSpec spec() const;

  std::size_t parameter_count() const noexcept;

  /// Parameters flattened layer by layer: weights row-major, then bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  bool all_finite() const;

 private:
  friend TrainingReport train(DenseNetwork&, const RegressionData&, const TrainingConfig&);

  int input_dim_ = 0;
  std::vector<DenseLayer> layers_;
  std::optional<int> table_index_;
};

/// ReLU hidden layers, linear output. Weights ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)),
/// biases zero.
DenseNetwork build_network(const NetworkSpec& spec, int input_dim, std::uint64_t seed);

double forward(const DenseNetwork& net, std::span<const double> x);

/// Batched prediction; `inputs` holds one sample per column.
Eigen::VectorXd forward_batch(const DenseNetwork& net, const Eigen::MatrixXd& inputs);

/// Adam on mini-batches of the mean squared error. On return `net` holds the
/// parameters of the epoch with the lowest test MSE. Training stops after
/// max_epochs or once more than early_stop_patience epochs pass without a new
/// best test MSE.
TrainingReport train(DenseNetwork& net, const RegressionData& data, const TrainingConfig& cfg);

double mse(const DenseNetwork& net, const LabeledSet& data);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as DenseNetwork::parameters()
};

/// Full-batch MSE loss and its analytic gradient.
LossGradient loss_and_gradient(const DenseNetwork& net, const LabeledSet& data);

/// A trained network together with the scaling it was trained under.
struct SurrogateModel {
  std::string metric;  // "f1", "f2", "f3"
  DenseNetwork network;
  std::vector<double> input_min;
  std::vector<double> input_max;
  double target_mean = 0.0;
  double target_stddev = 1.0;

  /// Network output for a point already mapped to the unit box (z-scored scale).
  double predict_normalized(std::span<const double> x_unit) const;

  /// Maps a raw input to the unit box, runs the network and de-normalizes.
  double predict(std::span<const double> x_raw) const;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary model file: magic "SRGT", u32 version, u64 header length, a JSON
/// header (spec, shapes, scaling), then every parameter as a little-endian
/// IEEE-754 double.
void save_model(const SurrogateModel& model, const std::filesystem::path& path);
SurrogateModel load_model(const std::filesystem::path& path);

}  // namespace surropt::surrogate
