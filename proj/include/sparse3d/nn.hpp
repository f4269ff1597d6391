#ifndef SPARSE3D_NN_HPP_
#define SPARSE3D_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sparse3d/rng.hpp"

namespace sparse3d::nn {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

// Trainable tensors carry a gradient; buffers (batchnorm running statistics)
// are saved in checkpoints but never updated by the optimizer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Y = X W^T + b with W: out x in, b: 1 x out, X: n x in.
Tensor linear_forward(const Tensor& weight, const Tensor& bias, const Tensor& input);

struct LinearGrads {
  Tensor weight;
  Tensor bias;
  Tensor input;
};
LinearGrads linear_backward(const Tensor& weight, const Tensor& input, const Tensor& grad_output);

// Column-wise max over rows. Ties resolve to the lowest row index.
struct MaxPoolResult {
  RowVector values;
  std::vector<Eigen::Index> argmax;
};
MaxPoolResult maxpool_rows(const Tensor& input);
Tensor maxpool_rows_backward(const RowVector& grad_values, const std::vector<Eigen::Index>& argmax,
                             Eigen::Index rows);

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(input), same shape as the input
};

// Mean over rows of -log softmax(logits)[label].
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
// Mean over every element of the logistic loss. grad = (sigmoid(x) - t) / count.
LossResult binary_cross_entropy_logits(const Tensor& logits, const Tensor& targets);

double sigmoid(double x);

enum class Mode { kTrain, kEval };

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& input, Mode mode) = 0;
  // Gradient with respect to the last forward input; accumulates parameter
  // gradients.
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::string describe() const = 0;
};

class Linear : public Layer {
 public:
  Linear(int in, int out, Rng& init_rng);
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::string describe() const override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override { return "relu"; }

 private:
  Tensor output_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override { return "sigmoid"; }

 private:
  Tensor output_;
};

// Per-column normalization over the rows of the batch. Running statistics
// follow running = momentum * running + (1 - momentum) * batch.
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int dim, double momentum = 0.9, double epsilon = 1e-5);
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> parameters() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }
  std::string describe() const override;

 private:
  int dim_;
  double momentum_;
  double epsilon_;
  Parameter gamma_;
  Parameter beta_;
  Parameter running_mean_;
  Parameter running_var_;
  Tensor normalized_;
  RowVector inv_std_;
  bool train_mode_ = true;
};

// Inverted dropout: kept activations are scaled by 1 / (1 - rate) in training;
// identity in evaluation.
class Dropout : public Layer {
 public:
  Dropout(double rate, std::uint64_t seed);
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override;

 private:
  double rate_;
  Rng rng_;
  Tensor mask_;
};

struct LayerSpec {
  enum class Kind { kLinear, kReLU, kBatchNorm, kDropout, kSigmoid };
  Kind kind;
  int in = 0;
  int out = 0;
  double rate = 0.0;

  static LayerSpec linear(int in, int out) { return {Kind::kLinear, in, out, 0.0}; }
  static LayerSpec relu() { return {Kind::kReLU}; }
  static LayerSpec batchnorm(int dim) { return {Kind::kBatchNorm, dim, dim, 0.0}; }
  static LayerSpec dropout(double rate) { return {Kind::kDropout, 0, 0, rate}; }
  static LayerSpec sigmoid() { return {Kind::kSigmoid}; }
};

class Sequential {
 public:
  Sequential() = default;
  // Parameter names are "<name>.<layer index>.<weight|bias|...>". Throws if
  // the declared dimensions do not chain.
  Sequential(std::string name, std::span<const LayerSpec> specs, Rng& init_rng);

  Tensor forward(const Tensor& input, Mode mode);
  Tensor backward(const Tensor& grad_output);
  std::vector<Parameter*> parameters();
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  std::string describe() const;

 private:
  std::string name_;
  std::vector<std::unique_ptr<Layer>> layers_;
  int input_dim_ = 0;
  int output_dim_ = 0;
};

void zero_grad(std::span<Parameter* const> params);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over the trainable parameters.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});
  void step();
  int steps() const { return step_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  int step_ = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

double relative_error(double analytic, double numeric);

// Compares analytic gradients of every trainable entry against central
// differences. `evaluate(true)` must compute the loss and accumulate
// gradients into zeroed Parameter::grad; `evaluate(false)` only the loss.
GradientCheckResult gradient_check(const std::vector<Parameter*>& params,
                                   const std::function<double(bool)>& evaluate,
                                   double step = 1e-5);

// Checks one layer's input and parameter gradients under the loss
// sum(forward(x) .* weights) for random weights.
GradientCheckResult layer_gradient_check(Layer& layer, const Tensor& input, Rng& rng,
                                         double step = 1e-5);

// "SPN1" checkpoint: magic, u32 tensor count, then per tensor u32 name length,
// name bytes, u32 rank, u32 dims, u32 precision (32|64), little-endian data.
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<double> data;
  bool single_precision = false;

  std::size_t element_count() const;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
  void add(NamedTensor tensor);
  void set_metadata(const std::string& key, double value);
  double metadata(const std::string& key) const;
  bool has_metadata(const std::string& key) const;
};

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

NamedTensor to_named(const Parameter& param, bool single_precision = false);
// Throws naming the first parameter that is missing or has the wrong shape,
// or the first unexpected non-metadata tensor.
void validate_parameters(const Checkpoint& checkpoint, const std::vector<Parameter*>& params);
// validate_parameters, then copies; params are untouched on error.
void assign_parameters(const Checkpoint& checkpoint, const std::vector<Parameter*>& params);

}  // namespace sparse3d::nn

#endif  // SPARSE3D_NN_HPP_
