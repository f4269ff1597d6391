#include "sparse3d/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparse3d/binary_io.hpp"
#include "sparse3d/error.hpp"

namespace sparse3d::nn {

namespace {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

void require_shape(bool ok, const std::string& what) {
  if (!ok) throw Error("shape mismatch: " + what);
}

// out = a * b with a fixed summation order over the shared dimension for every
// output element, so each row's result is independent of which other rows are
// in the batch and where (Eigen's blocked GEMM is not). Full 16-column panels
// use vector accumulators; the remaining columns are summed one at a time.
using Lane8 = double __attribute__((vector_size(64)));

inline Lane8 load8(const double* p) {
  Lane8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, Lane8 v) { std::memcpy(p, &v, sizeof v); }

template <int kRows>
void panel(const double* a, Eigen::Index depth, const double* b, Eigen::Index m, Eigen::Index col,
           double* out, Eigen::Index row) {
  Lane8 lo[kRows], hi[kRows];
  for (int r = 0; r < kRows; ++r) lo[r] = hi[r] = Lane8{};
  for (Eigen::Index k = 0; k < depth; ++k) {
    const Lane8 w0 = load8(b + k * m + col), w1 = load8(b + k * m + col + 8);
    for (int r = 0; r < kRows; ++r) {
      const double s = a[(row + r) * depth + k];
      lo[r] += s * w0;
      hi[r] += s * w1;
    }
  }
  for (int r = 0; r < kRows; ++r) {
    store8(out + (row + r) * m + col, lo[r]);
    store8(out + (row + r) * m + col + 8, hi[r]);
  }
}

void matmul_rows(const Tensor& a, const Tensor& b, Tensor& out) {
  const Eigen::Index n = a.rows(), depth = a.cols(), m = b.cols();
  out.resize(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const Eigen::Index m_panels = m - m % 16;
  Eigen::Index i = 0;
  for (; i + 4 <= n; i += 4) {
    for (Eigen::Index col = 0; col < m_panels; col += 16) panel<4>(pa, depth, pb, m, col, po, i);
  }
  for (; i < n; ++i) {
    for (Eigen::Index col = 0; col < m_panels; col += 16) panel<1>(pa, depth, pb, m, col, po, i);
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index col = m_panels; col < m; ++col) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < depth; ++k) sum += pa[r * depth + k] * pb[k * m + col];
      po[r * m + col] = sum;
    }
  }
}

}  // namespace

Tensor linear_forward(const Tensor& weight, const Tensor& bias, const Tensor& input) {
  require_shape(input.cols() == weight.cols(),
                "input " + shape_string(input.rows(), input.cols()) + " vs weight " +
                    shape_string(weight.rows(), weight.cols()));
  require_shape(bias.rows() == 1 && bias.cols() == weight.rows(), "bias vs weight");
  const Tensor weight_t = weight.transpose();
  Tensor out;
  matmul_rows(input, weight_t, out);
  out.rowwise() += bias.row(0);
  return out;
}

LinearGrads linear_backward(const Tensor& weight, const Tensor& input, const Tensor& grad_output) {
  require_shape(grad_output.rows() == input.rows() && grad_output.cols() == weight.rows(),
                "grad_output " + shape_string(grad_output.rows(), grad_output.cols()));
  LinearGrads g;
  g.weight = grad_output.transpose() * input;
  g.bias = grad_output.colwise().sum();
  matmul_rows(grad_output, weight, g.input);
  return g;
}

MaxPoolResult maxpool_rows(const Tensor& input) {
  if (input.rows() == 0) throw Error("maxpool_rows: empty input");
  MaxPoolResult r;
  r.values = input.row(0);
  r.argmax.assign(static_cast<std::size_t>(input.cols()), 0);
  for (Eigen::Index i = 1; i < input.rows(); ++i) {
    for (Eigen::Index j = 0; j < input.cols(); ++j) {
      if (input(i, j) > r.values[j]) {
        r.values[j] = input(i, j);
        r.argmax[static_cast<std::size_t>(j)] = i;
      }
    }
  }
  return r;
}

Tensor maxpool_rows_backward(const RowVector& grad_values, const std::vector<Eigen::Index>& argmax,
                             Eigen::Index rows) {
  Tensor g = Tensor::Zero(rows, grad_values.size());
  for (Eigen::Index j = 0; j < grad_values.size(); ++j) {
    g(argmax[static_cast<std::size_t>(j)], j) += grad_values[j];
  }
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_shape(static_cast<std::size_t>(logits.rows()) == labels.size(), "labels vs logits");
  LossResult r;
  r.grad.resize(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= logits.cols()) throw Error("label out of range");
    const double m = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - m).exp();
    const double sum = shifted.sum();
    r.loss += (m + std::log(sum) - logits(i, label)) * scale;
    r.grad.row(i) = shifted / sum;
    r.grad(i, label) -= 1.0;
  }
  r.grad *= scale;
  return r;
}

LossResult binary_cross_entropy_logits(const Tensor& logits, const Tensor& targets) {
  require_shape(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
                "targets vs logits");
  LossResult r;
  r.grad.resize(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(logits.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double x = logits(i, j), t = targets(i, j);
      total += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
      r.grad(i, j) = (sigmoid(x) - t) * scale;
    }
  }
  r.loss = total * scale;
  return r;
}

Linear::Linear(int in, int out, Rng& init_rng) {
  if (in < 1 || out < 1) throw Error("linear layer dimensions must be positive");
  const double bound = std::sqrt(6.0 / in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  weight_.value.resize(out, in);
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i) weight_.value.data()[i] = dist(init_rng);
  weight_.grad = Tensor::Zero(out, in);
  bias_.value = Tensor::Zero(1, out);
  bias_.grad = Tensor::Zero(1, out);
}

Tensor Linear::forward(const Tensor& input, Mode) {
  input_ = input;
  return linear_forward(weight_.value, bias_.value, input);
}

Tensor Linear::backward(const Tensor& grad_output) {
  LinearGrads g = linear_backward(weight_.value, input_, grad_output);
  weight_.grad += g.weight;
  bias_.grad += g.bias;
  return std::move(g.input);
}

std::string Linear::describe() const {
  return "linear(" + std::to_string(weight_.value.cols()) + "," +
         std::to_string(weight_.value.rows()) + ")";
}

Tensor ReLU::forward(const Tensor& input, Mode) {
  output_ = input.cwiseMax(0.0);
  return output_;
}

Tensor ReLU::backward(const Tensor& grad_output) {
  Tensor grad(grad_output.rows(), grad_output.cols());
  const double* y = output_.data();
  const double* g = grad_output.data();
  double* out = grad.data();
  for (Eigen::Index i = 0; i < grad.size(); ++i) out[i] = y[i] > 0.0 ? g[i] : 0.0;
  return grad;
}

Tensor Sigmoid::forward(const Tensor& input, Mode) {
  output_ = input.unaryExpr([](double x) { return sigmoid(x); });
  return output_;
}

Tensor Sigmoid::backward(const Tensor& grad_output) {
  return grad_output.array() * output_.array() * (1.0 - output_.array());
}

BatchNorm::BatchNorm(int dim, double momentum, double epsilon)
    : dim_(dim), momentum_(momentum), epsilon_(epsilon) {
  if (dim < 1) throw Error("batchnorm dimension must be positive");
  gamma_.value = Tensor::Ones(1, dim);
  gamma_.grad = Tensor::Zero(1, dim);
  beta_.value = Tensor::Zero(1, dim);
  beta_.grad = Tensor::Zero(1, dim);
  running_mean_.value = Tensor::Zero(1, dim);
  running_mean_.trainable = false;
  running_var_.value = Tensor::Ones(1, dim);
  running_var_.trainable = false;
}

Tensor BatchNorm::forward(const Tensor& input, Mode mode) {
  require_shape(input.cols() == dim_, "batchnorm input width");
  const Eigen::Index n = input.rows(), d = dim_;
  RowVector mean, var;
  if (mode == Mode::kTrain) {
    if (n == 0) throw Error("batchnorm: empty batch");
    mean = RowVector::Zero(d);
    var = RowVector::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* x = input.row(i).data();
      for (Eigen::Index j = 0; j < d; ++j) mean[j] += x[j];
    }
    mean /= static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* x = input.row(i).data();
      for (Eigen::Index j = 0; j < d; ++j) {
        const double c = x[j] - mean[j];
        var[j] += c * c;
      }
    }
    var /= static_cast<double>(n);
    const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
    running_mean_.value = momentum_ * running_mean_.value + (1.0 - momentum_) * mean;
    running_var_.value = momentum_ * running_var_.value + (1.0 - momentum_) * unbias * var;
  } else {
    mean = running_mean_.value.row(0);
    var = running_var_.value.row(0);
  }
  inv_std_ = (var.array() + epsilon_).rsqrt().matrix();
  train_mode_ = mode == Mode::kTrain;
  normalized_.resize(n, d);
  Tensor out(n, d);
  const double* gamma = gamma_.value.data();
  const double* beta = beta_.value.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* x = input.row(i).data();
    double* z = normalized_.row(i).data();
    double* y = out.row(i).data();
    for (Eigen::Index j = 0; j < d; ++j) {
      z[j] = (x[j] - mean[j]) * inv_std_[j];
      y[j] = z[j] * gamma[j] + beta[j];
    }
  }
  return out;
}

Tensor BatchNorm::backward(const Tensor& grad_output) {
  const Eigen::Index n = grad_output.rows(), d = dim_;
  RowVector sum_g = RowVector::Zero(d), sum_gz = RowVector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* g = grad_output.row(i).data();
    const double* z = normalized_.row(i).data();
    for (Eigen::Index j = 0; j < d; ++j) {
      sum_g[j] += g[j];
      sum_gz[j] += g[j] * z[j];
    }
  }
  gamma_.grad.row(0) += sum_gz;
  beta_.grad.row(0) += sum_g;
  const double* gamma = gamma_.value.data();
  Tensor grad_input(n, d);
  if (!train_mode_) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* g = grad_output.row(i).data();
      double* out = grad_input.row(i).data();
      for (Eigen::Index j = 0; j < d; ++j) out[j] = g[j] * gamma[j] * inv_std_[j];
    }
    return grad_input;
  }
  const double count = static_cast<double>(n);
  RowVector scale(d);
  for (Eigen::Index j = 0; j < d; ++j) scale[j] = gamma[j] * inv_std_[j] / count;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* g = grad_output.row(i).data();
    const double* z = normalized_.row(i).data();
    double* out = grad_input.row(i).data();
    for (Eigen::Index j = 0; j < d; ++j) {
      out[j] = scale[j] * (count * g[j] - sum_g[j] - z[j] * sum_gz[j]);
    }
  }
  return grad_input;
}

std::string BatchNorm::describe() const { return "batchnorm(" + std::to_string(dim_) + ")"; }

Dropout::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& input, Mode mode) {
  if (mode == Mode::kEval || rate_ == 0.0) {
    mask_.resize(0, 0);
    return input;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate_);
  mask_.resize(input.rows(), input.cols());
  for (Eigen::Index i = 0; i < mask_.size(); ++i) {
    mask_.data()[i] = unit(rng_) >= rate_ ? keep_scale : 0.0;
  }
  return input.cwiseProduct(mask_);
}

Tensor Dropout::backward(const Tensor& grad_output) {
  if (mask_.size() == 0) return grad_output;
  return grad_output.cwiseProduct(mask_);
}

std::string Dropout::describe() const {
  std::ostringstream s;
  s << "dropout(" << rate_ << ")";
  return s.str();
}

Sequential::Sequential(std::string name, std::span<const LayerSpec> specs, Rng& init_rng)
    : name_(std::move(name)) {
  if (specs.empty()) throw Error(name_ + ": empty layer stack");
  int current = 0;
  auto chain = [&](int in, int out, std::size_t index) {
    if (current != 0 && in != current) {
      throw Error(name_ + ": layer " + std::to_string(index) + " expects width " +
                  std::to_string(in) + " but receives " + std::to_string(current));
    }
    if (current == 0) input_dim_ = in;
    current = out;
  };
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    switch (s.kind) {
      case LayerSpec::Kind::kLinear:
        chain(s.in, s.out, i);
        layers_.push_back(std::make_unique<Linear>(s.in, s.out, init_rng));
        break;
      case LayerSpec::Kind::kBatchNorm:
        chain(s.in, s.in, i);
        layers_.push_back(std::make_unique<BatchNorm>(s.in));
        break;
      case LayerSpec::Kind::kReLU:
        layers_.push_back(std::make_unique<ReLU>());
        break;
      case LayerSpec::Kind::kSigmoid:
        layers_.push_back(std::make_unique<Sigmoid>());
        break;
      case LayerSpec::Kind::kDropout:
        layers_.push_back(std::make_unique<Dropout>(s.rate, init_rng()));
        break;
    }
  }
  if (current == 0) throw Error(name_ + ": stack has no sized layer");
  output_dim_ = current;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    static const char* kBatchNormNames[] = {"gamma", "beta", "running_mean", "running_var"};
    auto params = layers_[i]->parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      const bool is_linear = dynamic_cast<Linear*>(layers_[i].get()) != nullptr;
      const std::string leaf = is_linear ? (p == 0 ? "weight" : "bias") : kBatchNormNames[p];
      params[p]->name = name_ + "." + std::to_string(i) + "." + leaf;
    }
  }
}

Tensor Sequential::forward(const Tensor& input, Mode mode) {
  Tensor x = input;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  return x;
}

Tensor Sequential::backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    auto p = layer->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::string Sequential::describe() const {
  std::string s = name_ + ":";
  for (const auto& layer : layers_) s += " " + layer->describe();
  return s;
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (p->trainable) p->grad.setZero(p->value.rows(), p->value.cols());
  }
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : options_(options) {
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    params_.push_back(p);
    first_moment_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    second_moment_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, step_);
  const double correction2 = 1.0 - std::pow(b2, step_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw Error("adam: gradient shape mismatch for " + p.name);
    }
    first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * p.grad;
    second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= options_.learning_rate * (first_moment_[i].array() / correction1) /
                       ((second_moment_[i].array() / correction2).sqrt() + options_.epsilon);
  }
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradientCheckResult gradient_check(const std::vector<Parameter*>& params,
                                   const std::function<double(bool)>& evaluate, double step) {
  zero_grad(params);
  evaluate(true);
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradientCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    if (!p.trainable) continue;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& w = p.value.data()[i];
      const double saved = w;
      w = saved + step;
      const double plus = evaluate(false);
      w = saved - step;
      const double minus = evaluate(false);
      w = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double err = relative_error(analytic[pi].data()[i], numeric);
      ++result.checked;
      if (result.worst.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

GradientCheckResult layer_gradient_check(Layer& layer, const Tensor& input, Rng& rng,
                                         double step) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor weights(input.rows(), 0);
  Parameter x{"input", input, Tensor::Zero(input.rows(), input.cols()), true};
  {
    const Tensor probe = layer.forward(input, Mode::kTrain);
    weights.resize(probe.rows(), probe.cols());
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = gauss(rng);
  }
  std::vector<Parameter*> params = layer.parameters();
  params.push_back(&x);
  auto evaluate = [&](bool backward) {
    const Tensor y = layer.forward(x.value, Mode::kTrain);
    const double loss = y.cwiseProduct(weights).sum();
    if (backward) x.grad += layer.backward(weights);
    return loss;
  };
  return gradient_check(params, evaluate, step);
}

std::size_t NamedTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void Checkpoint::add(NamedTensor tensor) {
  if (find(tensor.name) != nullptr) throw Error("duplicate tensor name '" + tensor.name + "'");
  tensors.push_back(std::move(tensor));
}

namespace {
const std::string kMetaPrefix = "meta/";
}

void Checkpoint::set_metadata(const std::string& key, double value) {
  const std::string name = kMetaPrefix + key;
  for (auto& t : tensors) {
    if (t.name == name) {
      t.data = {value};
      return;
    }
  }
  tensors.push_back({name, {1}, {value}, false});
}

double Checkpoint::metadata(const std::string& key) const {
  const NamedTensor* t = find(kMetaPrefix + key);
  if (t == nullptr || t->data.size() != 1) throw Error("checkpoint has no metadata '" + key + "'");
  return t->data[0];
}

bool Checkpoint::has_metadata(const std::string& key) const {
  return find(kMetaPrefix + key) != nullptr;
}

namespace {
constexpr char kCheckpointMagic[] = "SPN1";
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  binary::write_magic(out, kCheckpointMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    if (t.data.size() != t.element_count()) {
      throw Error("tensor '" + t.name + "' data does not match its shape");
    }
    binary::write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    binary::write_magic(out, t.name);
    binary::write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) binary::write_u32(out, d);
    binary::write_u32(out, t.single_precision ? 32u : 64u);
    for (double v : t.data) {
      if (t.single_precision) {
        binary::write_f32(out, static_cast<float>(v));
      } else {
        binary::write_f64(out, v);
      }
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(std::istream& in) {
  binary::expect_magic(in, kCheckpointMagic);
  Checkpoint ck;
  const std::uint32_t count = binary::read_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint32_t name_len = binary::read_u32(in);
    if (name_len > 4096) throw FormatError("tensor name too long");
    t.name = binary::read_bytes(in, name_len);
    const std::uint32_t rank = binary::read_u32(in);
    if (rank > kMaxRank) throw FormatError("tensor '" + t.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(binary::read_u32(in));
    const std::uint32_t precision = binary::read_u32(in);
    if (precision != 32 && precision != 64) {
      throw FormatError("tensor '" + t.name + "' has precision flag " + std::to_string(precision));
    }
    t.single_precision = precision == 32;
    const std::size_t n = t.element_count();
    if (n > (std::size_t{1} << 31)) throw FormatError("tensor '" + t.name + "' too large");
    t.data.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      t.data.push_back(t.single_precision ? binary::read_f32(in) : binary::read_f64(in));
    }
    if (ck.find(t.name) != nullptr) throw FormatError("duplicate tensor '" + t.name + "'");
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_checkpoint(in);
}

NamedTensor to_named(const Parameter& param, bool single_precision) {
  NamedTensor t;
  t.name = param.name;
  t.shape = {static_cast<std::uint32_t>(param.value.rows()),
             static_cast<std::uint32_t>(param.value.cols())};
  t.data.assign(param.value.data(), param.value.data() + param.value.size());
  t.single_precision = single_precision;
  return t;
}

void validate_parameters(const Checkpoint& checkpoint, const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) {
    const NamedTensor* t = checkpoint.find(p->name);
    if (t == nullptr) throw Error("architecture mismatch: checkpoint lacks tensor '" + p->name + "'");
    if (t->shape.size() != 2 || t->shape[0] != p->value.rows() || t->shape[1] != p->value.cols()) {
      std::string got;
      for (auto d : t->shape) got += (got.empty() ? "" : "x") + std::to_string(d);
      throw Error("architecture mismatch: tensor '" + p->name + "' has shape [" + got +
                  "], model expects " + shape_string(p->value.rows(), p->value.cols()));
    }
  }
  for (const auto& t : checkpoint.tensors) {
    if (t.name.rfind(kMetaPrefix, 0) == 0) continue;
    const bool known = std::any_of(params.begin(), params.end(),
                                   [&](const Parameter* p) { return p->name == t.name; });
    if (!known) throw Error("architecture mismatch: unexpected tensor '" + t.name + "'");
  }
}

void assign_parameters(const Checkpoint& checkpoint, const std::vector<Parameter*>& params) {
  validate_parameters(checkpoint, params);
  for (Parameter* p : params) {
    const NamedTensor* t = checkpoint.find(p->name);
    std::copy(t->data.begin(), t->data.end(), p->value.data());
  }
}

}  // namespace sparse3d::nn
