#pragma once

// Fully connected ReLU network over a flat parameter vector. Inputs are laid
// out one sample per column. For each layer the weight matrix (out x in,
// column-major) is followed by its bias.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "horizon/error.hpp"
#include "horizon/random.hpp"

namespace horizon::dqn {

class Mlp {
 public:
  using Matrix = Eigen::MatrixXd;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  struct Cache {
    // activations[0] is the input; activations[l] the output of layer l.
    std::vector<Matrix> activations;
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw UsageError("network needs at least an input and an output layer");
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw UsageError("layer sizes must be positive");
      w_off_.push_back(off);
      off += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1];
      b_off_.push_back(off);
      off += static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_.assign(off, 0.0);
  }

  // Weights and biases uniform in +-1/sqrt(fan_in).
  void init_uniform(Rng& rng) {
    for (std::size_t l = 0; l < layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      const std::size_t end = b_off_[l] + static_cast<std::size_t>(sizes_[l + 1]);
      for (std::size_t i = w_off_[l]; i < end; ++i) params_[i] = rng.uniform(-bound, bound);
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t layers() const { return w_off_.size(); }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  ConstMatrixMap weight(std::size_t l) const {
    return ConstMatrixMap(params_.data() + w_off_[l], sizes_[l + 1], sizes_[l]);
  }
  MatrixMap weight(std::size_t l) { return MatrixMap(params_.data() + w_off_[l], sizes_[l + 1], sizes_[l]); }
  ConstVectorMap bias(std::size_t l) const { return ConstVectorMap(params_.data() + b_off_[l], sizes_[l + 1]); }
  VectorMap bias(std::size_t l) { return VectorMap(params_.data() + b_off_[l], sizes_[l + 1]); }

  Matrix forward(const Matrix& x) const {
    check_input(x);
    Matrix a = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      Matrix z = weight(l) * a;
      z.colwise() += bias(l);
      if (l + 1 < layers()) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    return a;
  }

  Matrix forward(const Matrix& x, Cache& cache) const {
    check_input(x);
    cache.activations.resize(layers() + 1);
    cache.activations[0] = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      Matrix& z = cache.activations[l + 1];
      z.noalias() = weight(l) * cache.activations[l];
      z.colwise() += bias(l);
      if (l + 1 < layers()) z = z.cwiseMax(0.0);
    }
    return cache.activations.back();
  }

  // Gradient of sum_ij d_out(i,j) * output(i,j) with respect to the
  // parameters, written into grad (resized to num_params()).
  void backward(const Cache& cache, const Matrix& d_out, std::vector<double>& grad) const {
    grad.assign(params_.size(), 0.0);
    Matrix delta = d_out;
    for (std::size_t l = layers(); l-- > 0;) {
      const Matrix& input = cache.activations[l];
      MatrixMap gw(grad.data() + w_off_[l], sizes_[l + 1], sizes_[l]);
      VectorMap gb(grad.data() + b_off_[l], sizes_[l + 1]);
      gw.noalias() = delta * input.transpose();
      gb = delta.rowwise().sum();
      if (l == 0) break;
      Matrix back = weight(l).transpose() * delta;
      delta = back.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
    }
  }

 private:
  void check_input(const Matrix& x) const {
    if (x.rows() != input_dim()) throw UsageError("network input has wrong dimension");
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> w_off_;
  std::vector<std::size_t> b_off_;
  std::vector<double> params_;
};

}  // namespace horizon::dqn
