#pragma once

// Small dense feed-forward network with tanh hidden layers and a linear
// output, manual backpropagation, and an Adam optimizer over flat parameters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ranslice/error.hpp"
#include "ranslice/random.hpp"

namespace ranslice {

class Mlp {
 public:
  struct Cache {
    // activations[0] is the input, activations[k] the output of layer k
    // (tanh for hidden layers, raw for the output layer).
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    expects(sizes_.size() >= 2, "an MLP needs input and output sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      expects(sizes_[l] >= 1 && sizes_[l + 1] >= 1, "layer sizes must be positive");
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l + 1]) * (static_cast<std::size_t>(sizes_[l]) + 1);
    }
    params_.assign(n, 0.0);
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t layer_count() const { return offsets_.size(); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  // Orthogonal weights scaled by `hidden_gain` for hidden layers and
  // `output_gain` for the output layer; zero biases.
  void init_orthogonal(Rng& rng, double hidden_gain, double output_gain) {
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
      const auto cols = static_cast<std::size_t>(sizes_[l]);
      const double gain = l + 1 == layer_count() ? output_gain : hidden_gain;
      double* w = params_.data() + offsets_[l];
      if (gain == 0.0) {
        std::fill(w, w + rows * cols, 0.0);
      } else {
        orthogonal(rng, rows, cols, w);
        for (std::size_t i = 0; i < rows * cols; ++i) w[i] *= gain;
      }
      std::fill(w + rows * cols, w + rows * cols + rows, 0.0);
    }
  }

  std::vector<double> forward(std::span<const double> x, Cache* cache = nullptr) const {
    expects(static_cast<int>(x.size()) == input_size(), "MLP input size mismatch");
    std::vector<double> a(x.begin(), x.end());
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(a);
    }
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
      const auto cols = static_cast<std::size_t>(sizes_[l]);
      const double* w = params_.data() + offsets_[l];
      const double* b = w + rows * cols;
      std::vector<double> z(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        double acc = b[i];
        const double* wi = w + i * cols;
        for (std::size_t j = 0; j < cols; ++j) acc += wi[j] * a[j];
        z[i] = l + 1 == layer_count() ? acc : std::tanh(acc);
      }
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(const Cache& cache, std::span<const double> grad_out, std::span<double> grad) const {
    expects(grad.size() == params_.size(), "gradient buffer size mismatch");
    expects(cache.activations.size() == layer_count() + 1, "backward needs a forward cache");
    std::vector<double> delta(grad_out.begin(), grad_out.end());
    for (std::size_t l = layer_count(); l-- > 0;) {
      const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
      const auto cols = static_cast<std::size_t>(sizes_[l]);
      if (l + 1 != layer_count()) {
        const auto& out = cache.activations[l + 1];
        for (std::size_t i = 0; i < rows; ++i) delta[i] *= 1.0 - out[i] * out[i];
      }
      const auto& in = cache.activations[l];
      const double* w = params_.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + rows * cols;
      std::vector<double> prev(cols, 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        gb[i] += delta[i];
        const double* wi = w + i * cols;
        double* gwi = gw + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
          gwi[j] += delta[i] * in[j];
          prev[j] += wi[j] * delta[i];
        }
      }
      delta = std::move(prev);
    }
  }

 private:
  // Row-major rows x cols matrix with orthonormal rows (rows <= cols) or
  // orthonormal columns (rows > cols), via modified Gram-Schmidt.
  static void orthogonal(Rng& rng, std::size_t rows, std::size_t cols, double* w) {
    const bool by_rows = rows <= cols;
    const std::size_t count = by_rows ? rows : cols;
    const std::size_t len = by_rows ? cols : rows;
    std::vector<std::vector<double>> v(count, std::vector<double>(len));
    for (auto& vec : v)
      for (double& x : vec) x = standard_normal(rng);
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t j = 0; j < k; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += v[k][i] * v[j][i];
        for (std::size_t i = 0; i < len; ++i) v[k][i] -= dot * v[j][i];
      }
      double norm = 0.0;
      for (double x : v[k]) norm += x * x;
      norm = std::sqrt(norm);
      for (double& x : v[k]) x /= norm;
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) w[r * cols + c] = by_rows ? v[r][c] : v[c][r];
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    expects(params.size() == m_.size() && grad.size() == m_.size(), "Adam size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace ranslice
