#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "dvsgait/errors.hpp"
#include "dvsgait/rng.hpp"

namespace dvsgait {

// Dense row-major tensor of doubles, rank <= 4. Double precision throughout:
// the test oracles (finite differences, analytic recurrences) need it.
class Tensor {
 public:
  Tensor() : rank_(0), dims_{0, 0, 0, 0} {}

  explicit Tensor(std::initializer_list<std::size_t> dims) { reshape(dims); }

  void reshape(std::initializer_list<std::size_t> dims) {
    if (dims.size() == 0 || dims.size() > 4)
      throw Error(ErrorKind::invalid_argument, "tensor rank must be 1..4");
    rank_ = dims.size();
    dims_ = {1, 1, 1, 1};
    std::size_t i = 0, n = 1;
    for (std::size_t d : dims) {
      dims_[i++] = d;
      n *= d;
    }
    data_.assign(n, 0.0);
  }

  std::size_t rank() const { return rank_; }
  std::size_t dim(std::size_t i) const { return dims_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i) { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }
  const double& at(std::size_t i) const { return data_[i]; }
  const double& at(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }
  const double& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  const double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }

  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return rank_ == o.rank_ && dims_ == o.dims_; }

  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  // this += a * x, shapes must match
  void axpy(double a, const Tensor& x) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  }

  void scale(double a) {
    for (double& v : data_) v *= a;
  }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (double& v : data_) v = rng.uniform(lo, hi);
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t rank_;
  std::array<std::size_t, 4> dims_;
  std::vector<double> data_;
};

}  // namespace dvsgait
