#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "spectgnn/rng.hpp"
#include "spectgnn/tensor.hpp"

namespace testing {

inline spectgnn::Tensor random_tensor(spectgnn::Rng& rng, spectgnn::Shape shape, double lo = -1.0,
                                      double hi = 1.0, bool requires_grad = false) {
  std::vector<double> v(spectgnn::numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return spectgnn::Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const spectgnn::Tensor& a, const std::vector<double>& b) {
  return max_abs_diff(a.data(), std::span<const double>(b));
}

inline double max_abs_diff(const spectgnn::Tensor& a, const spectgnn::Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  return max_abs_diff(a.data(), b.data());
}

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("spectgnn_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
