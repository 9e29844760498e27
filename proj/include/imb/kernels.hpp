#pragma once

// Data-parallel inner loops. Every kernel has a plain serial version that
// serves as the reference in tests and an OpenMP version used by the
// library. Both produce bit-identical results: each output element is
// computed by the same sequence of operations regardless of thread count.

#include <cstddef>
#include <span>
#include <vector>

namespace imb::kernels {

// Row-major dense matrix view.
struct MatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

namespace serial {
// Population std over days for every period; values.size() == days * periods.
std::vector<double> period_stddev(std::span<const double> values, std::size_t periods);
// Symmetric RBF Gram matrix exp(-gamma * |xi - xj|^2), row-major rows x rows.
std::vector<double> rbf_gram(MatrixView x, double gamma);
}  // namespace serial

namespace omp {
std::vector<double> period_stddev(std::span<const double> values, std::size_t periods);
std::vector<double> rbf_gram(MatrixView x, double gamma);
}  // namespace omp

// Squared Euclidean distance, shared by both variants.
inline double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace imb::kernels
