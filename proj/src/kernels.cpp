#include "imb/kernels.hpp"

#include <cmath>

namespace imb::kernels {

namespace {

double column_stddev(std::span<const double> values, std::size_t periods, std::size_t p) {
  const std::size_t days = values.size() / periods;
  double mean = 0.0;
  for (std::size_t d = 0; d < days; ++d) mean += values[d * periods + p];
  mean /= static_cast<double>(days);
  double ss = 0.0;
  for (std::size_t d = 0; d < days; ++d) {
    const double e = values[d * periods + p] - mean;
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(days));
}

}  // namespace

namespace serial {

std::vector<double> period_stddev(std::span<const double> values, std::size_t periods) {
  std::vector<double> out(periods);
  for (std::size_t p = 0; p < periods; ++p) out[p] = column_stddev(values, periods, p);
  return out;
}

std::vector<double> rbf_gram(MatrixView x, double gamma) {
  const std::size_t n = x.rows;
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double v = std::exp(-gamma * squared_distance(x.row(i), x.row(j), x.cols));
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  }
  return k;
}

}  // namespace serial

namespace omp {

std::vector<double> period_stddev(std::span<const double> values, std::size_t periods) {
  std::vector<double> out(periods);
  const auto np = static_cast<long>(periods);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < np; ++p) out[p] = column_stddev(values, periods, static_cast<std::size_t>(p));
  return out;
}

std::vector<double> rbf_gram(MatrixView x, double gamma) {
  const std::size_t n = x.rows;
  std::vector<double> k(n * n);
  const auto ni = static_cast<long>(n);
  // Rows have triangular cost; dynamic scheduling balances it.
#pragma omp parallel for schedule(dynamic, 16)
  for (long ii = 0; ii < ni; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    k[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double v = std::exp(-gamma * squared_distance(x.row(i), x.row(j), x.cols));
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  }
  return k;
}

}  // namespace omp

}  // namespace imb::kernels
