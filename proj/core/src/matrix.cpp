#include "fpr/matrix.hpp"

#include <cmath>

#include "fpr/errors.hpp"

namespace fpr {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  Matrix out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw InvalidInputError("ragged rows in matrix literal");
    }
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = rows[i][j];
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw InvalidInputError("matrix shape mismatch");
  double worst = 0.0;
  const auto fa = a.flat();
  const auto fb = b.flat();
  for (std::size_t k = 0; k < fa.size(); ++k) {
    worst = std::max(worst, std::abs(fa[k] - fb[k]));
  }
  return worst;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw InvalidInputError("matrix shape mismatch");
  double sum = 0.0;
  const auto fa = a.flat();
  const auto fb = b.flat();
  for (std::size_t k = 0; k < fa.size(); ++k) {
    const double d = fa[k] - fb[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace fpr
