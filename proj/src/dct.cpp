#include "mopred/dct.hpp"

#include <cmath>
#include <stdexcept>

namespace mopred {

DctBasis DctBasis::make(int l, int m) {
  if (l < 1 || m < 1 || m > 2 * l)
    throw std::runtime_error("dct basis: need 1 <= M <= 2L, got L=" +
                             std::to_string(l) + " M=" + std::to_string(m));
  const int n = 2 * l;
  const double pi = 3.14159265358979323846;
  DctBasis b;
  b.L = l;
  b.M = m;
  b.d.resize(static_cast<size_t>(n) * m);
  const double c0 = std::sqrt(1.0 / n);
  const double cm = std::sqrt(1.0 / l);
  for (int t = 0; t < n; ++t)
    for (int k = 0; k < m; ++k)
      b.d[static_cast<size_t>(t) * m + k] =
          (k == 0 ? c0 : cm) * std::cos(pi * (2 * t + 1) * k / (2.0 * n));
  return b;
}

Tensor DctBasis::projection() const {
  const int n = 2 * L;
  std::vector<double> p(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < M; ++k) acc += at(i, k) * at(j, k);
      p[static_cast<size_t>(i) * n + j] = acc;
    }
  return Tensor({n, n}, std::move(p));
}

Tensor smoothness_loss(const Tensor& history_tail, const Tensor& prediction_head,
                       const DctBasis& basis) {
  const Shape& hs = history_tail.shape();
  const Shape& ps = prediction_head.shape();
  if (hs.size() != 2 || ps.size() != 2 || hs != ps || hs[1] != basis.L)
    throw std::runtime_error("smoothness_loss: blocks must both be K x L, got " +
                             shape_str(hs) + " and " + shape_str(ps) + " with L=" +
                             std::to_string(basis.L));
  const Tensor parts[2] = {history_tail, prediction_head};
  Tensor z = concat(parts, 1);                    // K x 2L
  Tensor z_smooth = matmul(z, basis.projection());  // K x 2L
  Tensor residual = sub(z, z_smooth);
  return scale(squared_norm(residual), 1.0 / (2.0 * basis.L));
}

}  // namespace mopred
