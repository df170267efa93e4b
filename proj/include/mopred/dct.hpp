#pragma once

#include <vector>

#include "mopred/tensor.hpp"

namespace mopred {

// The first M orthonormal DCT-II basis vectors over 2L samples, as a
// 2L x M matrix. Column 0 is the constant vector.
struct DctBasis {
  int L = 0;
  int M = 0;
  std::vector<double> d;  // row-major, 2L rows by M columns

  static DctBasis make(int l, int m);

  double at(int t, int m) const {
    return d[static_cast<size_t>(t) * M + m];
  }

  // D * D^T as a constant 2L x 2L tensor; projects a time profile onto the
  // retained low frequencies.
  Tensor projection() const;
};

// Junction smoothness penalty: the mean squared residual, over all 2L
// columns, between [last L history poses | first L predicted poses] and its
// projection onto the basis. history_tail is data (K x L, no gradient);
// prediction_head is K x L.
Tensor smoothness_loss(const Tensor& history_tail, const Tensor& prediction_head,
                       const DctBasis& basis);

}  // namespace mopred
