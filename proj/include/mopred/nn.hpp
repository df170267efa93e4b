#pragma once

#include <span>
#include <string>
#include <vector>

#include "mopred/dataset.hpp"
#include "mopred/tensor.hpp"

namespace mopred {

// Column-vector convention: activations are shaped {n, 1}.

Tensor one_hot(int index, int count);

// K x count tensor from motion frames [start, start+count); channels are rows.
Tensor motion_to_tensor(const Motion& m, int start, int count);
Tensor pose_to_tensor(std::span<const double> pose);  // K x 1

struct LinearParams {
  Tensor w, b;

  static LinearParams init(int in, int out, Rng& rng);
  Tensor forward(const Tensor& x) const { return add(matmul(w, x), b); }
  void collect(ParamMap& into, const std::string& prefix) const;
  static LinearParams from_params(const ParamMap& p, const std::string& prefix);
};

// Gated recurrent unit cell with gates stacked [reset; update; candidate].
struct GruParams {
  Tensor w_x, b_x;  // 3H x in, 3H x 1
  Tensor w_h, b_h;  // 3H x H,  3H x 1
  int in = 0;
  int hidden = 0;

  static GruParams init(int in, int hidden, Rng& rng);
  Tensor step(const Tensor& x, const Tensor& h) const;
  // Runs over a frame sequence; returns the final hidden state.
  Tensor run(std::span<const Tensor> xs, const Tensor& h0) const;
  Tensor zero_state() const { return Tensor::zeros({hidden, 1}); }
  void collect(ParamMap& into, const std::string& prefix) const;
  static GruParams from_params(const ParamMap& p, const std::string& prefix);
};

enum class Activation { kTanh, kRelu };

// Fully connected trunk; the activation follows every layer.
struct MlpParams {
  std::vector<LinearParams> layers;
  Activation act = Activation::kTanh;

  static MlpParams init(int in, std::span<const int> widths, Activation act, Rng& rng);
  Tensor forward(const Tensor& x) const;
  // Activations after layer `index` (for feature extraction).
  Tensor forward_until(const Tensor& x, int index) const;
  void collect(ParamMap& into, const std::string& prefix) const;
  static MlpParams from_params(const ParamMap& p, const std::string& prefix,
                               int n_layers, Activation act);
};

}  // namespace mopred
