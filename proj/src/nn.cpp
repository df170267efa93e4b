#include "mopred/nn.hpp"

#include <stdexcept>

namespace mopred {

Tensor one_hot(int index, int count) {
  if (index < 0 || index >= count)
    throw std::runtime_error("one_hot: index " + std::to_string(index) +
                             " out of range for " + std::to_string(count));
  std::vector<double> d(static_cast<size_t>(count), 0.0);
  d[static_cast<size_t>(index)] = 1.0;
  return Tensor({count, 1}, std::move(d));
}

Tensor motion_to_tensor(const Motion& m, int start, int count) {
  if (start < 0 || count < 1 || start + count > m.frames())
    throw std::runtime_error("motion_to_tensor: window out of range");
  std::vector<double> d(static_cast<size_t>(m.K) * count);
  for (int c = 0; c < m.K; ++c)
    for (int t = 0; t < count; ++t)
      d[static_cast<size_t>(c) * count + t] = m.frame(start + t)[static_cast<size_t>(c)];
  return Tensor({m.K, count}, std::move(d));
}

Tensor pose_to_tensor(std::span<const double> pose) {
  return Tensor({static_cast<int>(pose.size()), 1},
                std::vector<double>(pose.begin(), pose.end()));
}

LinearParams LinearParams::init(int in, int out, Rng& rng) {
  LinearParams p;
  p.w = Tensor::uniform_init({out, in}, in, rng);
  p.b = Tensor::uniform_init({out, 1}, in, rng);
  return p;
}

void LinearParams::collect(ParamMap& into, const std::string& prefix) const {
  into[prefix + ".w"] = w;
  into[prefix + ".b"] = b;
}

LinearParams LinearParams::from_params(const ParamMap& p, const std::string& prefix) {
  LinearParams out;
  out.w = p.at(prefix + ".w");
  out.b = p.at(prefix + ".b");
  return out;
}

GruParams GruParams::init(int in, int hidden, Rng& rng) {
  GruParams p;
  p.in = in;
  p.hidden = hidden;
  p.w_x = Tensor::uniform_init({3 * hidden, in}, in, rng);
  p.b_x = Tensor::uniform_init({3 * hidden, 1}, in, rng);
  p.w_h = Tensor::uniform_init({3 * hidden, hidden}, hidden, rng);
  p.b_h = Tensor::uniform_init({3 * hidden, 1}, hidden, rng);
  return p;
}

Tensor GruParams::step(const Tensor& x, const Tensor& h) const {
  const int hdim = hidden;
  Tensor gx = add(matmul(w_x, x), b_x);
  Tensor gh = add(matmul(w_h, h), b_h);
  Tensor r = sigmoid_op(add(slice(gx, 0, 0, hdim), slice(gh, 0, 0, hdim)));
  Tensor z = sigmoid_op(add(slice(gx, 0, hdim, hdim), slice(gh, 0, hdim, hdim)));
  Tensor n = tanh_op(add(slice(gx, 0, 2 * hdim, hdim),
                         mul(r, slice(gh, 0, 2 * hdim, hdim))));
  // h' = (1 - z) .* n + z .* h
  Tensor one = Tensor::full({hdim, 1}, 1.0);
  return add(mul(sub(one, z), n), mul(z, h));
}

Tensor GruParams::run(std::span<const Tensor> xs, const Tensor& h0) const {
  Tensor h = h0;
  for (const Tensor& x : xs) h = step(x, h);
  return h;
}

void GruParams::collect(ParamMap& into, const std::string& prefix) const {
  into[prefix + ".w_x"] = w_x;
  into[prefix + ".b_x"] = b_x;
  into[prefix + ".w_h"] = w_h;
  into[prefix + ".b_h"] = b_h;
}

GruParams GruParams::from_params(const ParamMap& p, const std::string& prefix) {
  GruParams out;
  out.w_x = p.at(prefix + ".w_x");
  out.b_x = p.at(prefix + ".b_x");
  out.w_h = p.at(prefix + ".w_h");
  out.b_h = p.at(prefix + ".b_h");
  out.hidden = out.w_h.shape()[1];
  out.in = out.w_x.shape()[1];
  return out;
}

MlpParams MlpParams::init(int in, std::span<const int> widths, Activation act,
                          Rng& rng) {
  MlpParams p;
  p.act = act;
  int prev = in;
  for (int w : widths) {
    p.layers.push_back(LinearParams::init(prev, w, rng));
    prev = w;
  }
  return p;
}

Tensor MlpParams::forward(const Tensor& x) const {
  return forward_until(x, static_cast<int>(layers.size()) - 1);
}

Tensor MlpParams::forward_until(const Tensor& x, int index) const {
  Tensor h = x;
  for (int i = 0; i <= index; ++i) {
    h = layers[static_cast<size_t>(i)].forward(h);
    h = act == Activation::kTanh ? tanh_op(h) : relu_op(h);
  }
  return h;
}

void MlpParams::collect(ParamMap& into, const std::string& prefix) const {
  for (size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(into, prefix + "." + std::to_string(i));
}

MlpParams MlpParams::from_params(const ParamMap& p, const std::string& prefix,
                                 int n_layers, Activation act) {
  MlpParams out;
  out.act = act;
  for (int i = 0; i < n_layers; ++i)
    out.layers.push_back(LinearParams::from_params(p, prefix + "." + std::to_string(i)));
  return out;
}

}  // namespace mopred
