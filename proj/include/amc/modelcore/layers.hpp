#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include "amc/common/rng.hpp"

namespace amc::nn {

using CSpan = std::span<const double>;
using MSpan = std::span<double>;

// Channels x length, stored channel-major.
struct Shape {
  std::size_t channels = 1;
  std::size_t length = 1;
  std::size_t size() const { return channels * length; }
  bool operator==(const Shape&) const = default;
};

enum class LayerKind : std::uint8_t { dense, conv1d, avgpool, relu, tanh };

// A stateless layer descriptor. Parameters live in the owning network's flat
// vector and are passed in as `p`.
//
// backward() overwrites `din` and accumulates into `dp`; either may be an
// empty span to skip that product.
//
// The *_tangent() pair is the forward-mode (R-operator) pass used for exact
// Hessian-vector products: `vp` is the parameter direction, `rin`/`rout`
// the tangents of the activations, `rdout`/`rdin` the tangents of the
// back-propagated gradients, and `rdp` accumulates the tangent of the
// parameter gradient.
class Layer {
 public:
  Layer(Shape in, Shape out) : in_(in), out_(out) {}
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  Shape in_shape() const { return in_; }
  Shape out_shape() const { return out_; }
  virtual std::size_t param_count() const { return 0; }
  virtual void init_params(MSpan /*p*/, Rng& /*rng*/) const {}

  virtual void forward(CSpan p, CSpan in, MSpan out) const = 0;
  virtual void backward(CSpan p, CSpan in, CSpan out, CSpan dout, MSpan din, MSpan dp) const = 0;
  virtual void forward_tangent(CSpan p, CSpan vp, CSpan in, CSpan out, CSpan rin,
                               MSpan rout) const = 0;
  virtual void backward_tangent(CSpan p, CSpan vp, CSpan in, CSpan out, CSpan rin, CSpan dout,
                                CSpan rdout, MSpan rdin, MSpan rdp) const = 0;

 private:
  Shape in_;
  Shape out_;
};

std::unique_ptr<Layer> make_dense(Shape in, std::size_t units);
std::unique_ptr<Layer> make_conv1d(Shape in, std::size_t out_channels, std::size_t kernel);
std::unique_ptr<Layer> make_avgpool(Shape in, std::size_t window);
std::unique_ptr<Layer> make_relu(Shape in);
std::unique_ptr<Layer> make_tanh(Shape in);

}  // namespace amc::nn
