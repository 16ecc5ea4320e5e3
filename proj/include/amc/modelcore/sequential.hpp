#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "amc/common/parallel.hpp"
#include "amc/modelcore/batch.hpp"
#include "amc/modelcore/layers.hpp"

namespace amc::nn {

enum class Loss : std::uint8_t {
  cross_entropy,  // multi-class softmax cross-entropy on the logits
  logistic        // binary cross-entropy on a single logit, target in {0, 1}
};

// Per-frame loss value and its gradient w.r.t. the output (logits).
double loss_head(Loss loss, CSpan z, int target, MSpan dz);
// Tangent of the output gradient given the output tangent rz.
void loss_head_tangent(Loss loss, CSpan z, CSpan rz, MSpan rdz);

// A feed-forward stack of layers over a flat parameter vector. Layer
// descriptors are immutable and shared between copies; copying a Sequential
// copies only the parameters.
//
// Batch operations return means over the batch unless stated otherwise and
// use the deterministic chunked reduction from amc/common/parallel.hpp, so a
// given Exec yields the same bits regardless of thread count.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(Shape input);

  Sequential& dense(std::size_t units);
  Sequential& conv1d(std::size_t out_channels, std::size_t kernel);
  Sequential& avgpool(std::size_t window);
  Sequential& relu();
  Sequential& tanh();

  // Fan-in scaled uniform weights, zero biases.
  void init(std::uint64_t seed);

  Shape input_shape() const { return input_; }
  Shape output_shape() const;
  Shape shape_after(std::size_t layer_count) const;  // shape_after(0) == input
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  std::size_t param_count() const { return params_.size(); }
  std::size_t param_offset(std::size_t layer) const { return offsets_.at(layer); }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  void set_params(std::span<const double> p);

  // ---- single frame, explicit parameters ----
  void forward(CSpan theta, CSpan x, MSpan out) const;
  // Output of the first `end` layers.
  void forward_prefix(CSpan theta, std::size_t end, CSpan x, MSpan out) const;
  // dx = J_x(output)^T dout for one frame.
  void vjp_input(CSpan theta, CSpan x, CSpan dout, MSpan dx) const;

  // ---- batches, explicit parameters ----
  std::vector<double> outputs(CSpan theta, const Batch& b, Exec exec = Exec::parallel) const;
  std::vector<double> outputs_prefix(CSpan theta, std::size_t end, const Batch& b,
                                     Exec exec = Exec::parallel) const;
  double loss(CSpan theta, const Batch& b, Loss loss, Exec exec = Exec::parallel) const;
  // Mean loss; `grad` receives the mean parameter gradient.
  double loss_grad(CSpan theta, const Batch& b, Loss loss, MSpan grad,
                   Exec exec = Exec::parallel) const;
  // Per-frame input gradients of each frame's own loss (not divided by the
  // batch size); gx is N x dim. Returns the per-frame losses.
  std::vector<double> input_grads(CSpan theta, const Batch& b, Loss loss, MSpan gx,
                                  Exec exec = Exec::parallel) const;
  // Exact Hessian-vector product of the mean loss, by forward-over-reverse
  // differentiation.
  void hvp(CSpan theta, const Batch& b, Loss loss, CSpan v, MSpan out,
           Exec exec = Exec::parallel) const;
  // Accumulates into `grad` the parameter gradient of sum_i <d_end_i, h_i>
  // where h_i is the output of the first `end` layers for frame i; d_end is
  // N x shape_after(end).size().
  void backward_prefix(CSpan theta, std::size_t end, const Batch& b, CSpan d_end, MSpan grad,
                       Exec exec = Exec::parallel) const;

  // ---- conveniences using the owned parameters ----
  std::vector<double> outputs(const Batch& b, Exec exec = Exec::parallel) const {
    return outputs(params_, b, exec);
  }
  double loss(const Batch& b, Loss l, Exec exec = Exec::parallel) const {
    return loss(params_, b, l, exec);
  }
  double loss_grad(const Batch& b, Loss l, MSpan grad, Exec exec = Exec::parallel) const {
    return loss_grad(params_, b, l, grad, exec);
  }

 private:
  struct Workspace;
  Sequential& push(std::unique_ptr<Layer> layer);
  Workspace make_workspace() const;
  void forward_tape(CSpan theta, CSpan x, std::size_t end, Workspace& ws) const;
  void check_frame(std::size_t dim) const;

  Shape input_;
  std::vector<std::shared_ptr<const Layer>> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace amc::nn
