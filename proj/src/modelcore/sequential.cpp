#include "amc/modelcore/sequential.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "amc/common/error.hpp"

namespace amc::nn {

double loss_head(Loss loss, CSpan z, int target, MSpan dz) {
  if (loss == Loss::logistic) {
    if (target != 0 && target != 1) throw InputError("logistic loss: target must be 0 or 1");
    const double v = z[0];
    const double softplus = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    const double p = 1.0 / (1.0 + std::exp(-v));
    dz[0] = p - target;
    return softplus - target * v;
  }
  const auto c = static_cast<std::ptrdiff_t>(z.size());
  if (target < 0 || target >= c)
    throw InputError("cross-entropy: label " + std::to_string(target) + " out of range [0, " +
                     std::to_string(c) + ")");
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += dz[k] = std::exp(z[k] - m);
  for (auto& v : dz) v /= sum;
  const double lse = m + std::log(sum);
  dz[static_cast<std::size_t>(target)] -= 1.0;
  return lse - z[static_cast<std::size_t>(target)];
}

void loss_head_tangent(Loss loss, CSpan z, CSpan rz, MSpan rdz) {
  if (loss == Loss::logistic) {
    const double p = 1.0 / (1.0 + std::exp(-z[0]));
    rdz[0] = p * (1.0 - p) * rz[0];
    return;
  }
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += rdz[k] = std::exp(z[k] - m);
  double dot = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    rdz[k] /= sum;
    dot += rdz[k] * rz[k];
  }
  for (std::size_t k = 0; k < z.size(); ++k) rdz[k] *= rz[k] - dot;
}

struct Sequential::Workspace {
  std::vector<std::vector<double>> act;   // act[l] = input of layer l
  std::vector<std::vector<double>> ract;  // tangents of act
  std::vector<double> d0, d1, rd0, rd1, dz, rdz;
};

Sequential::Sequential(Shape input) : input_(input) {}

Sequential& Sequential::push(std::unique_ptr<Layer> layer) {
  offsets_.push_back(params_.size());
  params_.resize(params_.size() + layer->param_count(), 0.0);
  layers_.push_back(std::move(layer));
  return *this;
}

Sequential& Sequential::dense(std::size_t units) { return push(make_dense(output_shape(), units)); }
Sequential& Sequential::conv1d(std::size_t out_channels, std::size_t kernel) {
  return push(make_conv1d(output_shape(), out_channels, kernel));
}
Sequential& Sequential::avgpool(std::size_t window) { return push(make_avgpool(output_shape(), window)); }
Sequential& Sequential::relu() { return push(make_relu(output_shape())); }
Sequential& Sequential::tanh() { return push(make_tanh(output_shape())); }

void Sequential::init(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t n = layers_[l]->param_count();
    layers_[l]->init_params(std::span(params_).subspan(offsets_[l], n), rng);
  }
}

Shape Sequential::output_shape() const { return layers_.empty() ? input_ : layers_.back()->out_shape(); }

Shape Sequential::shape_after(std::size_t layer_count) const {
  if (layer_count > layers_.size()) throw InputShapeError("shape_after: layer index out of range");
  return layer_count == 0 ? input_ : layers_[layer_count - 1]->out_shape();
}

void Sequential::set_params(std::span<const double> p) {
  if (p.size() != params_.size()) throw InputShapeError("set_params: parameter count mismatch");
  std::copy(p.begin(), p.end(), params_.begin());
}

void Sequential::check_frame(std::size_t dim) const {
  if (dim != input_.size())
    throw InputShapeError("frame has " + std::to_string(dim) + " values, network expects " +
                          std::to_string(input_.size()));
}

Sequential::Workspace Sequential::make_workspace() const {
  Workspace ws;
  ws.act.resize(layers_.size() + 1);
  ws.ract.resize(layers_.size() + 1);
  std::size_t widest = input_.size();
  ws.act[0].resize(input_.size());
  ws.ract[0].assign(input_.size(), 0.0);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t n = layers_[l]->out_shape().size();
    ws.act[l + 1].resize(n);
    ws.ract[l + 1].resize(n);
    widest = std::max(widest, n);
  }
  ws.d0.resize(widest);
  ws.d1.resize(widest);
  ws.rd0.resize(widest);
  ws.rd1.resize(widest);
  ws.dz.resize(output_shape().size());
  ws.rdz.resize(output_shape().size());
  return ws;
}

void Sequential::forward_tape(CSpan theta, CSpan x, std::size_t end, Workspace& ws) const {
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  for (std::size_t l = 0; l < end; ++l) {
    const auto& layer = *layers_[l];
    layer.forward(theta.subspan(offsets_[l], layer.param_count()), ws.act[l], ws.act[l + 1]);
  }
}

void Sequential::forward(CSpan theta, CSpan x, MSpan out) const {
  forward_prefix(theta, layers_.size(), x, out);
}

void Sequential::forward_prefix(CSpan theta, std::size_t end, CSpan x, MSpan out) const {
  check_frame(x.size());
  auto ws = make_workspace();
  forward_tape(theta, x, end, ws);
  std::copy(ws.act[end].begin(), ws.act[end].end(), out.begin());
}

void Sequential::vjp_input(CSpan theta, CSpan x, CSpan dout, MSpan dx) const {
  check_frame(x.size());
  auto ws = make_workspace();
  const std::size_t L = layers_.size();
  forward_tape(theta, x, L, ws);
  std::vector<double> cur(dout.begin(), dout.end()), next;
  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = *layers_[l];
    next.assign(layer.in_shape().size(), 0.0);
    layer.backward(theta.subspan(offsets_[l], layer.param_count()), ws.act[l], ws.act[l + 1], cur,
                   next, {});
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), dx.begin());
}

std::vector<double> Sequential::outputs(CSpan theta, const Batch& b, Exec exec) const {
  return outputs_prefix(theta, layers_.size(), b, exec);
}

std::vector<double> Sequential::outputs_prefix(CSpan theta, std::size_t end, const Batch& b,
                                               Exec exec) const {
  if (!b.empty()) check_frame(b.dim);
  const std::size_t width = shape_after(end).size();
  std::vector<double> out(b.size() * width);
  auto run = [&](std::size_t i, Workspace& ws) {
    forward_tape(theta, b.frame(i), end, ws);
    std::copy(ws.act[end].begin(), ws.act[end].end(), out.begin() + static_cast<std::ptrdiff_t>(i * width));
  };
  if (exec == Exec::serial) {
    auto ws = make_workspace();
    for (std::size_t i = 0; i < b.size(); ++i) run(i, ws);
  } else {
    const auto n = static_cast<std::ptrdiff_t>(b.size());
#pragma omp parallel
    {
      auto ws = make_workspace();
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i), ws);
    }
  }
  return out;
}

double Sequential::loss(CSpan theta, const Batch& b, Loss l, Exec exec) const {
  if (b.empty()) return 0.0;
  check_frame(b.dim);
  const std::size_t L = layers_.size();
  std::vector<double> total(1);
  reduce_sum(
      exec, b.size(), total, [&] { return make_workspace(); },
      [&](std::size_t i, MSpan acc, Workspace& ws) {
        forward_tape(theta, b.frame(i), L, ws);
        acc[0] += loss_head(l, ws.act[L], b.y[i], ws.dz);
      });
  return total[0] / static_cast<double>(b.size());
}

double Sequential::loss_grad(CSpan theta, const Batch& b, Loss l, MSpan grad, Exec exec) const {
  if (grad.size() != params_.size()) throw InputShapeError("loss_grad: gradient size mismatch");
  if (b.empty()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return 0.0;
  }
  check_frame(b.dim);
  const std::size_t L = layers_.size();
  const std::size_t P = params_.size();
  std::vector<double> acc(P + 1);
  reduce_sum(
      exec, b.size(), acc, [&] { return make_workspace(); },
      [&](std::size_t i, MSpan a, Workspace& ws) {
        forward_tape(theta, b.frame(i), L, ws);
        a[P] += loss_head(l, ws.act[L], b.y[i], ws.dz);
        std::vector<double>* cur = &ws.d0;
        std::vector<double>* nxt = &ws.d1;
        std::copy(ws.dz.begin(), ws.dz.end(), cur->begin());
        for (std::size_t k = L; k-- > 0;) {
          const auto& layer = *layers_[k];
          const std::size_t np = layer.param_count();
          const std::size_t nin = layer.in_shape().size();
          const std::size_t nout = layer.out_shape().size();
          layer.backward(theta.subspan(offsets_[k], np), ws.act[k], ws.act[k + 1],
                         CSpan(cur->data(), nout), k > 0 ? MSpan(nxt->data(), nin) : MSpan{},
                         a.subspan(offsets_[k], np));
          std::swap(cur, nxt);
        }
      });
  const double inv = 1.0 / static_cast<double>(b.size());
  for (std::size_t k = 0; k < P; ++k) grad[k] = acc[k] * inv;
  return acc[P] * inv;
}

std::vector<double> Sequential::input_grads(CSpan theta, const Batch& b, Loss l, MSpan gx,
                                            Exec exec) const {
  if (!b.empty()) check_frame(b.dim);
  if (gx.size() != b.x.size()) throw InputShapeError("input_grads: output size mismatch");
  const std::size_t L = layers_.size();
  std::vector<double> losses(b.size());
  auto run = [&](std::size_t i, Workspace& ws) {
    forward_tape(theta, b.frame(i), L, ws);
    losses[i] = loss_head(l, ws.act[L], b.y[i], ws.dz);
    std::vector<double>* cur = &ws.d0;
    std::vector<double>* nxt = &ws.d1;
    std::copy(ws.dz.begin(), ws.dz.end(), cur->begin());
    for (std::size_t k = L; k-- > 0;) {
      const auto& layer = *layers_[k];
      layer.backward(theta.subspan(offsets_[k], layer.param_count()), ws.act[k], ws.act[k + 1],
                     CSpan(cur->data(), layer.out_shape().size()),
                     MSpan(nxt->data(), layer.in_shape().size()), {});
      std::swap(cur, nxt);
    }
    std::copy(cur->begin(), cur->begin() + static_cast<std::ptrdiff_t>(b.dim),
              gx.begin() + static_cast<std::ptrdiff_t>(i * b.dim));
  };
  if (exec == Exec::serial) {
    auto ws = make_workspace();
    for (std::size_t i = 0; i < b.size(); ++i) run(i, ws);
  } else {
    const auto n = static_cast<std::ptrdiff_t>(b.size());
#pragma omp parallel
    {
      auto ws = make_workspace();
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i), ws);
    }
  }
  return losses;
}

void Sequential::hvp(CSpan theta, const Batch& b, Loss l, CSpan v, MSpan out, Exec exec) const {
  const std::size_t P = params_.size();
  if (v.size() != P || out.size() != P) throw InputShapeError("hvp: vector size mismatch");
  if (b.empty()) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  check_frame(b.dim);
  const std::size_t L = layers_.size();
  reduce_sum(
      exec, b.size(), out, [&] { return make_workspace(); },
      [&](std::size_t i, MSpan acc, Workspace& ws) {
        forward_tape(theta, b.frame(i), L, ws);
        // Forward tangent; the input is held fixed.
        std::fill(ws.ract[0].begin(), ws.ract[0].end(), 0.0);
        for (std::size_t k = 0; k < L; ++k) {
          const auto& layer = *layers_[k];
          const std::size_t np = layer.param_count();
          layer.forward_tangent(theta.subspan(offsets_[k], np), v.subspan(offsets_[k], np),
                                ws.act[k], ws.act[k + 1], ws.ract[k], ws.ract[k + 1]);
        }
        loss_head(l, ws.act[L], b.y[i], ws.dz);
        loss_head_tangent(l, ws.act[L], ws.ract[L], ws.rdz);
        std::vector<double>* cur = &ws.d0;
        std::vector<double>* nxt = &ws.d1;
        std::vector<double>* rcur = &ws.rd0;
        std::vector<double>* rnxt = &ws.rd1;
        std::copy(ws.dz.begin(), ws.dz.end(), cur->begin());
        std::copy(ws.rdz.begin(), ws.rdz.end(), rcur->begin());
        for (std::size_t k = L; k-- > 0;) {
          const auto& layer = *layers_[k];
          const std::size_t np = layer.param_count();
          const std::size_t nin = layer.in_shape().size();
          const std::size_t nout = layer.out_shape().size();
          const auto p = theta.subspan(offsets_[k], np);
          const auto vp = v.subspan(offsets_[k], np);
          const bool need_in = k > 0;
          layer.backward_tangent(p, vp, ws.act[k], ws.act[k + 1], ws.ract[k], CSpan(cur->data(), nout),
                                 CSpan(rcur->data(), nout), need_in ? MSpan(rnxt->data(), nin) : MSpan{},
                                 acc.subspan(offsets_[k], np));
          if (need_in)
            layer.backward(p, ws.act[k], ws.act[k + 1], CSpan(cur->data(), nout), MSpan(nxt->data(), nin), {});
          std::swap(cur, nxt);
          std::swap(rcur, rnxt);
        }
      });
  const double inv = 1.0 / static_cast<double>(b.size());
  for (auto& o : out) o *= inv;
}

void Sequential::backward_prefix(CSpan theta, std::size_t end, const Batch& b, CSpan d_end,
                                 MSpan grad, Exec exec) const {
  if (b.empty()) return;
  check_frame(b.dim);
  const std::size_t width = shape_after(end).size();
  if (d_end.size() != b.size() * width) throw InputShapeError("backward_prefix: d_end size mismatch");
  std::vector<double> acc(params_.size());
  reduce_sum(
      exec, b.size(), acc, [&] { return make_workspace(); },
      [&](std::size_t i, MSpan a, Workspace& ws) {
        forward_tape(theta, b.frame(i), end, ws);
        std::vector<double>* cur = &ws.d0;
        std::vector<double>* nxt = &ws.d1;
        std::copy(d_end.begin() + static_cast<std::ptrdiff_t>(i * width),
                  d_end.begin() + static_cast<std::ptrdiff_t>((i + 1) * width), cur->begin());
        for (std::size_t k = end; k-- > 0;) {
          const auto& layer = *layers_[k];
          const std::size_t np = layer.param_count();
          layer.backward(theta.subspan(offsets_[k], np), ws.act[k], ws.act[k + 1],
                         CSpan(cur->data(), layer.out_shape().size()),
                         k > 0 ? MSpan(nxt->data(), layer.in_shape().size()) : MSpan{},
                         a.subspan(offsets_[k], np));
          std::swap(cur, nxt);
        }
      });
  for (std::size_t k = 0; k < acc.size(); ++k) grad[k] += acc[k];
}

}  // namespace amc::nn
