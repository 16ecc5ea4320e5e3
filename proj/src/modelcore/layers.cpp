#include "amc/modelcore/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "amc/common/error.hpp"

namespace amc::nn {
namespace {

void fill_uniform(MSpan w, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& v : w) v = u(rng);
}

// ---- dense kernels: W is [out x in] row-major ----

void dense_fwd(const double* w, const double* b, CSpan in, MSpan out, bool accumulate) {
  const std::size_t ni = in.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    const double* row = w + o * ni;
    double acc = b ? b[o] : 0.0;
    for (std::size_t i = 0; i < ni; ++i) acc += row[i] * in[i];
    out[o] = accumulate ? out[o] + acc : acc;
  }
}

void dense_bwd_in(const double* w, CSpan dout, MSpan din, bool accumulate) {
  const std::size_t ni = din.size();
  if (!accumulate) std::fill(din.begin(), din.end(), 0.0);
  for (std::size_t o = 0; o < dout.size(); ++o) {
    const double g = dout[o];
    if (g == 0.0) continue;
    const double* row = w + o * ni;
    for (std::size_t i = 0; i < ni; ++i) din[i] += g * row[i];
  }
}

void dense_bwd_w(CSpan dout, CSpan in, double* dw, double* db) {
  const std::size_t ni = in.size();
  for (std::size_t o = 0; o < dout.size(); ++o) {
    const double g = dout[o];
    if (db) db[o] += g;
    if (g == 0.0) continue;
    double* row = dw + o * ni;
    for (std::size_t i = 0; i < ni; ++i) row[i] += g * in[i];
  }
}

class Dense final : public Layer {
 public:
  Dense(Shape in, std::size_t units) : Layer(in, Shape{units, 1}), ni_(in.size()), no_(units) {}
  LayerKind kind() const override { return LayerKind::dense; }
  std::size_t param_count() const override { return no_ * ni_ + no_; }
  void init_params(MSpan p, Rng& rng) const override {
    fill_uniform(p.subspan(0, no_ * ni_), std::sqrt(6.0 / static_cast<double>(ni_)), rng);
    std::fill(p.begin() + static_cast<std::ptrdiff_t>(no_ * ni_), p.end(), 0.0);
  }
  void forward(CSpan p, CSpan in, MSpan out) const override {
    dense_fwd(p.data(), p.data() + no_ * ni_, in, out, false);
  }
  void backward(CSpan p, CSpan in, CSpan, CSpan dout, MSpan din, MSpan dp) const override {
    if (!din.empty()) dense_bwd_in(p.data(), dout, din, false);
    if (!dp.empty()) dense_bwd_w(dout, in, dp.data(), dp.data() + no_ * ni_);
  }
  void forward_tangent(CSpan p, CSpan vp, CSpan in, CSpan, CSpan rin, MSpan rout) const override {
    dense_fwd(vp.data(), vp.data() + no_ * ni_, in, rout, false);
    dense_fwd(p.data(), nullptr, rin, rout, true);
  }
  void backward_tangent(CSpan p, CSpan vp, CSpan in, CSpan, CSpan rin, CSpan dout, CSpan rdout,
                        MSpan rdin, MSpan rdp) const override {
    if (!rdin.empty()) {
      dense_bwd_in(vp.data(), dout, rdin, false);
      dense_bwd_in(p.data(), rdout, rdin, true);
    }
    if (!rdp.empty()) {
      dense_bwd_w(rdout, in, rdp.data(), rdp.data() + no_ * ni_);
      dense_bwd_w(dout, rin, rdp.data(), nullptr);
    }
  }

 private:
  std::size_t ni_, no_;
};

// ---- conv1d kernels: W is [out_ch x in_ch x k], same padding, stride 1 ----

struct ConvDims {
  std::size_t cin, cout, len, k, pad;
};

void conv_fwd(const ConvDims& d, const double* w, const double* b, CSpan in, MSpan out,
              bool accumulate) {
  const std::size_t L = d.len;
  for (std::size_t oc = 0; oc < d.cout; ++oc) {
    double* o = out.data() + oc * L;
    if (!accumulate) std::fill(o, o + L, b ? b[oc] : 0.0);
    else if (b)
      for (std::size_t t = 0; t < L; ++t) o[t] += b[oc];
    for (std::size_t ic = 0; ic < d.cin; ++ic) {
      const double* x = in.data() + ic * L;
      const double* wk = w + (oc * d.cin + ic) * d.k;
      for (std::size_t j = 0; j < d.k; ++j) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(d.pad);
        const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
        const std::size_t t1 = off > 0 ? L - static_cast<std::size_t>(off) : L;
        const double wv = wk[j];
        const double* xs = x + static_cast<std::ptrdiff_t>(t0) + off;
        double* os = o + t0;
        for (std::size_t t = 0; t < t1 - t0; ++t) os[t] += wv * xs[t];
      }
    }
  }
}

void conv_bwd_in(const ConvDims& d, const double* w, CSpan dout, MSpan din, bool accumulate) {
  const std::size_t L = d.len;
  if (!accumulate) std::fill(din.begin(), din.end(), 0.0);
  for (std::size_t oc = 0; oc < d.cout; ++oc) {
    const double* g = dout.data() + oc * L;
    for (std::size_t ic = 0; ic < d.cin; ++ic) {
      double* dx = din.data() + ic * L;
      const double* wk = w + (oc * d.cin + ic) * d.k;
      for (std::size_t j = 0; j < d.k; ++j) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(d.pad);
        const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
        const std::size_t t1 = off > 0 ? L - static_cast<std::size_t>(off) : L;
        const double wv = wk[j];
        double* dxs = dx + static_cast<std::ptrdiff_t>(t0) + off;
        const double* gs = g + t0;
        for (std::size_t t = 0; t < t1 - t0; ++t) dxs[t] += wv * gs[t];
      }
    }
  }
}

void conv_bwd_w(const ConvDims& d, CSpan dout, CSpan in, double* dw, double* db) {
  const std::size_t L = d.len;
  for (std::size_t oc = 0; oc < d.cout; ++oc) {
    const double* g = dout.data() + oc * L;
    if (db) {
      double s = 0.0;
      for (std::size_t t = 0; t < L; ++t) s += g[t];
      db[oc] += s;
    }
    for (std::size_t ic = 0; ic < d.cin; ++ic) {
      const double* x = in.data() + ic * L;
      double* wk = dw + (oc * d.cin + ic) * d.k;
      for (std::size_t j = 0; j < d.k; ++j) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(d.pad);
        const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
        const std::size_t t1 = off > 0 ? L - static_cast<std::size_t>(off) : L;
        const double* xs = x + static_cast<std::ptrdiff_t>(t0) + off;
        const double* gs = g + t0;
        double s = 0.0;
        for (std::size_t t = 0; t < t1 - t0; ++t) s += gs[t] * xs[t];
        wk[j] += s;
      }
    }
  }
}

class Conv1d final : public Layer {
 public:
  Conv1d(Shape in, std::size_t out_ch, std::size_t k)
      : Layer(in, Shape{out_ch, in.length}), d_{in.channels, out_ch, in.length, k, k / 2} {
    if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd");
  }
  LayerKind kind() const override { return LayerKind::conv1d; }
  std::size_t param_count() const override { return wcount() + d_.cout; }
  void init_params(MSpan p, Rng& rng) const override {
    fill_uniform(p.subspan(0, wcount()), std::sqrt(6.0 / static_cast<double>(d_.cin * d_.k)), rng);
    std::fill(p.begin() + static_cast<std::ptrdiff_t>(wcount()), p.end(), 0.0);
  }
  void forward(CSpan p, CSpan in, MSpan out) const override {
    conv_fwd(d_, p.data(), p.data() + wcount(), in, out, false);
  }
  void backward(CSpan p, CSpan in, CSpan, CSpan dout, MSpan din, MSpan dp) const override {
    if (!din.empty()) conv_bwd_in(d_, p.data(), dout, din, false);
    if (!dp.empty()) conv_bwd_w(d_, dout, in, dp.data(), dp.data() + wcount());
  }
  void forward_tangent(CSpan p, CSpan vp, CSpan in, CSpan, CSpan rin, MSpan rout) const override {
    conv_fwd(d_, vp.data(), vp.data() + wcount(), in, rout, false);
    conv_fwd(d_, p.data(), nullptr, rin, rout, true);
  }
  void backward_tangent(CSpan p, CSpan vp, CSpan in, CSpan, CSpan rin, CSpan dout, CSpan rdout,
                        MSpan rdin, MSpan rdp) const override {
    if (!rdin.empty()) {
      conv_bwd_in(d_, vp.data(), dout, rdin, false);
      conv_bwd_in(d_, p.data(), rdout, rdin, true);
    }
    if (!rdp.empty()) {
      conv_bwd_w(d_, rdout, in, rdp.data(), rdp.data() + wcount());
      conv_bwd_w(d_, dout, rin, rdp.data(), nullptr);
    }
  }

 private:
  std::size_t wcount() const { return d_.cout * d_.cin * d_.k; }
  ConvDims d_;
};

class AvgPool final : public Layer {
 public:
  AvgPool(Shape in, std::size_t w) : Layer(in, Shape{in.channels, in.length / w}), w_(w) {
    if (w == 0 || in.length % w != 0)
      throw ConfigError("avgpool: window " + std::to_string(w) + " must divide length " +
                        std::to_string(in.length));
  }
  LayerKind kind() const override { return LayerKind::avgpool; }
  void forward(CSpan, CSpan in, MSpan out) const override { pool(in, out); }
  void backward(CSpan, CSpan, CSpan, CSpan dout, MSpan din, MSpan) const override {
    if (!din.empty()) unpool(dout, din);
  }
  void forward_tangent(CSpan, CSpan, CSpan, CSpan, CSpan rin, MSpan rout) const override {
    pool(rin, rout);
  }
  void backward_tangent(CSpan, CSpan, CSpan, CSpan, CSpan, CSpan, CSpan rdout, MSpan rdin,
                        MSpan) const override {
    if (!rdin.empty()) unpool(rdout, rdin);
  }

 private:
  void pool(CSpan in, MSpan out) const {
    const double scale = 1.0 / static_cast<double>(w_);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < w_; ++j) s += in[i * w_ + j];
      out[i] = s * scale;
    }
  }
  void unpool(CSpan dout, MSpan din) const {
    const double scale = 1.0 / static_cast<double>(w_);
    for (std::size_t i = 0; i < dout.size(); ++i)
      for (std::size_t j = 0; j < w_; ++j) din[i * w_ + j] = dout[i] * scale;
  }
  std::size_t w_;
};

class Relu final : public Layer {
 public:
  explicit Relu(Shape in) : Layer(in, in) {}
  LayerKind kind() const override { return LayerKind::relu; }
  void forward(CSpan, CSpan in, MSpan out) const override {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  }
  void backward(CSpan, CSpan in, CSpan, CSpan dout, MSpan din, MSpan) const override {
    if (din.empty()) return;
    for (std::size_t i = 0; i < in.size(); ++i) din[i] = in[i] > 0.0 ? dout[i] : 0.0;
  }
  void forward_tangent(CSpan, CSpan, CSpan in, CSpan, CSpan rin, MSpan rout) const override {
    for (std::size_t i = 0; i < in.size(); ++i) rout[i] = in[i] > 0.0 ? rin[i] : 0.0;
  }
  void backward_tangent(CSpan, CSpan, CSpan in, CSpan, CSpan, CSpan, CSpan rdout, MSpan rdin,
                        MSpan) const override {
    if (rdin.empty()) return;
    for (std::size_t i = 0; i < in.size(); ++i) rdin[i] = in[i] > 0.0 ? rdout[i] : 0.0;
  }
};

class Tanh final : public Layer {
 public:
  explicit Tanh(Shape in) : Layer(in, in) {}
  LayerKind kind() const override { return LayerKind::tanh; }
  void forward(CSpan, CSpan in, MSpan out) const override {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  }
  void backward(CSpan, CSpan, CSpan out, CSpan dout, MSpan din, MSpan) const override {
    if (din.empty()) return;
    for (std::size_t i = 0; i < out.size(); ++i) din[i] = (1.0 - out[i] * out[i]) * dout[i];
  }
  void forward_tangent(CSpan, CSpan, CSpan, CSpan out, CSpan rin, MSpan rout) const override {
    for (std::size_t i = 0; i < out.size(); ++i) rout[i] = (1.0 - out[i] * out[i]) * rin[i];
  }
  void backward_tangent(CSpan, CSpan, CSpan, CSpan out, CSpan rin, CSpan dout, CSpan rdout,
                        MSpan rdin, MSpan) const override {
    if (rdin.empty()) return;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d1 = 1.0 - out[i] * out[i];
      const double d2 = -2.0 * out[i] * d1;
      rdin[i] = d2 * rin[i] * dout[i] + d1 * rdout[i];
    }
  }
};

}  // namespace

std::unique_ptr<Layer> make_dense(Shape in, std::size_t units) {
  return std::make_unique<Dense>(in, units);
}
std::unique_ptr<Layer> make_conv1d(Shape in, std::size_t out_channels, std::size_t kernel) {
  return std::make_unique<Conv1d>(in, out_channels, kernel);
}
std::unique_ptr<Layer> make_avgpool(Shape in, std::size_t window) {
  return std::make_unique<AvgPool>(in, window);
}
std::unique_ptr<Layer> make_relu(Shape in) { return std::make_unique<Relu>(in); }
std::unique_ptr<Layer> make_tanh(Shape in) { return std::make_unique<Tanh>(in); }

}  // namespace amc::nn
