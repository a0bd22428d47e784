#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvsgait/nn.hpp"
#include "dvsgait/tensor.hpp"

namespace dvsgait {

// Discretized leaky integrate-and-fire constants. One step per dynamic
// slice: explicit Euler u <- u + (dt/tau)(-u + R I). tau > dt/2 keeps the
// zero-input decay monotone.
struct LifParams {
  double tau = 8.0;
  double r = 1.0;
  double u_th = 1.0;
  double u_reset = 0.0;
  double dt = 1.0;

  void validate() const {
    if (!(tau > dt / 2.0))
      throw Error(ErrorKind::invalid_argument, "lif: need tau > dt/2 for stable decay");
    if (!(u_th > u_reset))
      throw Error(ErrorKind::invalid_argument, "lif: need u_th > u_reset");
  }

  double decay() const { return 1.0 - dt / tau; }
  double drive() const { return (dt / tau) * r; }
};

struct LifState {
  Tensor u;  // membrane potentials
};

// Fast-sigmoid surrogate for the spike nonlinearity.
struct SurrogateConfig {
  double beta = 4.0;

  // d spike / d membrane at x = u - u_th
  double grad(double x) const {
    const double d = 1.0 + beta * std::abs(x);
    return beta / (2.0 * d * d);
  }

  // integral of grad: smooth stand-in for the Heaviside step, used by the
  // smoothed forward that gradient checks run against
  double smooth_step(double x) const { return 0.5 * (1.0 + beta * x / (1.0 + beta * std::abs(x))); }
};

// Hard: production forward, binary spikes, reset path detached in backward.
// Smoothed: spikes are the surrogate-integrated sigmoid and backward is the
// exact adjoint, so finite differences of the forward match the analytic
// gradients.
enum class SpikeMode { hard, smoothed };

// One Euler step. Spiking entries hard-reset to u_reset; returned spikes are
// binary.
inline Tensor lif_step(LifState& state, const Tensor& current, const LifParams& p) {
  p.validate();
  if (!state.u.same_shape(current))
    throw Error(ErrorKind::invalid_argument, "lif_step: shape mismatch");
  if (!current.all_finite())
    throw Error(ErrorKind::numeric_error, "lif_step: non-finite input current");
  const double a = p.decay(), b = p.drive();
  Tensor spikes = current;
  for (std::size_t i = 0; i < state.u.size(); ++i) {
    const double h = a * state.u[i] + b * current[i];
    const bool fired = h >= p.u_th;
    spikes[i] = fired ? 1.0 : 0.0;
    state.u[i] = fired ? p.u_reset : h;
  }
  return spikes;
}

// Dense spiking layer applied pointwise over the spatial extent: every pixel
// shares the (out x in) synaptic matrix, each (channel, pixel) pair owns one
// LIF unit. The synaptic kernel is an instantaneous impulse I = W S by
// default; the exponential mode keeps a decaying current I_t = lam I_{t-1} + W S_t.
class SpikingLayer {
 public:
  struct Record {
    std::vector<Tensor> inputs;   // per-step layer input
    std::vector<Tensor> currents; // per-step post-synaptic current
    std::vector<Tensor> h;        // per-step pre-reset membrane
    std::vector<Tensor> spikes;   // per-step output
    SpikeMode mode = SpikeMode::hard;
  };

  SpikingLayer() = default;
  SpikingLayer(std::size_t out_ch, std::size_t in_ch, LifParams lif, SurrogateConfig sg)
      : params(lif), surrogate(sg) {
    w.reshape({out_ch, in_ch});
    gw.reshape({out_ch, in_ch});
  }

  void init_weights(Rng& rng, double gain = 1.0) {
    const double s = gain * std::sqrt(6.0 / static_cast<double>(w.dim(0) + w.dim(1)));
    w.fill_uniform(rng, -s, s);
  }

  std::size_t out_channels() const { return w.dim(0); }
  std::size_t in_channels() const { return w.dim(1); }

  // I[co, pix] = sum_ci W[co, ci] X[ci, pix]
  Tensor synaptic_matmul(const Tensor& x) const {
    const std::size_t p = x.dim(1) * x.dim(2);
    Tensor cur({out_channels(), x.dim(1), x.dim(2)});
    for (std::size_t co = 0; co < out_channels(); ++co) {
      double* dst = &cur[co * p];
      for (std::size_t ci = 0; ci < in_channels(); ++ci) {
        const double wv = w.at(co, ci);
        const double* src = &x[ci * p];
        for (std::size_t i = 0; i < p; ++i) dst[i] += wv * src[i];
      }
    }
    return cur;
  }

  // Runs the full time recursion; the membrane starts at u_reset.
  std::vector<Tensor> forward(const std::vector<Tensor>& seq, Record& rec,
                              SpikeMode mode = SpikeMode::hard) const {
    params.validate();
    if (seq.empty()) throw Error(ErrorKind::invalid_argument, "spiking layer: empty sequence");
    const double a = params.decay(), b = params.drive();
    const std::size_t hdim = seq[0].dim(1), wdim = seq[0].dim(2);
    const std::size_t n = out_channels() * hdim * wdim;

    rec.inputs = seq;
    rec.currents.clear();
    rec.h.clear();
    rec.spikes.clear();
    rec.mode = mode;

    Tensor u({out_channels(), hdim, wdim});
    u.fill(params.u_reset);
    std::vector<Tensor> out;
    out.reserve(seq.size());
    for (const Tensor& x : seq) {
      if (x.dim(0) != in_channels())
        throw Error(ErrorKind::invalid_argument, "spiking layer: channel mismatch");
      Tensor cur = exp_kernel_lambda > 0.0 && !rec.currents.empty()
                       ? decayed_current(rec.currents.back(), x)
                       : synaptic_matmul(x);
      Tensor h({out_channels(), hdim, wdim});
      Tensor s({out_channels(), hdim, wdim});
      for (std::size_t i = 0; i < n; ++i) {
        const double hv = a * u[i] + b * cur[i];
        h[i] = hv;
        if (mode == SpikeMode::hard) {
          const bool fired = hv >= params.u_th;
          s[i] = fired ? 1.0 : 0.0;
          u[i] = fired ? params.u_reset : hv;
        } else {
          const double sv = surrogate.smooth_step(hv - params.u_th);
          s[i] = sv;
          u[i] = sv * params.u_reset + (1.0 - sv) * hv;
        }
      }
      rec.currents.push_back(cur);
      rec.h.push_back(h);
      rec.spikes.push_back(s);
      out.push_back(s);
    }
    return out;
  }

  // BPTT. grad_out holds dL/dS_t per step; returns dL/dX_t per step and
  // accumulates dL/dW. The hard mode detaches the reset path and routes the
  // spike gradient through the fast-sigmoid surrogate; the smoothed mode is
  // the exact adjoint of the smoothed forward.
  std::vector<Tensor> backward(const std::vector<Tensor>& grad_out, const Record& rec) {
    if (rec.h.empty()) throw Error(ErrorKind::state_error, "spiking layer: backward before forward");
    if (grad_out.size() != rec.h.size())
      throw Error(ErrorKind::invalid_argument, "spiking layer: gradient sequence length mismatch");
    const double a = params.decay(), b = params.drive();
    const std::size_t hdim = rec.h[0].dim(1), wdim = rec.h[0].dim(2);
    const std::size_t n = out_channels() * hdim * wdim;
    const std::size_t p = hdim * wdim;
    const std::size_t steps = rec.h.size();

    std::vector<Tensor> grad_in(steps);
    Tensor gu({out_channels(), hdim, wdim});  // dL/du_t^post flowing backwards
    Tensor gcur_next;                          // dL/dI_{t+1} for the exponential kernel
    for (std::size_t ti = steps; ti-- > 0;) {
      const Tensor& h = rec.h[ti];
      const Tensor& s = rec.spikes[ti];
      Tensor gh({out_channels(), hdim, wdim});
      for (std::size_t i = 0; i < n; ++i) {
        const double x = h[i] - params.u_th;
        const double sg = surrogate.grad(x);
        double g = grad_out[ti][i] * sg;
        if (rec.mode == SpikeMode::hard) {
          g += gu[i] * (1.0 - s[i]);
        } else {
          g += gu[i] * ((1.0 - s[i]) + (params.u_reset - h[i]) * sg);
        }
        gh[i] = g;
      }
      // u_{t-1} path and current path
      Tensor gcur = gh;
      for (std::size_t i = 0; i < n; ++i) {
        gcur[i] = b * gh[i];
        gu[i] = a * gh[i];
      }
      if (exp_kernel_lambda > 0.0 && ti + 1 < steps) gcur.axpy(exp_kernel_lambda, gcur_next);

      // through I = W X
      const Tensor& x = rec.inputs[ti];
      Tensor gx({in_channels(), hdim, wdim});
      for (std::size_t co = 0; co < out_channels(); ++co) {
        const double* g = &gcur[co * p];
        for (std::size_t ci = 0; ci < in_channels(); ++ci) {
          const double* src = &x[ci * p];
          double* gsrc = &gx[ci * p];
          const double wv = w.at(co, ci);
          double wg = 0.0;
          for (std::size_t i = 0; i < p; ++i) {
            wg += g[i] * src[i];
            gsrc[i] += wv * g[i];
          }
          gw.at(co, ci) += wg;
        }
      }
      grad_in[ti] = std::move(gx);
      if (exp_kernel_lambda > 0.0) gcur_next = std::move(gcur);
    }
    return grad_in;
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + "/w", &w, &gw});
  }

  Tensor w, gw;
  LifParams params;
  SurrogateConfig surrogate;
  double exp_kernel_lambda = 0.0;  // 0 = instantaneous impulse kernel

 private:
  Tensor decayed_current(const Tensor& prev, const Tensor& x) const {
    Tensor cur = synaptic_matmul(x);
    cur.axpy(exp_kernel_lambda, prev);
    return cur;
  }
};

// Spec-facing wrapper: post-synaptic current for one spike vector.
inline Tensor synaptic_current(const Tensor& spikes_in, const SpikingLayer& layer) {
  return layer.synaptic_matmul(spikes_in);
}

}  // namespace dvsgait
