#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvsgait/nn.hpp"
#include "dvsgait/snn.hpp"

namespace dvsgait {

inline Tensor time_average(const std::vector<Tensor>& seq) {
  Tensor avg = seq.at(0);
  for (std::size_t t = 1; t < seq.size(); ++t) avg.axpy(1.0, seq[t]);
  avg.scale(1.0 / static_cast<double>(seq.size()));
  return avg;
}

// Mixture of spiking experts. N parallel spiking layers with distinct
// membrane constants process the same slice sequence; a small spiking gate
// (spatial mean -> one spiking layer -> temporal rate average -> affine ->
// softmax) produces convex coefficients alpha, and the layer emits the
// per-step mixture sum_i alpha_i S_i,t. Time-averaging that sequence gives
// the mixture of expert rate features.
class MoseLayer {
 public:
  struct Record {
    std::vector<SpikingLayer::Record> experts;
    SpikingLayer::Record gate;
    std::vector<std::vector<Tensor>> expert_out;  // spikes per expert per step
    AffineRecord head;
    Tensor rates;  // gate spike rates
    Tensor alpha;
    std::size_t in_h = 0, in_w = 0;
  };

  MoseLayer() = default;

  MoseLayer(std::size_t out_ch, std::size_t in_ch, const std::vector<double>& expert_taus,
            std::size_t gate_hidden, LifParams base, SurrogateConfig sg) {
    double log_sum = 0.0;
    for (double tau : expert_taus) {
      LifParams p = base;
      p.tau = tau;
      experts.emplace_back(out_ch, in_ch, p, sg);
      log_sum += std::log(tau);
    }
    LifParams gate_params = base;
    gate_params.tau = std::exp(log_sum / static_cast<double>(expert_taus.size()));
    gate_lif = SpikingLayer(gate_hidden, in_ch, gate_params, sg);
    gate_head.init_shapes(expert_taus.size(), gate_hidden);
  }

  void init_weights(Rng& rng, double gain = 1.0) {
    for (auto& e : experts) e.init_weights(rng, gain);
    gate_lif.init_weights(rng, gain);
    gate_head.init_weights(rng);
  }

  std::size_t n_experts() const { return experts.size(); }
  std::size_t out_channels() const { return experts.at(0).out_channels(); }
  std::size_t in_channels() const { return experts.at(0).in_channels(); }

  Tensor gate_forward(const std::vector<Tensor>& seq, Record& rec,
                      SpikeMode mode = SpikeMode::hard) const {
    std::vector<Tensor> pooled;
    pooled.reserve(seq.size());
    for (const Tensor& x : seq) {
      Tensor v = spatial_mean(x);
      Tensor g({v.size(), 1, 1});
      for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i];
      pooled.push_back(std::move(g));
    }
    const auto gate_spikes = gate_lif.forward(pooled, rec.gate, mode);
    Tensor rate_map = time_average(gate_spikes);  // {G, 1, 1}
    Tensor rates({rate_map.dim(0)});
    for (std::size_t i = 0; i < rates.size(); ++i) rates[i] = rate_map[i];
    rec.rates = rates;
    Tensor logits = gate_head.forward(rates, &rec.head);
    rec.alpha = softmax(logits);
    return rec.alpha;
  }

  std::vector<Tensor> forward(const std::vector<Tensor>& seq, Record& rec,
                              SpikeMode mode = SpikeMode::hard) const {
    if (seq.empty()) throw Error(ErrorKind::invalid_argument, "mose: empty slice sequence");
    rec.in_h = seq[0].dim(1);
    rec.in_w = seq[0].dim(2);
    gate_forward(seq, rec, mode);

    rec.experts.assign(experts.size(), {});
    rec.expert_out.clear();
    for (std::size_t i = 0; i < experts.size(); ++i)
      rec.expert_out.push_back(experts[i].forward(seq, rec.experts[i], mode));

    std::vector<Tensor> mixed;
    mixed.reserve(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      Tensor y({out_channels(), rec.expert_out[0][t].dim(1), rec.expert_out[0][t].dim(2)});
      for (std::size_t i = 0; i < experts.size(); ++i) y.axpy(rec.alpha[i], rec.expert_out[i][t]);
      mixed.push_back(std::move(y));
    }
    return mixed;
  }

  std::vector<Tensor> backward(const std::vector<Tensor>& grad_mixed, Record& rec) {
    const std::size_t steps = grad_mixed.size();
    const std::size_t p = rec.in_h * rec.in_w;

    // mixture: dL/dalpha_i and dL/dS_i,t
    Tensor galpha({experts.size()});
    std::vector<Tensor> grad_in;
    for (std::size_t i = 0; i < experts.size(); ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t q = 0; q < grad_mixed[t].size(); ++q)
          acc += grad_mixed[t][q] * rec.expert_out[i][t][q];
      galpha[i] = acc;

      std::vector<Tensor> gexp(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        gexp[t] = grad_mixed[t];
        gexp[t].scale(rec.alpha[i]);
      }
      auto gin = experts[i].backward(gexp, rec.experts[i]);
      if (grad_in.empty()) {
        grad_in = std::move(gin);
      } else {
        for (std::size_t t = 0; t < steps; ++t) grad_in[t].axpy(1.0, gin[t]);
      }
    }

    // gate: softmax -> affine -> rate average -> spiking gate -> spatial mean
    Tensor glogits = softmax_backward(galpha, rec.alpha);
    Tensor grates = gate_head.backward(glogits, rec.head);
    std::vector<Tensor> ggate(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      Tensor g({grates.size(), 1, 1});
      for (std::size_t i = 0; i < grates.size(); ++i)
        g[i] = grates[i] / static_cast<double>(steps);
      ggate[t] = std::move(g);
    }
    auto gpooled = gate_lif.backward(ggate, rec.gate);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t ci = 0; ci < in_channels(); ++ci) {
        const double g = gpooled[t][ci] / static_cast<double>(p);
        double* dst = &grad_in[t][ci * p];
        for (std::size_t q = 0; q < p; ++q) dst[q] += g;
      }
    }
    return grad_in;
  }

  void collect(ParamList& out, const std::string& prefix) {
    for (std::size_t i = 0; i < experts.size(); ++i)
      experts[i].collect(out, prefix + "/expert" + std::to_string(i));
    gate_lif.collect(out, prefix + "/gate_lif");
    gate_head.collect(out, prefix + "/gate_head");
  }

  std::vector<SpikingLayer> experts;
  SpikingLayer gate_lif;
  Affine gate_head;
};

// Spec-level mixture feature: time-averaged mixed spike rates.
inline Tensor mose_forward(const MoseLayer& layer, const std::vector<Tensor>& seq,
                           MoseLayer::Record& rec, SpikeMode mode = SpikeMode::hard) {
  return time_average(layer.forward(seq, rec, mode));
}

struct DynamicStreamConfig {
  std::size_t in_channels = 8;   // 2 * K_dynamic
  std::size_t input_size = 64;   // spatial side after pad-and-resize
  std::size_t input_pool = 4;    // entry average pooling factor
  std::size_t c1 = 16;
  std::size_t c2 = 32;
  std::size_t gate_hidden = 8;
  std::vector<double> expert_taus = {2.0, 8.0, 32.0};
  LifParams lif;  // tau overridden per expert
  SurrogateConfig surrogate;
  double init_gain = 1.0;
  double l2_init_boost = 6.0;  // second layer sees low spike rates, not raw input

  void validate() const {
    if (expert_taus.size() < 1)
      throw Error(ErrorKind::invalid_argument, "dynamic stream: need at least one expert");
    for (std::size_t i = 0; i < expert_taus.size(); ++i)
      for (std::size_t j = i + 1; j < expert_taus.size(); ++j)
        if (expert_taus[i] == expert_taus[j])
          throw Error(ErrorKind::invalid_argument,
                      "dynamic stream: expert membrane constants must be distinct");
    if (input_size % (input_pool * 2) != 0)
      throw Error(ErrorKind::invalid_argument, "dynamic stream: pooling does not divide input");
  }
};

// Two MoSE layers with average pooling between them; the embedding is the
// global spatial average of the second layer's time-averaged mixture, so its
// width equals c2.
class DynamicStream {
 public:
  struct Record {
    std::vector<Tensor> pooled_in;
    MoseLayer::Record l1;
    std::vector<Tensor> mid;  // pooled mixture between layers
    MoseLayer::Record l2;
    Tensor rate_map;
    std::size_t t_steps = 0;
    std::size_t h1 = 0, w1 = 0;  // spatial size entering the mid pool
  };

  DynamicStream() = default;

  explicit DynamicStream(const DynamicStreamConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    l1_ = MoseLayer(cfg.c1, cfg.in_channels, cfg.expert_taus, cfg.gate_hidden, cfg.lif,
                    cfg.surrogate);
    l2_ = MoseLayer(cfg.c2, cfg.c1, cfg.expert_taus, cfg.gate_hidden, cfg.lif, cfg.surrogate);
  }

  void init_weights(Rng& rng) {
    l1_.init_weights(rng, cfg_.init_gain);
    l2_.init_weights(rng, cfg_.init_gain * cfg_.l2_init_boost);
  }

  std::size_t embed_dim() const { return cfg_.c2; }
  const DynamicStreamConfig& config() const { return cfg_; }

  Tensor forward(const std::vector<Tensor>& slices, Record& rec,
                 SpikeMode mode = SpikeMode::hard) const {
    if (slices.empty())
      throw Error(ErrorKind::invalid_argument, "dynamic stream: empty slice sequence");
    rec.t_steps = slices.size();
    rec.pooled_in.clear();
    for (const Tensor& s : slices) {
      if (s.dim(0) != cfg_.in_channels || s.dim(1) != cfg_.input_size ||
          s.dim(2) != cfg_.input_size)
        throw Error(ErrorKind::invalid_argument, "dynamic stream: slice shape mismatch");
      rec.pooled_in.push_back(cfg_.input_pool > 1 ? avg_pool(s, cfg_.input_pool) : s);
    }
    auto y1 = l1_.forward(rec.pooled_in, rec.l1, mode);
    rec.h1 = y1[0].dim(1);
    rec.w1 = y1[0].dim(2);
    rec.mid.clear();
    for (const Tensor& y : y1) rec.mid.push_back(avg_pool(y, 2));
    auto y2 = l2_.forward(rec.mid, rec.l2, mode);
    rec.rate_map = time_average(y2);
    return spatial_mean(rec.rate_map);
  }

  // Gradients flow back through both mixtures; slice gradients are discarded
  // (slices are data, not parameters).
  void backward(const Tensor& grad_embed, Record& rec) {
    Tensor gmap = spatial_mean_backward(grad_embed, rec.rate_map.dim(1), rec.rate_map.dim(2));
    std::vector<Tensor> gy2(rec.t_steps);
    for (std::size_t t = 0; t < rec.t_steps; ++t) {
      gy2[t] = gmap;
      gy2[t].scale(1.0 / static_cast<double>(rec.t_steps));
    }
    auto gmid = l2_.backward(gy2, rec.l2);
    std::vector<Tensor> gy1(rec.t_steps);
    for (std::size_t t = 0; t < rec.t_steps; ++t)
      gy1[t] = avg_pool_backward(gmid[t], 2, rec.h1, rec.w1);
    l1_.backward(gy1, rec.l1);
  }

  void collect(ParamList& out, const std::string& prefix) {
    l1_.collect(out, prefix + "/mose1");
    l2_.collect(out, prefix + "/mose2");
  }

  MoseLayer& layer1() { return l1_; }
  MoseLayer& layer2() { return l2_; }

 private:
  DynamicStreamConfig cfg_;
  MoseLayer l1_, l2_;
};

}  // namespace dvsgait
