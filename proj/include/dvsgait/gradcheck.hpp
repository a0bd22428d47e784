#pragma once

#include <string>
#include <vector>

#include "dvsgait/train.hpp"

namespace dvsgait {

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t n_params = 0;
  bool ok = true;
};

namespace detail {

// A fixed synthetic batch (2 identities x 2 samples) drawn once per seed.
inline std::vector<SampleTensors> gradcheck_batch(const ModelConfig& mc, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SampleTensors> batch;
  for (int i = 0; i < 4; ++i) {
    SampleTensors s;
    s.label = i / 2;
    s.sample_id = "gc" + std::to_string(i);
    for (std::size_t t = 0; t < 3; ++t) {
      Tensor sl({mc.dyn.in_channels, mc.dyn.input_size, mc.dyn.input_size});
      sl.fill_uniform(rng, 0.0, 1.2);
      s.dyn_slices.push_back(std::move(sl));
    }
    s.static_grid.reshape({mc.stat.in_channels, mc.stat.input_size, mc.stat.input_size});
    s.static_grid.fill_uniform(rng, 0.0, 1.0);
    s.teacher.reshape({mc.stat.teacher_dim});
    s.teacher.fill_uniform(rng, -0.5, 0.5);
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace detail

// Compares analytic gradients of the smoothed forward (spike nonlinearity
// replaced by the surrogate-integrated sigmoid, exact-adjoint backward)
// against central finite differences, for every parameter. The loss is the
// full training objective on a fixed synthetic batch.
inline GradcheckReport gradcheck_model(const RunConfig& run, std::uint64_t seed,
                                       double tolerance = 1e-4) {
  GaitModel model(run.model);
  ParamList params = model.params();
  std::size_t n = 0;
  for (const auto& p : params) n += p.value->size();
  GradcheckReport report;
  report.n_params = n;
  if (n == 0) return report;  // nothing to check
  if (n > 2000)
    throw Error(ErrorKind::invalid_argument,
                "gradcheck: model has " + std::to_string(n) + " parameters (limit 2000)");

  const auto batch = detail::gradcheck_batch(run.model, seed);
  std::vector<int> labels;
  for (const auto& s : batch) labels.push_back(s.label);

  const bool use_align = run.loss.lambda_d > 0.0 && model.uses_static();
  const double bsz = static_cast<double>(batch.size());

  auto loss_value = [&]() {
    double ce_sum = 0.0, align_sum = 0.0;
    std::vector<Tensor> emb;
    for (const auto& s : batch) {
      GaitModel::Record rec;
      auto out = model.forward(s, rec, SpikeMode::smoothed);
      ce_sum += ce_loss(out.logits, static_cast<std::size_t>(s.label));
      if (use_align) align_sum += align_loss(out.z_evs, s.teacher);
      emb.push_back(out.f_gait);
    }
    const double tri = triplet_loss(emb, labels, run.loss.triplet_margin);
    return total_loss(ce_sum / bsz, tri, align_sum / bsz, run.loss);
  };

  // analytic gradients of the same smoothed objective
  model.zero_grads();
  {
    std::vector<GaitModel::Record> recs(batch.size());
    std::vector<GaitModel::Output> outs(batch.size());
    std::vector<Tensor> emb;
    std::vector<Tensor> ce_grads(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      outs[i] = model.forward(batch[i], recs[i], SpikeMode::smoothed);
      ce_loss(outs[i].logits, static_cast<std::size_t>(batch[i].label), &ce_grads[i]);
      ce_grads[i].scale(1.0 / bsz);
      emb.push_back(outs[i].f_gait);
    }
    std::vector<Tensor> tri_grads;
    triplet_loss(emb, labels, run.loss.triplet_margin, &tri_grads);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Tensor ag;
      if (use_align) {
        ag = align_loss_grad(outs[i].z_evs, batch[i].teacher);
        ag.scale(run.loss.lambda_d / bsz);
      }
      model.backward(tri_grads[i], ce_grads[i], ag, recs[i]);
    }
  }

  std::vector<Tensor> analytic;
  for (const auto& p : params) analytic.push_back(*p.grad);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = *params[pi].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value[i];
      const double h = 2e-4 * std::max(1.0, std::abs(keep));
      // fourth-order five-point stencil keeps truncation error below the
      // reporting floor on smooth models
      value[i] = keep + h;
      const double lp1 = loss_value();
      value[i] = keep - h;
      const double lm1 = loss_value();
      value[i] = keep + 2.0 * h;
      const double lp2 = loss_value();
      value[i] = keep - 2.0 * h;
      const double lm2 = loss_value();
      value[i] = keep;
      const double fd = (8.0 * (lp1 - lm1) - (lp2 - lm2)) / (12.0 * h);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.ok = report.max_rel_error < tolerance;
  return report;
}

}  // namespace dvsgait
