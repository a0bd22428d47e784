#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dvsgait/checkpoint.hpp"
#include "dvsgait/config.hpp"
#include "dvsgait/eval.hpp"
#include "dvsgait/model.hpp"
#include "dvsgait/optim.hpp"
#include "dvsgait/pipeline.hpp"
#include "dvsgait/toy.hpp"

namespace dvsgait {

// Everything one run needs, parsed from the flat key=value file. Defaults
// follow the configuration ledger; lr / weight decay / lambda_d / expert
// count carry the published training settings.
struct RunConfig {
  ToyGaitConfig toy;
  PipelineConfig pipeline;
  ModelConfig model;
  LossWeights loss;

  double lr = 0.1;
  double weight_decay = 0.0005;
  double momentum = 0.9;
  std::size_t iters = 2000;
  std::size_t lr_drop_iter = 0;  // 0 = constant learning rate
  double lr_drop_factor = 0.1;
  std::size_t batch_p = 4;
  std::size_t batch_k = 2;
  std::uint64_t train_seed = 5;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 0;  // 0 = final only
  std::size_t threads = 1;
  std::string teacher_file;
  std::uint64_t teacher_seed = 1234;

  static RunConfig from_config(const Config& cfg) {
    RunConfig run;
    run.toy.n_identities = cfg.get_size("toy_identities", 8);
    run.toy.sequences_per_identity = cfg.get_size("toy_seqs", 6);
    run.toy.frames_per_sequence = cfg.get_size("toy_frames", 32);
    run.toy.frame_size = cfg.get_size("toy_size", 64);
    run.toy.frame_dt_us = cfg.get_u64("toy_dt_us", 16000);
    run.toy.seed = cfg.get_u64("toy_seed", 7);
    run.toy.bright_sequences = cfg.get_size("toy_bright_seqs", 3);
    run.toy.brightness_bright = cfg.get_double("toy_brightness_bright", 1.0);
    run.toy.brightness_dim = cfg.get_double("toy_brightness_dim", 0.35);

    run.pipeline.sim.threshold_c = cfg.get_double("sim_threshold", 0.2);
    run.pipeline.sim.cutoff_hz = cfg.get_double("sim_cutoff_hz", 300.0);
    run.pipeline.sim.noise_rate_hz = cfg.get_double("sim_noise_hz", 1.0);
    run.pipeline.sim.refractory_us = cfg.get_u64("sim_refractory_us", 100);
    run.pipeline.sim.interp_factor = static_cast<std::uint32_t>(cfg.get_u64("sim_interp", 4));
    run.pipeline.sim.log_eps = cfg.get_double("sim_log_eps", 0.02);
    run.pipeline.sim.seed = cfg.get_u64("sim_seed", 11);
    run.pipeline.num_slices = cfg.get_size("dyn_slices", 6);
    run.pipeline.k_dynamic = cfg.get_size("dyn_k", 4);
    run.pipeline.k_static = cfg.get_size("static_k", 8);
    run.pipeline.target_size = cfg.get_size("input_size", 64);
    run.pipeline.normalize = cfg.get_u64("input_norm", 1) != 0;
    run.pipeline.dyn_gain = cfg.get_double("dyn_gain", 12.0);
    run.pipeline.static_gain = cfg.get_double("static_gain", 4.0);

    run.model.streams = stream_mode_from_string(cfg.get_string("streams", "dual"));
    run.model.embed_dim = cfg.get_size("embed_dim", 64);
    run.model.n_classes = run.toy.n_identities;
    run.model.seed = cfg.get_u64("model_seed", 1);

    run.model.dyn.in_channels = 2 * run.pipeline.k_dynamic;
    run.model.dyn.input_size = run.pipeline.target_size;
    run.model.dyn.input_pool = cfg.get_size("dyn_input_pool", 4);
    run.model.dyn.c1 = cfg.get_size("dyn_c1", 16);
    run.model.dyn.c2 = cfg.get_size("dyn_c2", 32);
    run.model.dyn.gate_hidden = cfg.get_size("dyn_gate_hidden", 8);
    run.model.dyn.expert_taus = cfg.get_double_list("dyn_taus", {2.0, 8.0, 32.0});
    run.model.dyn.lif.u_th = cfg.get_double("dyn_u_th", 1.0);
    run.model.dyn.lif.u_reset = cfg.get_double("dyn_u_reset", 0.0);
    run.model.dyn.surrogate.beta = cfg.get_double("dyn_beta", 4.0);
    run.model.dyn.init_gain = cfg.get_double("dyn_init_gain", 1.0);
    run.model.dyn.l2_init_boost = cfg.get_double("dyn_l2_boost", 6.0);

    run.model.stat.in_channels = 2 * run.pipeline.k_static;
    run.model.stat.input_size = run.pipeline.target_size;
    run.model.stat.c1 = cfg.get_size("static_c1", 16);
    run.model.stat.c2 = cfg.get_size("static_c2", 32);
    run.model.stat.c3 = cfg.get_size("static_c3", 64);
    run.model.stat.embed_dim = cfg.get_size("static_embed", 32);
    run.model.stat.teacher_dim = cfg.get_size("teacher_dim", 64);

    run.loss.lambda_d = cfg.get_double("lambda_d", 0.2);
    run.loss.triplet_margin = cfg.get_double("triplet_margin", 0.2);
    run.loss.validate();

    run.lr = cfg.get_double("lr", 0.1);
    run.weight_decay = cfg.get_double("weight_decay", 0.0005);
    run.momentum = cfg.get_double("momentum", 0.9);
    run.iters = cfg.get_size("iters", 2000);
    run.lr_drop_iter = cfg.get_size("lr_drop_iter", 0);
    run.lr_drop_factor = cfg.get_double("lr_drop_factor", 0.1);
    run.batch_p = cfg.get_size("batch_p", 4);
    run.batch_k = cfg.get_size("batch_k", 2);
    run.train_seed = cfg.get_u64("train_seed", 5);
    run.log_every = cfg.get_size("log_every", 100);
    run.checkpoint_every = cfg.get_size("checkpoint_every", 0);
    run.threads = cfg.get_size("threads", 1);
    run.teacher_file = cfg.get_string("teacher_file", "");
    run.teacher_seed = cfg.get_u64("teacher_seed", 1234);

    cfg.ensure_all_consumed();
    return run;
  }

  // every knob materialized, so a checkpoint can rebuild the exact model
  Config to_config() const {
    Config c;
    auto put_u = [&](const char* k, std::uint64_t v) { c.set(k, std::to_string(v)); };
    auto put_d = [&](const char* k, double v) {
      std::ostringstream ss;
      ss.precision(17);
      ss << v;
      c.set(k, ss.str());
    };
    put_u("toy_identities", toy.n_identities);
    put_u("toy_seqs", toy.sequences_per_identity);
    put_u("toy_frames", toy.frames_per_sequence);
    put_u("toy_size", toy.frame_size);
    put_u("toy_dt_us", toy.frame_dt_us);
    put_u("toy_seed", toy.seed);
    put_u("toy_bright_seqs", toy.bright_sequences);
    put_d("toy_brightness_bright", toy.brightness_bright);
    put_d("toy_brightness_dim", toy.brightness_dim);
    put_d("sim_threshold", pipeline.sim.threshold_c);
    put_d("sim_cutoff_hz", pipeline.sim.cutoff_hz);
    put_d("sim_noise_hz", pipeline.sim.noise_rate_hz);
    put_u("sim_refractory_us", pipeline.sim.refractory_us);
    put_u("sim_interp", pipeline.sim.interp_factor);
    put_d("sim_log_eps", pipeline.sim.log_eps);
    put_u("sim_seed", pipeline.sim.seed);
    put_u("dyn_slices", pipeline.num_slices);
    put_u("dyn_k", pipeline.k_dynamic);
    put_u("static_k", pipeline.k_static);
    put_u("input_size", pipeline.target_size);
    put_u("input_norm", pipeline.normalize ? 1 : 0);
    put_d("dyn_gain", pipeline.dyn_gain);
    put_d("static_gain", pipeline.static_gain);
    c.set("streams", model.streams == StreamMode::dual
                         ? "dual"
                         : (model.streams == StreamMode::static_only ? "static" : "dynamic"));
    put_u("embed_dim", model.embed_dim);
    put_u("model_seed", model.seed);
    put_u("dyn_input_pool", model.dyn.input_pool);
    put_u("dyn_c1", model.dyn.c1);
    put_u("dyn_c2", model.dyn.c2);
    put_u("dyn_gate_hidden", model.dyn.gate_hidden);
    {
      std::ostringstream ss;
      ss.precision(17);
      for (std::size_t i = 0; i < model.dyn.expert_taus.size(); ++i) {
        if (i) ss << ",";
        ss << model.dyn.expert_taus[i];
      }
      c.set("dyn_taus", ss.str());
    }
    put_d("dyn_u_th", model.dyn.lif.u_th);
    put_d("dyn_u_reset", model.dyn.lif.u_reset);
    put_d("dyn_beta", model.dyn.surrogate.beta);
    put_d("dyn_init_gain", model.dyn.init_gain);
    put_d("dyn_l2_boost", model.dyn.l2_init_boost);
    put_u("static_c1", model.stat.c1);
    put_u("static_c2", model.stat.c2);
    put_u("static_c3", model.stat.c3);
    put_u("static_embed", model.stat.embed_dim);
    put_u("teacher_dim", model.stat.teacher_dim);
    put_d("lambda_d", loss.lambda_d);
    put_d("triplet_margin", loss.triplet_margin);
    put_d("lr", lr);
    put_d("weight_decay", weight_decay);
    put_d("momentum", momentum);
    put_u("iters", iters);
    put_u("lr_drop_iter", lr_drop_iter);
    put_d("lr_drop_factor", lr_drop_factor);
    put_u("batch_p", batch_p);
    put_u("batch_k", batch_k);
    put_u("train_seed", train_seed);
    put_u("log_every", log_every);
    put_u("checkpoint_every", checkpoint_every);
    put_u("threads", threads);
    c.set("teacher_file", teacher_file);
    put_u("teacher_seed", teacher_seed);
    return c;
  }
};

struct SampleMeta {
  int label = 0;
  std::size_t seq_index = 0;
  std::string sample_id;
  std::string condition;
};

struct PreparedDataset {
  std::vector<SampleTensors> samples;
  std::vector<SampleMeta> meta;
};

namespace detail {

inline void run_indexed(std::size_t n, std::size_t threads,
                        const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t used = std::min(threads, n);
  for (std::size_t t = 0; t < used; ++t)
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < n; i += used) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Renders the toy corpus, synthesizes events, voxelizes, and attaches
// teacher vectors (pseudo teacher of the middle frame unless a TFS1 file is
// given). Per-sample work is independent, so it parallelizes cleanly.
inline PreparedDataset prepare_toy_dataset(const RunConfig& run) {
  const auto sequences = generate_toy_dataset(run.toy);
  TeacherFeatureSet loaded;
  const bool use_file = !run.teacher_file.empty();
  if (use_file) {
    loaded = load_teacher_features(run.teacher_file);
    if (loaded.dim != run.model.stat.teacher_dim)
      throw Error(ErrorKind::data_error,
                  "teacher file width " + std::to_string(loaded.dim) + " does not match model " +
                      std::to_string(run.model.stat.teacher_dim));
  }

  PreparedDataset ds;
  ds.samples.resize(sequences.size());
  ds.meta.resize(sequences.size());
  detail::run_indexed(sequences.size(), run.threads, [&](std::size_t i) {
    const ToySequence& sq = sequences[i];
    SampleTensors st =
        tensors_from_frames(sq.frames, run.pipeline, sq.label, sq.sample_id, i);
    if (run.model.streams != StreamMode::dynamic_only) {
      if (use_file) {
        st.teacher = loaded.get(sq.sample_id);
      } else {
        const Tensor& middle = sq.frames.frames[sq.frames.size() / 2];
        st.teacher = pseudo_teacher(middle, run.model.stat.teacher_dim, run.teacher_seed);
      }
    }
    ds.samples[i] = std::move(st);
    ds.meta[i] = {sq.label, i % run.toy.sequences_per_identity, sq.sample_id, sq.condition};
  });
  return ds;
}

struct TrainRow {
  std::size_t iteration;
  double ce, tri, align, total;  // align column carries lambda_d * L_align
};

struct TrainResult {
  std::vector<TrainRow> log;
  std::string checkpoint_path;
  std::string metrics_path;
};

inline std::vector<CheckpointBlob> checkpoint_blobs(GaitModel& model, const RunConfig& run,
                                                    SgdOptimizer* opt) {
  std::vector<CheckpointBlob> blobs;
  blobs.push_back(blob_from_text("meta/config", run.to_config().to_text()));
  for (const auto& p : model.params()) blobs.push_back(blob_from_tensor(p.name, *p.value));
  if (opt)
    for (const auto& [name, buf] : opt->momentum_buffers())
      blobs.push_back(blob_from_tensor("opt/momentum/" + name, buf));
  return blobs;
}

inline GaitModel model_from_checkpoint(const std::string& path, RunConfig* out_run = nullptr) {
  const auto blobs = load_checkpoint(path);
  std::string cfg_text;
  for (const auto& b : blobs)
    if (b.name == "meta/config") cfg_text = text_from_blob(b);
  if (cfg_text.empty())
    throw Error(ErrorKind::data_error, path + ": checkpoint lacks a meta/config blob");
  RunConfig run = RunConfig::from_config(Config::from_string(cfg_text, path + "#meta"));
  GaitModel model(run.model);
  restore_params(model.params(), blobs);
  if (out_run) *out_run = run;
  return model;
}

// One forward per sample in production (hard-spike) mode.
inline std::vector<GaitEmbedding> embed_samples(const GaitModel& model,
                                                const std::vector<SampleTensors>& samples,
                                                std::size_t threads = 1) {
  std::vector<GaitEmbedding> out(samples.size());
  detail::run_indexed(samples.size(), threads, [&](std::size_t i) {
    GaitModel::Record rec;
    auto o = model.forward(samples[i], rec, SpikeMode::hard);
    out[i] = {o.f_gait, samples[i].label, samples[i].sample_id};
  });
  return out;
}

// First sequence of every identity forms the gallery, the rest probe (the
// desk-scale stand-in for a dataset protocol).
struct ProtocolSplit {
  std::vector<std::size_t> gallery;
  std::vector<std::size_t> probes;
};

inline ProtocolSplit first_sequence_gallery(const PreparedDataset& ds) {
  ProtocolSplit split;
  for (std::size_t i = 0; i < ds.meta.size(); ++i) {
    if (ds.meta[i].seq_index == 0) split.gallery.push_back(i);
    else split.probes.push_back(i);
  }
  return split;
}

inline TrainResult train_run(const RunConfig& run, const std::string& out_dir,
                             const PreparedDataset* prepared = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  PreparedDataset local;
  if (!prepared) local = prepare_toy_dataset(run);
  const PreparedDataset& ds = prepared ? *prepared : local;

  // identity -> sample indices
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_id[ds.samples[i].label].push_back(i);
  std::vector<int> ids;
  for (const auto& [id, v] : by_id) ids.push_back(id);
  if (ids.size() < 2)
    throw Error(ErrorKind::degenerate_batch, "train: need at least two identities");

  GaitModel model(run.model);
  SgdOptimizer opt(run.lr, run.weight_decay, run.momentum);
  ParamList params = model.params();
  Rng sampler(run.train_seed);

  const std::string csv_path = (fs::path(out_dir) / "metrics.csv").string();
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << "iteration,ce,tri,align,total\n";
  csv.precision(12);

  TrainResult result;
  result.metrics_path = csv_path;

  const std::size_t p_count = std::min(run.batch_p, ids.size());
  for (std::size_t it = 1; it <= run.iters; ++it) {
    try {
      if (run.lr_drop_iter > 0 && it == run.lr_drop_iter)
        opt.set_learning_rate(opt.learning_rate() * run.lr_drop_factor);

      // P x K identity-balanced batch
      std::vector<int> pool = ids;
      for (std::size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[sampler.below(i)]);
      std::vector<std::size_t> batch;
      for (std::size_t pi = 0; pi < p_count; ++pi) {
        std::vector<std::size_t> ss = by_id[pool[pi]];
        for (std::size_t i = ss.size(); i > 1; --i)
          std::swap(ss[i - 1], ss[sampler.below(i)]);
        for (std::size_t ki = 0; ki < std::min(run.batch_k, ss.size()); ++ki)
          batch.push_back(ss[ki]);
      }
      const std::size_t bsz = batch.size();

      std::vector<GaitModel::Record> recs(bsz);
      std::vector<GaitModel::Output> outs(bsz);
      detail::run_indexed(bsz, run.threads, [&](std::size_t i) {
        outs[i] = model.forward(ds.samples[batch[i]], recs[i], SpikeMode::hard);
      });

      // losses over the batch
      double ce_sum = 0.0, align_sum = 0.0;
      std::vector<Tensor> ce_grads(bsz);
      std::vector<Tensor> emb;
      std::vector<int> labels;
      for (std::size_t i = 0; i < bsz; ++i) {
        ce_sum += ce_loss(outs[i].logits,
                          static_cast<std::size_t>(ds.samples[batch[i]].label), &ce_grads[i]);
        emb.push_back(outs[i].f_gait);
        labels.push_back(ds.samples[batch[i]].label);
      }
      std::vector<Tensor> tri_grads;
      const double tri = triplet_loss(emb, labels, run.loss.triplet_margin, &tri_grads);
      const bool use_align = run.loss.lambda_d > 0.0 && model.uses_static();
      std::vector<Tensor> align_grads(bsz);
      if (use_align) {
        for (std::size_t i = 0; i < bsz; ++i) {
          const Tensor& teacher = ds.samples[batch[i]].teacher;
          align_sum += align_loss(outs[i].z_evs, teacher);
          align_grads[i] = align_loss_grad(outs[i].z_evs, teacher);
          align_grads[i].scale(run.loss.lambda_d / static_cast<double>(bsz));
        }
      }
      const double ce = ce_sum / static_cast<double>(bsz);
      const double align_raw = use_align ? align_sum / static_cast<double>(bsz) : 0.0;
      const double total = total_loss(ce, tri, align_raw, run.loss);
      if (!std::isfinite(total))
        throw Error(ErrorKind::numeric_error, "non-finite total loss");

      model.zero_grads();
      for (std::size_t i = 0; i < bsz; ++i) {
        ce_grads[i].scale(1.0 / static_cast<double>(bsz));
        model.backward(tri_grads[i], ce_grads[i], align_grads[i], recs[i]);
      }
      opt.step(params);

      const double align_weighted = run.loss.lambda_d * align_raw;
      result.log.push_back({it, ce, tri, align_weighted, total});
      csv << it << "," << ce << "," << tri << "," << align_weighted << "," << total << "\n";

      if (run.checkpoint_every > 0 && it % run.checkpoint_every == 0) {
        const std::string p =
            (fs::path(out_dir) / ("checkpoint_" + std::to_string(it) + ".ckpt")).string();
        save_checkpoint(checkpoint_blobs(model, run, &opt), p);
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(it) + ": " + e.what());
    }
  }

  result.checkpoint_path = (fs::path(out_dir) / "checkpoint.ckpt").string();
  save_checkpoint(checkpoint_blobs(model, run, &opt), result.checkpoint_path);
  return result;
}

}  // namespace dvsgait
