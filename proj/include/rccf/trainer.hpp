#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rccf/config.hpp"
#include "rccf/data.hpp"
#include "rccf/eval.hpp"
#include "rccf/model.hpp"
#include "rccf/optimizer.hpp"
#include "rccf/serialize.hpp"
#include "rccf/targets.hpp"
#include "rccf/tensor.hpp"

namespace rccf {

// ---------------------------------------------------------------------------
// augmentation
// ---------------------------------------------------------------------------

/// Similarity warp about the image center (scale then shift), bilinear
/// resampling with background fill. The box maps through the same transform.
inline Sample apply_affine(const Sample& s, double scale, double tx, double ty) {
  if (scale == 1.0 && tx == 0.0 && ty == 0.0) return s;
  const int h = s.image.dim(1), w = s.image.dim(2);
  const double cx = w / 2.0, cy = h / 2.0;

  Sample out;
  out.expression = s.expression;
  const Box b = s.target.to_box();
  out.target = GroundTruthBox::from_box({cx + scale * (b.x1 - cx) + tx, cy + scale * (b.y1 - cy) + ty,
                                         cx + scale * (b.x2 - cx) + tx,
                                         cy + scale * (b.y2 - cy) + ty});

  out.image = Tensor({3, h, w});
  const double bg[3] = {kBackground[0] / 255.0, kBackground[1] / 255.0, kBackground[2] / 255.0};
  for (int y = 0; y < h; ++y) {
    const double src_py = cy + (y + 0.5 - cy - ty) / scale;
    const double sy = src_py - 0.5;
    for (int x = 0; x < w; ++x) {
      const double src_px = cx + (x + 0.5 - cx - tx) / scale;
      const double sx = src_px - 0.5;
      if (sx < -1.0 || sx > w || sy < -1.0 || sy > h) {
        for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = bg[c];
        continue;
      }
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        auto sample_at = [&](int yy, int xx) {
          if (xx < 0 || xx >= w || yy < 0 || yy >= h) return bg[c];
          return s.image.at(c, yy, xx);
        };
        const double v = (1 - fy) * ((1 - fx) * sample_at(y0, x0) + fx * sample_at(y0, x0 + 1)) +
                         fy * ((1 - fx) * sample_at(y0 + 1, x0) + fx * sample_at(y0 + 1, x0 + 1));
        out.image.at(c, y, x) = v;
      }
    }
  }
  return out;
}

/// Random shift/scale augmentation. Redraws until the referent stays fully
/// inside the frame; after the retry budget the sample passes through
/// untouched.
inline Sample augment_sample(const Sample& s, Rng& rng, const TrainConfig& cfg) {
  const int h = s.image.dim(1), w = s.image.dim(2);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
    const double tx = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * w;
    const double ty = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * h;
    const double cx = w / 2.0, cy = h / 2.0;
    const Box b = s.target.to_box();
    const Box nb{cx + scale * (b.x1 - cx) + tx, cy + scale * (b.y1 - cy) + ty,
                 cx + scale * (b.x2 - cx) + tx, cy + scale * (b.y2 - cy) + ty};
    if (nb.x1 < 0.0 || nb.y1 < 0.0 || nb.x2 > w || nb.y2 > h) continue;
    return apply_affine(s, scale, tx, ty);
  }
  return s;
}

// ---------------------------------------------------------------------------
// checkpoint plumbing
// ---------------------------------------------------------------------------

inline CheckpointData make_checkpoint(const RccfModel& model, Adam& opt, const Rng& data_rng,
                                      std::uint64_t step, const Vocabulary& vocab) {
  CheckpointData c;
  c.config_text = model.cfg.echo();
  c.vocab_text = vocab.to_text();
  c.rng_state = data_rng.state();
  c.step = step;
  const auto named = model.named_parameters();
  for (const auto& [name, t] : named) c.tensors.emplace_back(name, t);
  for (std::size_t i = 0; i < named.size(); ++i) {
    c.tensors.emplace_back("opt.m." + named[i].first, opt.moment1(i));
    c.tensors.emplace_back("opt.v." + named[i].first, opt.moment2(i));
  }
  c.tensors.emplace_back("opt.t", Tensor::scalar(static_cast<double>(opt.steps_taken())));
  return c;
}

namespace detail {

inline void copy_named_tensor(Tensor dst, const Tensor& src, const std::string& name) {
  if (dst.shape() != src.shape())
    throw std::runtime_error("checkpoint: tensor record '" + name + "' has shape " +
                             shape_str(src.shape()) + ", expected " + shape_str(dst.shape()));
  for (int i = 0; i < dst.size(); ++i) dst.v(i) = src.v(i);
}

}  // namespace detail

/// Restores parameters and optimizer moments into an already-initialized
/// model; any unknown or missing record is an error naming the record.
inline void restore_from_checkpoint(RccfModel& model, Adam& opt, const CheckpointData& c) {
  std::unordered_map<std::string, Tensor> by_name;
  const auto named = model.named_parameters();
  for (const auto& [name, t] : named) by_name.emplace(name, t);
  for (std::size_t i = 0; i < named.size(); ++i) {
    by_name.emplace("opt.m." + named[i].first, opt.moment1(i));
    by_name.emplace("opt.v." + named[i].first, opt.moment2(i));
  }
  std::size_t matched = 0;
  for (const auto& [name, tensor] : c.tensors) {
    if (name == "opt.t") {
      opt.set_steps_taken(static_cast<std::int64_t>(tensor.value()));
      ++matched;
      continue;
    }
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: unexpected tensor record '" + name + "'");
    detail::copy_named_tensor(it->second, tensor, name);
    ++matched;
  }
  if (matched != by_name.size() + 1)
    throw std::runtime_error("checkpoint: missing tensor records (got " + std::to_string(matched) +
                             ", expected " + std::to_string(by_name.size() + 1) + ")");
}

struct LoadedModel {
  RccfModel model;
  Vocabulary vocab;
  Adam opt;
  std::uint64_t step = 0;
  std::uint64_t rng_state = 0;
};

inline LoadedModel model_from_checkpoint(const std::string& path) {
  const CheckpointData c = load_checkpoint(path);
  LoadedModel lm;
  TrainConfig cfg = TrainConfig::from_text(c.config_text);
  lm.vocab = Vocabulary::from_text(c.vocab_text);
  Rng init_rng(cfg.seed);
  lm.model.init(cfg, lm.vocab.size(), init_rng);
  std::vector<Tensor> params;
  for (auto& [name, t] : lm.model.named_parameters()) params.push_back(t);
  lm.opt = Adam(params);
  restore_from_checkpoint(lm.model, lm.opt, c);
  lm.step = c.step;
  lm.rng_state = c.rng_state;
  return lm;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct TrainOutput {
  RccfModel model;
  Vocabulary vocab;
  std::vector<std::string> log_lines;
  std::vector<double> loss_per_step;  // batch-mean total loss, indexed from start step
  std::string checkpoint_path;
  double last_eval_precision = -1.0;
};

/// Runs (or resumes) training on the dataset's train split, logging one line
/// per step and periodically evaluating the val split. All randomness comes
/// from two seeded streams (init and data), so identical inputs give
/// byte-identical checkpoints, logs and reports.
inline TrainOutput train(const TrainConfig& cfg, const Dataset& ds, const std::string& out_dir,
                         const std::string& resume_from = "") {
  cfg.validate();
  namespace fs = std::filesystem;
  if (ds.image_size % 8 != 0 || ds.image_size % cfg.stride != 0)
    throw std::invalid_argument("train: dataset image size " + std::to_string(ds.image_size) +
                                " is incompatible with stride " + std::to_string(cfg.stride));
  const std::vector<int> train_idx = ds.split_indices("train");
  if (train_idx.empty()) throw std::invalid_argument("train: dataset has no train split");
  const std::vector<int> val_idx = ds.split_indices("val");

  TrainOutput out;

  // vocabulary comes from the training split text (or from the checkpoint)
  if (resume_from.empty()) {
    std::vector<std::string> expressions;
    for (int i : train_idx) expressions.push_back(ds.records[i].expression);
    out.vocab = build_vocabulary(expressions);
  } else {
    out.vocab = Vocabulary::from_text(load_checkpoint(resume_from).vocab_text);
  }

  Rng init_rng(cfg.seed);
  out.model.init(cfg, out.vocab.size(), init_rng);
  std::vector<Tensor> params;
  for (auto& [name, t] : out.model.named_parameters()) params.push_back(t);
  Adam opt(params);
  Rng data_rng(cfg.seed ^ 0xda1a5eedULL);

  std::uint64_t start_step = 0;
  if (!resume_from.empty()) {
    const CheckpointData c = load_checkpoint(resume_from);
    if (c.config_text != cfg.echo())
      throw std::runtime_error("train: checkpoint config does not match the requested config");
    restore_from_checkpoint(out.model, opt, c);
    data_rng.set_state(c.rng_state);
    start_step = c.step;
  }

  fs::create_directories(out_dir);
  out.checkpoint_path = (fs::path(out_dir) / "checkpoint.rccf").string();
  const int map_h = ds.image_size / cfg.stride, map_w = ds.image_size / cfg.stride;

  auto log = [&out](const std::string& line) { out.log_lines.push_back(line); };

  for (int step = static_cast<int>(start_step) + 1; step <= cfg.steps; ++step) {
    const double lr = cfg.lr_at_step(step);
    Tape tape;
    double sum_lc = 0, sum_ls = 0, sum_lo = 0;
    Tensor batch_total;
    {
      TapeScope scope(tape);
      for (int b = 0; b < cfg.batch_size; ++b) {
        const int rec = train_idx[data_rng.uniform_int(static_cast<int>(train_idx.size()))];
        Sample s{ds.image(rec), ds.records[rec].expression,
                 GroundTruthBox::from_box(ds.records[rec].box)};
        if (cfg.augment) s = augment_sample(s, data_rng, cfg);

        const TokenSequence toks = tokenize(s.expression, out.vocab);
        ModelOutputs mo = out.model.forward(s.image, toks);
        TargetBundle tb = make_targets(s.target, cfg.stride, map_h, map_w, cfg.min_overlap,
                                       cfg.sigma_min, cfg.size_in_pixels);
        Tensor lc = focal_loss(mo.heatmap, tb.heatmap, cfg.focal_alpha, cfg.focal_beta,
                               cfg.clamp_eps);
        auto [ls, lo] = regression_losses(mo.w_map, mo.h_map, mo.dx_map, mo.dy_map, tb);
        Tensor sample_loss = total_loss(lc, ls, lo, cfg.lambda_size, cfg.lambda_off);
        sum_lc += lc.value();
        sum_ls += ls.value();
        sum_lo += lo.value();
        batch_total = b == 0 ? sample_loss : add(batch_total, sample_loss);
      }
      batch_total = scale(batch_total, 1.0 / cfg.batch_size);
      opt.zero_grad();
      tape.backward(batch_total);
    }
    const bool applied = opt.step(lr);
    out.loss_per_step.push_back(batch_total.value());

    char line[256];
    std::snprintf(line, sizeof(line),
                  "step=%d lr=%.8f l_center=%.6f l_size=%.6f l_off=%.6f loss=%.6f%s", step, lr,
                  sum_lc / cfg.batch_size, sum_ls / cfg.batch_size, sum_lo / cfg.batch_size,
                  batch_total.value(), applied ? "" : " skipped=nonfinite_gradient");
    log(line);

    if (!val_idx.empty() && cfg.eval_every > 0 &&
        (step % cfg.eval_every == 0 || step == cfg.steps)) {
      const EvalResult r = evaluate(out.model, out.vocab, ds, "val");
      out.last_eval_precision = r.precision;
      std::snprintf(line, sizeof(line), "eval step=%d split=val prec_at_0.5=%.6f mean_iou=%.6f",
                    step, r.precision, r.mean_iou);
      log(line);
    }

    if (step % cfg.save_every == 0 || step == cfg.steps) {
      const CheckpointData ckpt =
          make_checkpoint(out.model, opt, data_rng, static_cast<std::uint64_t>(step), out.vocab);
      save_checkpoint(out.checkpoint_path, ckpt);
      save_checkpoint((fs::path(out_dir) / ("checkpoint_step" + std::to_string(step) + ".rccf"))
                          .string(),
                      ckpt);
    }
  }

  // plain moving-window alarm; diagnostic only
  if (out.loss_per_step.size() >= 100) {
    const int k = 50;
    double head = 0, tail = 0;
    for (int i = 0; i < k; ++i) {
      head += out.loss_per_step[i];
      tail += out.loss_per_step[out.loss_per_step.size() - 1 - i];
    }
    if (tail >= head) log("warning: total loss did not decrease over this run");
  }

  {
    std::ofstream mf(fs::path(out_dir) / "metrics.log", std::ios::trunc);
    for (const std::string& l : out.log_lines) mf << l << '\n';
    std::ofstream cf(fs::path(out_dir) / "config_used.txt", std::ios::trunc);
    cf << cfg.echo();
    out.vocab.save((fs::path(out_dir) / "vocab.txt").string());
  }
  return out;
}

}  // namespace rccf
