// Acceptance suite: one binary, one printed line per criterion.
// Exit code 0 only if every criterion holds at its stated tolerance.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "rccf/ablation.hpp"
#include "rccf/data.hpp"
#include "rccf/decode.hpp"
#include "rccf/eval.hpp"
#include "rccf/gradcheck.hpp"
#include "rccf/model.hpp"
#include "rccf/ops.hpp"
#include "rccf/targets.hpp"
#include "rccf/trainer.hpp"

using namespace rccf;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t.v(i) = rng.uniform(lo, hi);
  return t;
}

Tensor probe(const Tensor& out, const Tensor& weights) { return sum(mul(out, weights)); }

// ---------------------------------------------------------------------------
// criterion 1: gradient suite
// ---------------------------------------------------------------------------

struct GradCase {
  const char* name;
  std::function<double(Rng&)> run;  // returns max relative error for one case
};

void criterion_gradient_suite() {
  const auto t0 = clock_type::now();
  std::vector<GradCase> cases;

  auto push_binary = [&cases](const char* name, Tensor (*op)(const Tensor&, const Tensor&)) {
    cases.push_back({name, [op](Rng& rng) {
                       Tensor a = rand_tensor({3, 4}, rng);
                       Tensor b = rand_tensor({3, 4}, rng);
                       Tensor w = rand_tensor({3, 4}, rng);
                       const double e1 = finite_difference_check(
                           [&](const Tensor& p) { return probe(op(p, b), w); }, a);
                       const double e2 = finite_difference_check(
                           [&](const Tensor& p) { return probe(op(a, p), w); }, b);
                       return std::max(e1, e2);
                     }});
  };
  push_binary("add", add);
  push_binary("sub", sub);
  push_binary("mul", mul);

  cases.push_back({"emax", [](Rng& rng) {
    Tensor a = rand_tensor({12}, rng);
    Tensor b(a.shape());
    for (int i = 0; i < b.size(); ++i)
      b.v(i) = a.v(i) + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.2, 1.0);
    Tensor w = rand_tensor({12}, rng);
    const double e1 =
        finite_difference_check([&](const Tensor& p) { return probe(emax(p, b), w); }, a);
    const double e2 =
        finite_difference_check([&](const Tensor& p) { return probe(emax(a, p), w); }, b);
    return std::max(e1, e2);
  }});

  cases.push_back({"scale/add_scalar", [](Rng& rng) {
    Tensor x = rand_tensor({10}, rng);
    Tensor w = rand_tensor({10}, rng);
    const double c = rng.uniform(-2.0, 2.0);
    const double e1 =
        finite_difference_check([&](const Tensor& p) { return probe(scale(p, c), w); }, x);
    const double e2 =
        finite_difference_check([&](const Tensor& p) { return probe(add_scalar(p, c), w); }, x);
    return std::max(e1, e2);
  }});

  cases.push_back({"add_scalar_tensor", [](Rng& rng) {
    Tensor x = rand_tensor({3, 3}, rng);
    Tensor s = Tensor::scalar(rng.uniform(-1.0, 1.0));
    Tensor w = rand_tensor({3, 3}, rng);
    const double e1 = finite_difference_check(
        [&](const Tensor& p) { return probe(add_scalar_tensor(p, s), w); }, x);
    const double e2 = finite_difference_check(
        [&](const Tensor& p) { return probe(add_scalar_tensor(x, p), w); }, s);
    return std::max(e1, e2);
  }});

  cases.push_back({"relu", [](Rng& rng) {
    Tensor x({14});
    for (int i = 0; i < x.size(); ++i)
      x.v(i) = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.1, 1.5);
    Tensor w = rand_tensor({14}, rng);
    return finite_difference_check([&](const Tensor& p) { return probe(relu(p), w); }, x);
  }});

  cases.push_back({"abs", [](Rng& rng) {
    Tensor x({14});
    for (int i = 0; i < x.size(); ++i)
      x.v(i) = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.1, 1.5);
    Tensor w = rand_tensor({14}, rng);
    return finite_difference_check([&](const Tensor& p) { return probe(abs_op(p), w); }, x);
  }});

  cases.push_back({"sigmoid", [](Rng& rng) {
    Tensor x = rand_tensor({14}, rng, -3.0, 3.0);
    Tensor w = rand_tensor({14}, rng);
    return finite_difference_check([&](const Tensor& p) { return probe(sigmoid(p), w); }, x);
  }});

  cases.push_back({"tanh", [](Rng& rng) {
    Tensor x = rand_tensor({14}, rng, -3.0, 3.0);
    Tensor w = rand_tensor({14}, rng);
    return finite_difference_check([&](const Tensor& p) { return probe(tanh_op(p), w); }, x);
  }});

  cases.push_back({"log", [](Rng& rng) {
    Tensor x = rand_tensor({14}, rng, 0.2, 3.0);
    Tensor w = rand_tensor({14}, rng);
    return finite_difference_check([&](const Tensor& p) { return probe(log_op(p), w); }, x);
  }});

  cases.push_back({"pow_const", [](Rng& rng) {
    Tensor x = rand_tensor({14}, rng, 0.2, 2.0);
    Tensor w = rand_tensor({14}, rng);
    const double p_exp = rng.uniform() < 0.5 ? 2.0 : 4.0;
    return finite_difference_check(
        [&](const Tensor& p) { return probe(pow_const(p, p_exp), w); }, x);
  }});

  cases.push_back({"clamp", [](Rng& rng) {
    Tensor x = rand_tensor({14}, rng, -0.55, 0.55);
    Tensor w = rand_tensor({14}, rng);
    return finite_difference_check(
        [&](const Tensor& p) { return probe(clamp_op(p, -0.7, 0.7), w); }, x);
  }});

  cases.push_back({"sum/pick", [](Rng& rng) {
    Tensor x = rand_tensor({9}, rng);
    const int idx = rng.uniform_int(9);
    const double e1 = finite_difference_check([](const Tensor& p) { return sum(p); }, x);
    const double e2 = finite_difference_check([&](const Tensor& p) { return pick(p, idx); }, x);
    return std::max(e1, e2);
  }});

  cases.push_back({"select/reshape/concat", [](Rng& rng) {
    Tensor x3 = rand_tensor({3, 3, 3}, rng);
    Tensor w2 = rand_tensor({3, 3}, rng);
    const double e1 = finite_difference_check(
        [&](const Tensor& p) { return probe(select_channel(p, 1), w2); }, x3);
    Tensor m = rand_tensor({3, 5}, rng);
    Tensor wr = rand_tensor({5}, rng);
    const double e2 = finite_difference_check(
        [&](const Tensor& p) { return probe(select_row(p, 2), wr); }, m);
    Tensor v = rand_tensor({6}, rng);
    Tensor w6 = rand_tensor({2, 3}, rng);
    const double e3 = finite_difference_check(
        [&](const Tensor& p) { return probe(reshape(p, {2, 3}), w6); }, v);
    Tensor other = rand_tensor({2, 5}, rng);
    Tensor wc = rand_tensor({5, 5}, rng);
    const double e4 = finite_difference_check(
        [&](const Tensor& p) { return probe(concat0({p, other}), wc); }, m);
    return std::max({e1, e2, e3, e4});
  }});

  cases.push_back({"linear/matvec", [](Rng& rng) {
    Tensor w = rand_tensor({3, 5}, rng);
    Tensor x = rand_tensor({5}, rng);
    Tensor b = rand_tensor({3}, rng);
    Tensor pw = rand_tensor({3}, rng);
    double e = 0.0;
    e = std::max(e, finite_difference_check(
                        [&](const Tensor& p) { return probe(linear(p, x, b), pw); }, w));
    e = std::max(e, finite_difference_check(
                        [&](const Tensor& p) { return probe(linear(w, p, b), pw); }, x));
    e = std::max(e, finite_difference_check(
                        [&](const Tensor& p) { return probe(linear(w, x, p), pw); }, b));
    e = std::max(e, finite_difference_check(
                        [&](const Tensor& p) { return probe(matvec(w, p), pw); }, x));
    return e;
  }});

  cases.push_back({"conv2d", [](Rng& rng) {
    const int ci = 1 + rng.uniform_int(3), co = 1 + rng.uniform_int(3);
    const int hw = 4 + rng.uniform_int(4);
    const int k = rng.uniform() < 0.5 ? 1 : 3;
    const int stride = 1 + rng.uniform_int(2);
    Tensor in = rand_tensor({ci, hw, hw}, rng);
    Tensor kr = rand_tensor({co, ci, k, k}, rng);
    const int ho = (hw + 2 - k) / stride + 1;
    Tensor w = rand_tensor({co, ho, ho}, rng);
    const double e1 = finite_difference_check(
        [&](const Tensor& p) { return probe(conv2d(p, kr, stride, 1), w); }, in);
    const double e2 = finite_difference_check(
        [&](const Tensor& p) { return probe(conv2d(in, p, stride, 1), w); }, kr);
    return std::max(e1, e2);
  }});

  cases.push_back({"add_channel_bias", [](Rng& rng) {
    Tensor x = rand_tensor({3, 4, 4}, rng);
    Tensor b = rand_tensor({3}, rng);
    Tensor w = rand_tensor({3, 4, 4}, rng);
    const double e1 = finite_difference_check(
        [&](const Tensor& p) { return probe(add_channel_bias(p, b), w); }, x);
    const double e2 = finite_difference_check(
        [&](const Tensor& p) { return probe(add_channel_bias(x, p), w); }, b);
    return std::max(e1, e2);
  }});

  cases.push_back({"bilinear_resize", [](Rng& rng) {
    Tensor x = rand_tensor({2, 6, 6}, rng);
    const int oh = 3 + rng.uniform_int(8), ow = 3 + rng.uniform_int(8);
    Tensor w = rand_tensor({2, oh, ow}, rng);
    return finite_difference_check(
        [&](const Tensor& p) { return probe(bilinear_resize(p, oh, ow), w); }, x);
  }});

  cases.push_back({"embed_rows", [](Rng& rng) {
    Tensor table = rand_tensor({8, 4}, rng);
    std::vector<int> ids{rng.uniform_int(8), rng.uniform_int(8), rng.uniform_int(8)};
    Tensor w = rand_tensor({3, 4}, rng);
    return finite_difference_check(
        [&](const Tensor& p) { return probe(embed_rows(p, ids), w); }, table);
  }});

  cases.push_back({"focal_loss", [](Rng& rng) {
    GroundTruthBox box{rng.uniform(8.0, 24.0), rng.uniform(8.0, 24.0), rng.uniform(4.0, 16.0),
                       rng.uniform(4.0, 16.0)};
    TargetBundle t = make_targets(box, 4, 8, 8);
    Tensor pred(t.heatmap.shape());
    for (int i = 0; i < pred.size(); ++i) pred.v(i) = rng.uniform(0.05, 0.95);
    return finite_difference_check(
        [&](const Tensor& p) { return focal_loss(p, t.heatmap); }, pred);
  }});

  cases.push_back({"regression_losses", [](Rng& rng) {
    GroundTruthBox box{rng.uniform(8.0, 24.0), rng.uniform(8.0, 24.0), rng.uniform(4.0, 16.0),
                       rng.uniform(4.0, 16.0)};
    TargetBundle t = make_targets(box, 4, 8, 8);
    // keep predictions away from the L1 kink at the target values
    auto off_target = [&rng](double target) {
      return target + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.2, 1.0);
    };
    Tensor wm = Tensor::full({8, 8}, off_target(t.size_w));
    Tensor hm = Tensor::full({8, 8}, off_target(t.size_h));
    Tensor dxm = Tensor::full({8, 8}, off_target(t.off_x));
    Tensor dym = Tensor::full({8, 8}, off_target(t.off_y));
    const double e1 = finite_difference_check(
        [&](const Tensor& p) {
          auto [ls, lo] = regression_losses(p, hm, dxm, dym, t);
          return total_loss(Tensor::scalar(0.0), ls, lo);
        },
        wm);
    const double e2 = finite_difference_check(
        [&](const Tensor& p) {
          auto [ls, lo] = regression_losses(wm, hm, p, dym, t);
          return total_loss(Tensor::scalar(0.0), ls, lo);
        },
        dxm);
    return std::max(e1, e2);
  }});

  cases.push_back({"encode_expression", [](Rng& rng) {
    TextEncoderParams p;
    Rng init(rng.next_u64());
    p.init(init, 8, 6, 5, 4, 6);
    TokenSequence toks;
    const int len = 1 + rng.uniform_int(4);
    for (int i = 0; i < len; ++i) toks.ids.push_back(rng.uniform_int(8));
    Tensor w = rand_tensor({6}, rng);
    return finite_difference_check(
        [&](const Tensor& emb) {
          TextEncoderParams q = p;
          q.embedding = emb;
          return probe(encode_expression(toks, q), w);
        },
        p.embedding);
  }});

  double worst = 0.0;
  const char* worst_name = "";
  bool all_ok = true;
  for (const GradCase& c : cases) {
    Rng rng(std::hash<std::string>{}(c.name) & 0xffffff);
    double case_worst = 0.0;
    for (int i = 0; i < 100; ++i) case_worst = std::max(case_worst, c.run(rng));
    if (case_worst > worst) {
      worst = case_worst;
      worst_name = c.name;
    }
    if (case_worst >= 1e-4) {
      all_ok = false;
      std::printf("  gradient check failed for %s: max rel err %.3e\n", c.name, case_worst);
    }
  }

  // full-pipeline gradient w.r.t. sampled parameters
  {
    TrainConfig cfg;
    cfg.channels = 4;
    cfg.backbone_width = 4;
    cfg.embed_dim = 8;
    cfg.proj_dim = 8;
    cfg.hidden_dim = 8;
    cfg.feature_dim = 8;
    GeneratorConfig gcfg;
    gcfg.image_size = 32;
    Sample s = generate_sample(3, gcfg);
    Vocabulary vocab = build_vocabulary(std::vector<std::string>{s.expression});
    Rng init(11);
    RccfModel model;
    model.init(cfg, vocab.size(), init);
    const TokenSequence toks = tokenize(s.expression, vocab);
    const TargetBundle tb = make_targets(s.target, cfg.stride, 8, 8);
    auto pipeline_loss = [&](const Tensor&) {
      ModelOutputs mo = model.forward(s.image, toks);
      Tensor lc = focal_loss(mo.heatmap, tb.heatmap);
      auto [ls, lo] = regression_losses(mo.w_map, mo.h_map, mo.dx_map, mo.dy_map, tb);
      return total_loss(lc, ls, lo);
    };
    double pipeline_worst = 0.0;
    for (Tensor param : {model.kernel_gen.map_w[0], model.image.proj_w[0], model.size_head.c2_w,
                         model.text.out_w}) {
      pipeline_worst =
          std::max(pipeline_worst, finite_difference_check(pipeline_loss, param));
    }
    if (pipeline_worst >= 1e-4) {
      all_ok = false;
      std::printf("  full-pipeline gradient check failed: max rel err %.3e\n", pipeline_worst);
    }
    worst = std::max(worst, pipeline_worst);
  }

  const double elapsed = seconds_since(t0);
  const bool in_time = elapsed < 120.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%zu op families x 100 cases + full pipeline, worst rel err %.3e (%s), %.1fs",
                cases.size(), worst, worst_name, elapsed);
  report(all_ok && in_time, "gradient-suite", detail);
}

// ---------------------------------------------------------------------------
// criterion 2: correlation oracle
// ---------------------------------------------------------------------------

void criterion_correlation_oracle() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 1 + rng.uniform_int(12);
    const int h = 2 + rng.uniform_int(15), w = 2 + rng.uniform_int(15);
    Tensor k = rand_tensor({c, 1, 1}, rng, -2.0, 2.0);
    Tensor level = rand_tensor({c, h, w}, rng, -2.0, 2.0);
    Tensor out = correlate(k, level);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double dot = 0.0;
        for (int ch = 0; ch < c; ++ch) dot += k.v(ch) * level.at(ch, y, x);
        worst = std::max(worst, std::fabs(out.at(y, x) - dot));
      }
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "200 random (kernel, feature) pairs, worst |diff| %.3e",
                worst);
  report(worst < 1e-12, "correlation-oracle", detail);
}

// ---------------------------------------------------------------------------
// criterion 3: encode/decode round trip
// ---------------------------------------------------------------------------

void criterion_round_trip() {
  Rng rng(303);
  const int stride = 4, map = 16, img = 64;
  double worst_exact = 0.0;
  double worst_zero_offset_cells = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double w = rng.uniform(2.0, 30.0), h = rng.uniform(2.0, 30.0);
    GroundTruthBox gt{rng.uniform(w / 2 + 0.1, img - w / 2 - 0.1),
                      rng.uniform(h / 2 + 0.1, img - h / 2 - 0.1), w, h};
    TargetBundle t = make_targets(gt, stride, map, map);
    Tensor wm = Tensor::full({map, map}, t.size_w);
    Tensor hm = Tensor::full({map, map}, t.size_h);
    Tensor dxm = Tensor::full({map, map}, t.off_x);
    Tensor dym = Tensor::full({map, map}, t.off_y);

    Prediction p = decode_box(t.heatmap, wm, hm, dxm, dym, stride, img, img);
    const Box truth = gt.to_box();
    worst_exact =
        std::max({worst_exact, std::fabs(p.box.x1 - truth.x1), std::fabs(p.box.y1 - truth.y1),
                  std::fabs(p.box.x2 - truth.x2), std::fabs(p.box.y2 - truth.y2)});

    Tensor zero({map, map});
    Prediction q = decode_box(t.heatmap, wm, hm, zero, zero, stride, img, img);
    worst_zero_offset_cells =
        std::max({worst_zero_offset_cells, std::fabs(q.box.center_x() - gt.cx) / stride,
                  std::fabs(q.box.center_y() - gt.cy) / stride});
  }
  const bool exact_ok = worst_exact < 1e-9;
  // flooring leaves strictly less than one cell of center error; d/2 cells is
  // the stated (looser) acceptance bound
  const bool quant_ok = worst_zero_offset_cells < 1.0 && worst_zero_offset_cells <= stride / 2.0;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "1000 boxes: with offsets worst err %.2e px; offsets zeroed worst center err "
                "%.3f cells (< 1 cell, <= d/2 = %.1f)",
                worst_exact, worst_zero_offset_cells, stride / 2.0);
  report(exact_ok && quant_ok, "encode-decode-round-trip", detail);
}

// ---------------------------------------------------------------------------
// criterion 4: closed-form loss values
// ---------------------------------------------------------------------------

void criterion_loss_values() {
  Tensor one = Tensor::full({1, 1}, 1.0);
  Tensor half = Tensor::full({1, 1}, 0.5);
  const double pos = focal_loss(half, one).value();
  const double tail = focal_loss(half, half).value();
  const double total = total_loss(Tensor::scalar(1.0), Tensor::scalar(1.0), Tensor::scalar(1.0))
                           .value();
  const bool ok = std::fabs(pos - 0.1733) < 1e-4 && std::fabs(tail - 0.01083) < 1e-4 &&
                  total == 2.1;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "focal(C=1,p=.5)=%.6f (want 0.1733), focal(C=.5,p=.5)=%.6f (want 0.01083), "
                "total(1,1,1)=%.10g (want 2.1 exactly)",
                pos, tail, total);
  report(ok, "loss-closed-forms", detail);
}

// ---------------------------------------------------------------------------
// criteria 5+6: toy training gate and language dependence
// ---------------------------------------------------------------------------

struct GateArtifacts {
  TrainOutput out;
  Dataset ds;
  bool trained = false;
};

void criterion_toy_training(GateArtifacts& art, const fs::path& root) {
  GeneratorConfig gcfg;
  gcfg.templates_size = false;
  gcfg.templates_relation = false;  // attribute + location families

  std::vector<std::pair<Sample, std::string>> samples;
  std::uint64_t seed = 1;
  for (int i = 0; i < 800; ++i) samples.emplace_back(generate_sample(seed++, gcfg), "train");
  for (int i = 0; i < 200; ++i) samples.emplace_back(generate_sample(seed++, gcfg), "val");
  const fs::path ds_dir = root / "gate_dataset";
  write_dataset(ds_dir.string(), samples, gcfg, 1);
  art.ds = load_dataset(ds_dir.string());

  TrainConfig cfg;  // paper-shaped defaults
  const auto t0 = clock_type::now();
  art.out = train(cfg, art.ds, (root / "gate_run").string());
  const double train_seconds = seconds_since(t0);
  art.trained = true;

  const EvalResult val = evaluate(art.out.model, art.out.vocab, art.ds, "val");
  const EvalResult train_split = evaluate(art.out.model, art.out.vocab, art.ds, "train");

  const double loss_at_10 = art.out.loss_per_step.at(9);
  const double loss_final = art.out.loss_per_step.back();
  const bool loss_halved = loss_final <= 0.5 * loss_at_10;
  const bool prec_ok = val.precision >= 0.80;
  const bool time_ok = train_seconds <= 600.0;
  const bool overfit_sane = train_split.precision >= val.precision - 0.05;

  char detail[240];
  std::snprintf(detail, sizeof(detail),
                "800/200 attr+loc, 2000 steps in %.0fs (<=600): val prec@0.5=%.4f (>=0.80), "
                "train prec=%.4f, loss step10=%.3f -> final=%.3f (>=50%% drop: %s)",
                train_seconds, val.precision, train_split.precision, loss_at_10, loss_final,
                loss_halved ? "yes" : "no");
  report(prec_ok && time_ok && loss_halved && overfit_sane, "toy-training", detail);
}

void criterion_language_dependence(GateArtifacts& art) {
  if (!art.trained) {
    report(false, "language-dependence", "skipped: training failed");
    return;
  }
  GeneratorConfig gcfg;
  gcfg.templates_size = false;
  gcfg.templates_relation = false;

  int pairs = 0, distinct_peak = 0, distinct_box = 0;
  std::uint64_t seed = 50000;  // outside every training/val seed range
  while (pairs < 100 && seed < 51000) {
    auto pair = generate_contrast_pair(seed++, gcfg);
    if (!pair) continue;
    ++pairs;
    const Prediction a = predict(art.out.model, art.out.vocab, pair->image, pair->expression_a);
    const Prediction b = predict(art.out.model, art.out.vocab, pair->image, pair->expression_b);
    if (a.peak_x != b.peak_x || a.peak_y != b.peak_y) ++distinct_peak;
    if (std::fabs(a.box.x1 - b.box.x1) > 1e-9 || std::fabs(a.box.y1 - b.box.y1) > 1e-9 ||
        std::fabs(a.box.x2 - b.box.x2) > 1e-9 || std::fabs(a.box.y2 - b.box.y2) > 1e-9)
      ++distinct_box;
  }
  const double frac = pairs ? static_cast<double>(distinct_box) / pairs : 0.0;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "%d held-out two-expression scenes: %d distinct boxes (%.0f%%, >=90%%), "
                "%d distinct peak cells",
                pairs, distinct_box, 100.0 * frac, distinct_peak);
  report(pairs >= 50 && frac >= 0.90, "language-dependence", detail);
}

// ---------------------------------------------------------------------------
// criterion 7: ablation harness
// ---------------------------------------------------------------------------

void criterion_ablation(const fs::path& root) {
  GeneratorConfig gcfg;  // all template families
  std::vector<std::pair<Sample, std::string>> samples;
  std::uint64_t seed = 20000;
  for (int i = 0; i < 120; ++i) samples.emplace_back(generate_sample(seed++, gcfg), "train");
  for (int i = 0; i < 40; ++i) samples.emplace_back(generate_sample(seed++, gcfg), "val");
  const fs::path ds_dir = root / "ablation_dataset";
  write_dataset(ds_dir.string(), samples, gcfg, 20000);
  Dataset ds = load_dataset(ds_dir.string());

  TrainConfig base;
  base.steps = 100;
  base.batch_size = 8;
  base.eval_every = 0;
  base.save_every = 100;

  const AblationReport r1 = run_ablation(base, ds, (root / "ablation_a").string());
  const AblationReport r2 = run_ablation(base, ds, (root / "ablation_b").string());

  const bool deterministic = r1.table_text == r2.table_text;
  const bool complete = r1.rows.size() == 7;
  {
    std::ofstream tf(root / "ablation.txt", std::ios::trunc);
    tf << r1.table_text;
  }
  std::fputs(r1.table_text.c_str(), stdout);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "7 variants x %d steps, table emitted, two runs byte-identical: %s", base.steps,
                deterministic ? "yes" : "no");
  report(deterministic && complete, "ablation-harness", detail);
}

// ---------------------------------------------------------------------------
// criterion 8: determinism
// ---------------------------------------------------------------------------

void criterion_determinism(const fs::path& root) {
  GeneratorConfig gcfg;
  std::vector<std::pair<Sample, std::string>> samples;
  std::uint64_t seed = 30000;
  for (int i = 0; i < 120; ++i) samples.emplace_back(generate_sample(seed++, gcfg), "train");
  for (int i = 0; i < 40; ++i) samples.emplace_back(generate_sample(seed++, gcfg), "val");
  const fs::path ds_dir = root / "det_dataset";
  write_dataset(ds_dir.string(), samples, gcfg, 30000);
  Dataset ds = load_dataset(ds_dir.string());

  TrainConfig cfg;
  cfg.steps = 160;  // crosses both schedule drops
  cfg.batch_size = 8;
  cfg.eval_every = 80;
  cfg.save_every = 160;

  TrainOutput a = train(cfg, ds, (root / "det_a").string());
  TrainOutput b = train(cfg, ds, (root / "det_b").string());

  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  };
  const std::string ca = slurp(root / "det_a" / "checkpoint.rccf");
  const std::string cb = slurp(root / "det_b" / "checkpoint.rccf");

  const EvalResult ra = evaluate(a.model, a.vocab, ds, "val");
  const EvalResult rb = evaluate(b.model, b.vocab, ds, "val");
  const std::string sa = eval_summary({{"val", ra}}, cfg.steps);
  const std::string sb = eval_summary({{"val", rb}}, cfg.steps);

  const bool ckpt_same = !ca.empty() && ca == cb;
  const bool report_same = sa == sb;
  const bool logs_same = a.log_lines == b.log_lines;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "two identical runs: checkpoints byte-identical=%s, eval summaries "
                "byte-identical=%s, logs identical=%s",
                ckpt_same ? "yes" : "no", report_same ? "yes" : "no", logs_same ? "yes" : "no");
  report(ckpt_same && report_same && logs_same, "determinism", detail);
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "rccf_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  criterion_gradient_suite();
  criterion_correlation_oracle();
  criterion_round_trip();
  criterion_loss_values();

  GateArtifacts art;
  criterion_toy_training(art, root);
  criterion_language_dependence(art);
  criterion_ablation(root);
  criterion_determinism(root);

  std::printf("%s\n", g_failures == 0 ? "acceptance: all criteria passed"
                                      : "acceptance: FAILURES present");
  return g_failures == 0 ? 0 : 1;
}
