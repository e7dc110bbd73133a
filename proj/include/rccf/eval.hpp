#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rccf/data.hpp"
#include "rccf/decode.hpp"
#include "rccf/geometry.hpp"
#include "rccf/model.hpp"
#include "rccf/vocab.hpp"

namespace rccf {

struct EvalResult {
  int count = 0;
  double precision = 0.0;  // Prec@0.5
  double mean_iou = 0.0;
  double median_ms = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double ms_between(std::chrono::steady_clock::time_point a,
                         std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace detail

inline Prediction predict(const RccfModel& model, const Vocabulary& vocab, const Tensor& img,
                          const std::string& expression) {
  const TokenSequence toks = tokenize(expression, vocab);
  ModelOutputs out = model.forward(img, toks);
  return decode_box(out.heatmap, out.w_map, out.h_map, out.dx_map, out.dy_map, model.cfg.stride,
                    img.dim(2), img.dim(1), model.cfg.size_in_pixels);
}

inline EvalResult evaluate(const RccfModel& model, const Vocabulary& vocab, const Dataset& ds,
                           const std::string& split) {
  const std::vector<int> idx = ds.split_indices(split);
  if (idx.empty()) throw std::invalid_argument("evaluate: empty split '" + split + "'");
  std::vector<std::pair<Box, Box>> pairs;
  std::vector<double> times;
  double iou_sum = 0.0;
  for (int i : idx) {
    Tensor img = ds.image(i);
    const auto t0 = std::chrono::steady_clock::now();
    Prediction p = predict(model, vocab, img, ds.records[i].expression);
    times.push_back(detail::ms_between(t0, std::chrono::steady_clock::now()));
    pairs.emplace_back(p.box, ds.records[i].box);
    iou_sum += iou(p.box, ds.records[i].box);
  }
  EvalResult r;
  r.count = static_cast<int>(idx.size());
  r.precision = precision_at_iou(pairs, 0.5);
  r.mean_iou = iou_sum / r.count;
  r.median_ms = detail::median(times);
  return r;
}

// ---------------------------------------------------------------------------
// per-stage timing
// ---------------------------------------------------------------------------

struct StageProfile {
  double text_ms = 0, image_ms = 0, correlate_ms = 0, regress_ms = 0, decode_ms = 0;
  double end_to_end_ms = 0;
  double stage_sum() const { return text_ms + image_ms + correlate_ms + regress_ms + decode_ms; }
};

/// Medians of per-stage wall times over `repeats` passes. Stages are timed
/// back to back inside one pass, so their sum tracks the end-to-end time.
inline StageProfile timing_profile(const RccfModel& model, const Vocabulary& vocab,
                                   const Tensor& img, const std::string& expression, int repeats) {
  if (repeats < 1) throw std::invalid_argument("timing_profile: repeats must be >= 1");
  using clock = std::chrono::steady_clock;
  std::vector<double> text_t, image_t, corr_t, reg_t, dec_t, total_t;
  const TokenSequence toks = tokenize(expression, vocab);
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    Tensor lq = model.encode_text(toks);
    const auto t1 = clock::now();
    FeaturePyramid pyr = model.encode_img(img);
    const auto t2 = clock::now();
    auto [heat, maps] = model.correlate_fuse(lq, pyr);
    const auto t3 = clock::now();
    auto reg = model.regress(pyr, maps);
    const auto t4 = clock::now();
    (void)decode_box(heat, reg[0], reg[1], reg[2], reg[3], model.cfg.stride, img.dim(2),
                     img.dim(1), model.cfg.size_in_pixels);
    const auto t5 = clock::now();
    text_t.push_back(detail::ms_between(t0, t1));
    image_t.push_back(detail::ms_between(t1, t2));
    corr_t.push_back(detail::ms_between(t2, t3));
    reg_t.push_back(detail::ms_between(t3, t4));
    dec_t.push_back(detail::ms_between(t4, t5));
    total_t.push_back(detail::ms_between(t0, t5));
  }
  StageProfile p;
  p.text_ms = detail::median(text_t);
  p.image_ms = detail::median(image_t);
  p.correlate_ms = detail::median(corr_t);
  p.regress_ms = detail::median(reg_t);
  p.decode_ms = detail::median(dec_t);
  p.end_to_end_ms = detail::median(total_t);
  return p;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

/// Human-readable table; includes wall-clock latency, so not byte-stable.
inline std::string eval_report_table(const std::vector<std::pair<std::string, EvalResult>>& rows) {
  std::ostringstream os;
  os << "split\tcount\tprec@0.5\tmean_iou\tmedian_ms\n";
  for (const auto& [split, r] : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s\t%d\t%.4f\t%.4f\t%.3f\n", split.c_str(), r.count,
                  r.precision, r.mean_iou, r.median_ms);
    os << buf;
  }
  return os.str();
}

/// Machine-readable summary; deliberately excludes timing so that identical
/// checkpoints and splits produce byte-identical files.
inline std::string eval_summary(const std::vector<std::pair<std::string, EvalResult>>& rows,
                                std::uint64_t checkpoint_step) {
  std::ostringstream os;
  os << "checkpoint_step=" << checkpoint_step << "\n";
  for (const auto& [split, r] : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "split=%s count=%d prec_at_0.5=%.6f mean_iou=%.6f\n",
                  split.c_str(), r.count, r.precision, r.mean_iou);
    os << buf;
  }
  return os.str();
}

}  // namespace rccf
