#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rccf/config.hpp"
#include "rccf/data.hpp"
#include "rccf/eval.hpp"
#include "rccf/trainer.hpp"

namespace rccf {

struct AblationRow {
  std::string name;
  double precision = 0;
  double mean_iou = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::string table_text;  // deterministic, no wall-clock content
};

/// The six configuration variants plus the baseline, trained with identical
/// seed and data. Directional expectations against the baseline are reported
/// alongside the numbers, not gated.
inline AblationReport run_ablation(const TrainConfig& base, const Dataset& ds,
                                   const std::string& out_root) {
  std::vector<std::pair<std::string, TrainConfig>> variants;
  auto with = [&base](auto mutate) {
    TrainConfig c = base;
    mutate(c);
    return c;
  };
  variants.emplace_back("maximum_fusion", with([](TrainConfig& c) { c.fusion = "max"; }));
  variants.emplace_back("concatenation", with([](TrainConfig& c) { c.fusion = "concat"; }));
  variants.emplace_back("3x3_filter", with([](TrainConfig& c) { c.kernel_size = 3; }));
  variants.emplace_back("single_language_filter",
                        with([](TrainConfig& c) { c.kernel_mode = "single"; }));
  variants.emplace_back("single_level_visual", with([](TrainConfig& c) { c.levels = "single"; }));
  variants.emplace_back("language_guided_regression",
                        with([](TrainConfig& c) { c.regression = "language"; }));
  variants.emplace_back("ours", base);

  AblationReport report;
  for (const auto& [name, cfg] : variants) {
    const std::string out_dir = (std::filesystem::path(out_root) / name).string();
    TrainOutput t = train(cfg, ds, out_dir);
    const EvalResult r = evaluate(t.model, t.vocab, ds, "val");
    report.rows.push_back({name, r.precision, r.mean_iou});
  }

  auto row_of = [&report](const std::string& name) {
    for (const AblationRow& r : report.rows)
      if (r.name == name) return r;
    return AblationRow{};
  };

  std::ostringstream os;
  os << "variant\tprec@0.5\tmean_iou\n";
  for (const AblationRow& r : report.rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\n", r.name.c_str(), r.precision, r.mean_iou);
    os << buf;
  }
  const AblationRow ours = row_of("ours");
  const AblationRow single_level = row_of("single_level_visual");
  const AblationRow lang_reg = row_of("language_guided_regression");
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "directional average_fusion>=single_level_visual: %s (%.4f vs %.4f) seed=%llu\n",
                ours.precision >= single_level.precision ? "yes" : "no", ours.precision,
                single_level.precision, static_cast<unsigned long long>(base.seed));
  os << buf;
  std::snprintf(buf, sizeof(buf),
                "directional visual_regression>=language_guided: %s (%.4f vs %.4f) seed=%llu\n",
                ours.precision >= lang_reg.precision ? "yes" : "no", ours.precision,
                lang_reg.precision, static_cast<unsigned long long>(base.seed));
  os << buf;
  report.table_text = os.str();
  return report;
}

}  // namespace rccf
