// Command-line surface for the correlation-filter grounding pipeline:
// dataset generation, training, evaluation, single-image inference,
// heatmap dumps and the ablation runner.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rccf/ablation.hpp"
#include "rccf/config.hpp"
#include "rccf/data.hpp"
#include "rccf/eval.hpp"
#include "rccf/trainer.hpp"

namespace fs = std::filesystem;
using namespace rccf;

namespace {

GeneratorConfig parse_templates(GeneratorConfig cfg, const std::string& spec) {
  if (spec.empty()) return cfg;
  cfg.templates_attribute = cfg.templates_size = cfg.templates_location =
      cfg.templates_relation = false;
  std::istringstream is(spec);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item == "attr") cfg.templates_attribute = true;
    else if (item == "size") cfg.templates_size = true;
    else if (item == "loc") cfg.templates_location = true;
    else if (item == "rel") cfg.templates_relation = true;
    else throw CLI::ValidationError("--templates", "unknown template family '" + item + "'");
  }
  return cfg;
}

int cmd_gen_data(std::uint64_t seed, int train_count, int val_count, int test_count,
                 const std::string& out_dir, const std::string& templates, int image_size,
                 int min_objects, int max_objects) {
  GeneratorConfig cfg;
  cfg.image_size = image_size;
  cfg.min_objects = min_objects;
  cfg.max_objects = max_objects;
  cfg = parse_templates(cfg, templates);

  std::vector<std::pair<Sample, std::string>> samples;
  std::uint64_t s = seed;
  for (int i = 0; i < train_count; ++i) samples.emplace_back(generate_sample(s++, cfg), "train");
  for (int i = 0; i < val_count; ++i) samples.emplace_back(generate_sample(s++, cfg), "val");
  for (int i = 0; i < test_count; ++i) samples.emplace_back(generate_sample(s++, cfg), "test");
  write_dataset(out_dir, samples, cfg, seed);
  std::printf("wrote %zu samples (%d train / %d val / %d test) to %s\n", samples.size(),
              train_count, val_count, test_count, out_dir.c_str());
  return 0;
}

TrainConfig load_train_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = TrainConfig::from_file(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& data_dir, const std::string& out_dir,
              const std::string& resume) {
  const TrainConfig cfg = load_train_config(config_path, overrides);
  const Dataset ds = load_dataset(data_dir);
  TrainOutput out = train(cfg, ds, out_dir, resume);
  std::printf("trained %d steps; checkpoint at %s\n", cfg.steps, out.checkpoint_path.c_str());
  if (out.last_eval_precision >= 0)
    std::printf("final val prec@0.5 = %.4f\n", out.last_eval_precision);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             const std::string& out_dir) {
  LoadedModel lm = model_from_checkpoint(checkpoint);
  const Dataset ds = load_dataset(data_dir);
  const EvalResult r = evaluate(lm.model, lm.vocab, ds, split);

  std::vector<std::pair<std::string, EvalResult>> rows{{split, r}};
  const std::string table = eval_report_table(rows);
  const std::string summary = eval_summary(rows, lm.step);
  std::fputs(table.c_str(), stdout);

  fs::create_directories(out_dir);
  std::ofstream rf(fs::path(out_dir) / "report.txt", std::ios::trunc);
  rf << table;
  std::ofstream sf(fs::path(out_dir) / "summary.txt", std::ios::trunc);
  sf << summary;
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& image_path,
              const std::string& expression) {
  LoadedModel lm = model_from_checkpoint(checkpoint);
  const Tensor img = read_ppm(image_path);
  const Prediction p = predict(lm.model, lm.vocab, img, expression);
  std::printf("%.4f %.4f %.4f %.4f %.6f\n", p.box.x1, p.box.y1, p.box.x2, p.box.y2, p.score);
  return 0;
}

int cmd_dump_heatmap(const std::string& checkpoint, const std::string& image_path,
                     const std::string& expression, const std::string& out_path) {
  LoadedModel lm = model_from_checkpoint(checkpoint);
  const Tensor img = read_ppm(image_path);
  const TokenSequence toks = tokenize(expression, lm.vocab);
  const ModelOutputs mo = lm.model.forward(img, toks);
  write_pgm(out_path, mo.heatmap);
  const Prediction p = decode_box(mo.heatmap, mo.w_map, mo.h_map, mo.dx_map, mo.dy_map,
                                  lm.model.cfg.stride, img.dim(2), img.dim(1),
                                  lm.model.cfg.size_in_pixels);
  std::ofstream side(out_path + ".box.txt", std::ios::trunc);
  if (!side) throw std::runtime_error("cannot write " + out_path + ".box.txt");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "box %.4f %.4f %.4f %.4f\nscore %.6f\npeak %d %d\n", p.box.x1,
                p.box.y1, p.box.x2, p.box.y2, p.score, p.peak_x, p.peak_y);
  side << buf;
  std::printf("heatmap written to %s, decoded box to %s.box.txt\n", out_path.c_str(),
              out_path.c_str());
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& data_dir, const std::string& out_dir) {
  const TrainConfig cfg = load_train_config(config_path, overrides);
  const Dataset ds = load_dataset(data_dir);
  const AblationReport report = run_ablation(cfg, ds, out_dir);
  std::fputs(report.table_text.c_str(), stdout);
  fs::create_directories(out_dir);
  std::ofstream tf(fs::path(out_dir) / "ablation.txt", std::ios::trunc);
  tf << report.table_text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modality correlation filtering for referring expressions"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic shapes dataset");
  std::uint64_t seed = 0;
  int train_count = 800, val_count = 200, test_count = 0;
  int image_size = 64, min_objects = 2, max_objects = 5;
  std::string out_dir, templates;
  gen->add_option("--seed", seed, "base seed");
  gen->add_option("--count", train_count, "train sample count")->check(CLI::PositiveNumber);
  gen->add_option("--val-count", val_count, "val sample count");
  gen->add_option("--test-count", test_count, "test sample count");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--templates", templates, "comma list of attr,size,loc,rel (default: all)");
  gen->add_option("--image-size", image_size, "square image size");
  gen->add_option("--min-objects", min_objects, "objects per scene, lower bound");
  gen->add_option("--max-objects", max_objects, "objects per scene, upper bound");

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string config_path, data_dir, train_out, resume;
  std::vector<std::string> overrides;
  tr->add_option("--config", config_path, "key=value config file");
  tr->add_option("--set", overrides, "config override key=value (repeatable)");
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--out", train_out, "output directory")->required();
  tr->add_option("--resume", resume, "checkpoint to resume from");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string ckpt, split = "val", eval_out = ".";
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--split", split, "split name (default val)");
  ev->add_option("--out", eval_out, "directory for report.txt and summary.txt");

  // infer
  auto* in = app.add_subcommand("infer", "decode one image + expression");
  std::string image_path, expression;
  in->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  in->add_option("--image", image_path, "P6 image file")->required();
  in->add_option("--expression", expression, "referring expression")->required();

  // dump-heatmap
  auto* dh = app.add_subcommand("dump-heatmap", "write the fused heatmap as an 8-bit image");
  std::string heat_out;
  dh->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  dh->add_option("--image", image_path, "P6 image file")->required();
  dh->add_option("--expression", expression, "referring expression")->required();
  dh->add_option("--out", heat_out, "output PGM path")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and compare the six configuration variants");
  ab->add_option("--config", config_path, "key=value config file");
  ab->add_option("--set", overrides, "config override key=value (repeatable)");
  ab->add_option("--data", data_dir, "dataset directory")->required();
  ab->add_option("--out", train_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems exit 1, help exits 0
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(seed, train_count, val_count, test_count, out_dir, templates,
                          image_size, min_objects, max_objects);
    if (tr->parsed()) return cmd_train(config_path, overrides, data_dir, train_out, resume);
    if (ev->parsed()) return cmd_eval(ckpt, data_dir, split, eval_out);
    if (in->parsed()) return cmd_infer(ckpt, image_path, expression);
    if (dh->parsed()) return cmd_dump_heatmap(ckpt, image_path, expression, heat_out);
    if (ab->parsed()) return cmd_ablate(config_path, overrides, data_dir, train_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
