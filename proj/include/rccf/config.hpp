#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rccf {

/// Flat key=value training configuration. Every key has a default and the
/// full set is echoed into run outputs so experiments are reproducible from
/// their artifacts alone.
struct TrainConfig {
  std::uint64_t seed = 1;
  int steps = 2000;
  int batch_size = 16;
  double lr = 5e-4;
  double lr_decay = 0.1;
  double decay_frac1 = 0.75;   // first x0.1 drop, as a fraction of total steps
  double decay_frac2 = 0.875;  // second drop
  double lambda_size = 0.1;
  double lambda_off = 1.0;
  int stride = 4;
  int channels = 16;
  int backbone_width = 12;
  int backbone_width_deep = 16;
  int embed_dim = 64;
  int proj_dim = 32;
  int hidden_dim = 32;
  int feature_dim = 32;
  std::string fusion = "average";         // average | max | concat
  int kernel_size = 1;                    // 1 | 3
  std::string kernel_mode = "per_level";  // per_level | single
  std::string levels = "multi";           // multi | single
  std::string regression = "visual";      // visual | language
  std::string text_encoder = "birnn";     // birnn | bow
  bool augment = true;
  double shift_frac = 0.1;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double min_overlap = 0.7;
  double sigma_min = 0.5;
  double clamp_eps = 1e-4;
  double focal_alpha = 2.0;
  double focal_beta = 4.0;
  bool size_in_pixels = false;
  int eval_every = 200;
  int save_every = 500;

  void set(const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    auto as_double = [&] { return std::stod(value); };
    auto as_bool = [&] {
      if (value == "1" || value == "true") return true;
      if (value == "0" || value == "false") return false;
      throw std::invalid_argument("config: boolean key '" + key + "' got '" + value + "'");
    };
    if (key == "seed") seed = as_u64();
    else if (key == "steps") steps = as_int();
    else if (key == "batch_size") batch_size = as_int();
    else if (key == "lr") lr = as_double();
    else if (key == "lr_decay") lr_decay = as_double();
    else if (key == "decay_frac1") decay_frac1 = as_double();
    else if (key == "decay_frac2") decay_frac2 = as_double();
    else if (key == "lambda_size") lambda_size = as_double();
    else if (key == "lambda_off") lambda_off = as_double();
    else if (key == "stride") stride = as_int();
    else if (key == "channels") channels = as_int();
    else if (key == "backbone_width") backbone_width = as_int();
    else if (key == "backbone_width_deep") backbone_width_deep = as_int();
    else if (key == "embed_dim") embed_dim = as_int();
    else if (key == "proj_dim") proj_dim = as_int();
    else if (key == "hidden_dim") hidden_dim = as_int();
    else if (key == "feature_dim") feature_dim = as_int();
    else if (key == "fusion") fusion = value;
    else if (key == "kernel_size") kernel_size = as_int();
    else if (key == "kernel_mode") kernel_mode = value;
    else if (key == "levels") levels = value;
    else if (key == "regression") regression = value;
    else if (key == "text_encoder") text_encoder = value;
    else if (key == "augment") augment = as_bool();
    else if (key == "shift_frac") shift_frac = as_double();
    else if (key == "scale_min") scale_min = as_double();
    else if (key == "scale_max") scale_max = as_double();
    else if (key == "min_overlap") min_overlap = as_double();
    else if (key == "sigma_min") sigma_min = as_double();
    else if (key == "clamp_eps") clamp_eps = as_double();
    else if (key == "focal_alpha") focal_alpha = as_double();
    else if (key == "focal_beta") focal_beta = as_double();
    else if (key == "size_in_pixels") size_in_pixels = as_bool();
    else if (key == "eval_every") eval_every = as_int();
    else if (key == "save_every") save_every = as_int();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  void validate() const {
    if (steps < 1 || batch_size < 1 || lr <= 0 || stride < 1 || channels < 1 ||
        backbone_width < 1 || backbone_width_deep < 1 || embed_dim < 1 || proj_dim < 1 || hidden_dim < 1 || feature_dim < 1)
      throw std::invalid_argument("config: sizes and rates must be positive");
    if (fusion != "average" && fusion != "max" && fusion != "concat")
      throw std::invalid_argument("config: fusion must be average|max|concat");
    if (kernel_size != 1 && kernel_size != 3)
      throw std::invalid_argument("config: kernel_size must be 1 or 3");
    if (kernel_mode != "per_level" && kernel_mode != "single")
      throw std::invalid_argument("config: kernel_mode must be per_level|single");
    if (levels != "multi" && levels != "single")
      throw std::invalid_argument("config: levels must be multi|single");
    if (regression != "visual" && regression != "language")
      throw std::invalid_argument("config: regression must be visual|language");
    if (text_encoder != "birnn" && text_encoder != "bow")
      throw std::invalid_argument("config: text_encoder must be birnn|bow");
    if (text_encoder == "bow" && proj_dim != feature_dim)
      throw std::invalid_argument("config: bow text encoder needs proj_dim == feature_dim");
    if (!(decay_frac1 > 0 && decay_frac1 < decay_frac2 && decay_frac2 < 1.0))
      throw std::invalid_argument("config: decay fractions must satisfy 0 < f1 < f2 < 1");
    if (scale_min > scale_max || scale_min <= 0)
      throw std::invalid_argument("config: bad augmentation scale range");
  }

  std::string echo() const {
    std::ostringstream os;
    os << "seed=" << seed << "\nsteps=" << steps << "\nbatch_size=" << batch_size << "\nlr=" << lr
       << "\nlr_decay=" << lr_decay << "\ndecay_frac1=" << decay_frac1
       << "\ndecay_frac2=" << decay_frac2 << "\nlambda_size=" << lambda_size
       << "\nlambda_off=" << lambda_off << "\nstride=" << stride << "\nchannels=" << channels
       << "\nbackbone_width=" << backbone_width
       << "\nbackbone_width_deep=" << backbone_width_deep << "\nembed_dim=" << embed_dim
       << "\nproj_dim=" << proj_dim << "\nhidden_dim=" << hidden_dim
       << "\nfeature_dim=" << feature_dim << "\nfusion=" << fusion
       << "\nkernel_size=" << kernel_size << "\nkernel_mode=" << kernel_mode
       << "\nlevels=" << levels << "\nregression=" << regression
       << "\ntext_encoder=" << text_encoder << "\naugment=" << (augment ? 1 : 0)
       << "\nshift_frac=" << shift_frac << "\nscale_min=" << scale_min
       << "\nscale_max=" << scale_max << "\nmin_overlap=" << min_overlap
       << "\nsigma_min=" << sigma_min << "\nclamp_eps=" << clamp_eps
       << "\nfocal_alpha=" << focal_alpha << "\nfocal_beta=" << focal_beta
       << "\nsize_in_pixels=" << (size_in_pixels ? 1 : 0) << "\neval_every=" << eval_every
       << "\nsave_every=" << save_every << "\n";
    return os.str();
  }

  static TrainConfig from_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
        line.pop_back();
      std::size_t start = line.find_first_not_of(" \t");
      if (start == std::string::npos) continue;
      const auto eq = line.find('=', start);
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
      cfg.set(line.substr(start, eq - start), line.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }

  static TrainConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_text(text);
  }

  /// Piecewise-constant schedule with two multiplicative drops.
  double lr_at_step(int step) const {
    double v = lr;
    if (step >= static_cast<int>(decay_frac1 * steps)) v *= lr_decay;
    if (step >= static_cast<int>(decay_frac2 * steps)) v *= lr_decay;
    return v;
  }
};

}  // namespace rccf
