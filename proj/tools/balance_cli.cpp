// balance: command-line front end for the sampling, pyramid, loss and
// re-weighting library. Exit codes: 0 success, 2 input/config error,
// 3 numerical failure (divergence, failed gradient check).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "balance/balance.hpp"
#include "balance/io.hpp"

namespace {

using namespace balance;
using io::Table;

constexpr int kInputError = 2;
constexpr int kNumericalFailure = 3;

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::string format = "csv";
};

void emit(const Globals& g, const std::string& content) {
  if (g.out.empty()) {
    std::cout << content;
  } else {
    io::write_file_atomic(g.out, content);
  }
}

void emit_table(const Globals& g, const Table& t) { emit(g, g.format == "json" ? io::to_json(t) : io::to_csv(t)); }

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("bad JSON in " + path + ": " + e.what());
  }
}

/// Rejects keys outside `allowed` so typos in configs fail loudly.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw InvalidArgument(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw InvalidArgument(what + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

// ---------------------------------------------------------------- sample-hist

struct SampleHistArgs {
  std::string pool_file;
  std::string spec = "skewed";
  std::size_t pool_size = 10000;
  std::size_t num_gt = 8;
  std::string sampler = "random";
  std::size_t num_samples = 512;
  std::size_t num_bins = 3;
  std::size_t trials = 1000;
  std::size_t hist_bins = 10;
  double iou_floor = 0.0;
  double iou_ceiling = 0.5;
};

void cmd_sample_hist(const Globals& g, const SampleHistArgs& a) {
  RngState rng(g.seed);
  std::vector<Candidate> pool;
  if (!a.pool_file.empty()) {
    pool = io::read_candidates_file(a.pool_file);
  } else {
    PoolSpec spec;
    spec.profile = parse_iou_profile(a.spec);
    spec.num_candidates = a.pool_size;
    spec.num_gt = a.num_gt;
    pool = make_candidate_pool(spec, rng);
  }
  const auto negatives = negatives_of(pool);
  if (negatives.empty()) throw InvalidArgument("candidate pool contains no negatives");
  if (a.trials == 0 || a.hist_bins == 0) throw InvalidArgument("trials and bins must be positive");
  if (a.sampler != "random" && a.sampler != "iou-balanced") {
    throw InvalidArgument("unknown sampler '" + a.sampler + "' (random | iou-balanced)");
  }
  IoUSamplerConfig cfg{a.num_samples, a.num_bins, a.iou_floor, a.iou_ceiling};
  cfg.validate();
  IoUSamplerConfig hist{1, a.hist_bins, a.iou_floor, a.iou_ceiling};

  std::map<std::int64_t, double> iou_of;
  for (const auto& c : negatives) iou_of[c.id] = c.iou;
  std::vector<std::int64_t> counts(a.hist_bins, 0);
  std::int64_t outside = 0;
  std::int64_t total = 0;
  for (std::size_t t = 0; t < a.trials; ++t) {
    const SampleDraw d = a.sampler == "random" ? random_sample(negatives, a.num_samples, rng)
                                               : iou_balanced_sample(negatives, cfg, rng);
    for (auto id : d.selected_ids) {
      if (auto k = hist.bin_of(iou_of.at(id))) {
        ++counts[*k];
      } else {
        ++outside;
      }
      ++total;
    }
  }
  Table out{{"bin", "iou_low", "iou_high", "count", "share"}, {}};
  const double width = (a.iou_ceiling - a.iou_floor) / static_cast<double>(a.hist_bins);
  for (std::size_t k = 0; k < a.hist_bins; ++k) {
    const double lo = a.iou_floor + width * static_cast<double>(k);
    const double hi = k + 1 == a.hist_bins ? a.iou_ceiling : a.iou_floor + width * static_cast<double>(k + 1);
    out.add({static_cast<std::int64_t>(k), lo, hi, counts[k],
             static_cast<double>(counts[k]) / static_cast<double>(total)});
  }
  if (outside > 0) {
    out.add({std::int64_t{-1}, std::string("outside"), std::string("outside"), outside,
             static_cast<double>(outside) / static_cast<double>(total)});
  }
  emit_table(g, out);
}

// ----------------------------------------------------------------- loss-curve

struct LossCurveArgs {
  double alpha = 0.5;
  double gamma = 1.5;
  double x_min = 0.0;
  double x_max = 3.0;
  double step = 0.01;
};

Table loss_curve_table(const LossCurveArgs& a) {
  if (!(a.step > 0.0) || !(a.x_max >= a.x_min)) throw InvalidArgument("loss-curve: need step > 0 and x-max >= x-min");
  const auto p = derive_balanced_params(a.alpha, a.gamma);
  const double span = a.x_max - a.x_min;
  const auto n = static_cast<std::int64_t>(std::llround(span / a.step));
  if (n > 10'000'000) throw InvalidArgument("loss-curve: grid too large");
  Table t{{"x", "smooth_l1_loss", "smooth_l1_grad", "balanced_l1_loss", "balanced_l1_grad", "rho"}, {}};
  for (std::int64_t i = 0; i <= n; ++i) {
    // x_i = x_min + span * i / n keeps grid points such as 0.5 and 1 exact.
    const double x = n == 0 ? a.x_min : a.x_min + (span * static_cast<double>(i)) / static_cast<double>(n);
    const auto s = smooth_l1(x);
    const auto b = balanced_l1(x, p);
    t.add({x, s.loss, s.grad, b.loss, b.grad, lgr_ratio(x, p)});
  }
  return t;
}

// ---------------------------------------------------------------- bcr-weights

struct BcrArgs {
  std::string input;
  std::size_t buckets = 10;
  double turning_point = 0.5;
  double temperature = 0.025;
};

void cmd_bcr_weights(const Globals& g, const BcrArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw InvalidArgument("cannot open " + a.input);
  std::map<std::int64_t, std::uint64_t> by_id;
  for (const auto& f : io::read_csv(in, {"class_id", "count"})) {
    const auto id = io::parse_number<std::int64_t>(f[0], "class_id");
    const auto count = io::parse_number<std::int64_t>(f[1], "count");
    if (id <= 0) throw InvalidArgument("class ids must be positive (background is excluded), got " + f[0]);
    if (count <= 0) throw InvalidArgument("class " + f[0] + " has zero count");
    if (!by_id.emplace(id, static_cast<std::uint64_t>(count)).second) {
      throw InvalidArgument("duplicate class id " + f[0]);
    }
  }
  if (by_id.empty()) throw InvalidArgument("frequency table is empty");
  ClassFrequencyTable freqs;
  std::vector<std::int64_t> ids;
  for (const auto& [id, count] : by_id) {
    ids.push_back(id);
    freqs.counts.push_back(count);
  }
  const auto table = compute_weights(freqs, {a.buckets, a.turning_point, a.temperature});
  Table out{{"class_id", "count", "log_freq", "bucket", "x", "weight"}, {}};
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& e = table.entries()[k];
    out.add({ids[k], static_cast<std::int64_t>(e.frequency), e.log_frequency, static_cast<std::int64_t>(e.bucket),
             e.position, e.weight});
  }
  emit_table(g, out);
}

// ------------------------------------------------------------------ gradcheck

struct GradcheckArgs {
  std::string op;
  double alpha = 0.5;
  double gamma = 1.5;
  double ce_alpha = 0.8;
  double ce_gamma = 1.0;
  std::size_t points = 1000;
  std::size_t classes = 5;
};

void cmd_gradcheck(const Globals& g, const GradcheckArgs& a) {
  const auto sel = parse_loss_selector(a.op);
  GradCheckParams params{derive_balanced_params(a.alpha, a.gamma), derive_lgr_ce_params(a.ce_alpha, a.ce_gamma), {}};
  GradCheckSpec spec;
  spec.num_points = a.points;
  spec.num_classes = a.classes;
  spec.seed = g.seed;
  if (a.classes < 2) throw InvalidArgument("gradcheck: --classes must be at least 2");
  const auto rep = run_gradcheck(sel, params, spec);
  if (g.format == "csv") {
    Table t{{"op_name", "num_points", "max_rel_error", "worst_point", "threshold", "passed"}, {}};
    t.add({rep.op_name, static_cast<std::int64_t>(rep.num_points), rep.max_rel_error, rep.worst_point, rep.threshold,
           std::string(rep.passed ? "true" : "false")});
    emit(g, io::to_csv(t));
  } else {
    std::string js = "{\n  \"op_name\": " + nlohmann::json(rep.op_name).dump() +
                     ",\n  \"num_points\": " + std::to_string(rep.num_points) +
                     ",\n  \"max_rel_error\": " + io::format_double(rep.max_rel_error) +
                     ",\n  \"worst_point\": " + io::format_double(rep.worst_point) +
                     ",\n  \"threshold\": " + io::format_double(rep.threshold) +
                     ",\n  \"passed\": " + (rep.passed ? "true" : "false") + "\n}\n";
    emit(g, js);
  }
  if (!rep.passed) throw NumericalFailure("gradient check failed for " + rep.op_name);
}

// ------------------------------------------------------------------ train-toy

struct TrainToyArgs {
  std::string config;
  std::string loss;
};

void cmd_train_toy(const Globals& g, const TrainToyArgs& a) {
  ToyRegressionTask task;
  RegressionOptions opt;
  double alpha = 0.5, gamma = 1.5;
  std::string loss = "balanced_l1";
  task.seed = g.seed;
  if (!a.config.empty()) {
    const auto j = read_json_file(a.config);
    check_keys(j,
               {"num_samples", "inlier_noise_sigma", "outlier_fraction", "outlier_shift", "true_params", "seed", "loss",
                "steps", "learning_rate", "log_every", "alpha", "gamma"},
               "train-toy config");
    try {
      read_key(j, "num_samples", task.num_samples);
      read_key(j, "inlier_noise_sigma", task.inlier_noise_sigma);
      read_key(j, "outlier_fraction", task.outlier_fraction);
      read_key(j, "outlier_shift", task.outlier_shift);
      read_key(j, "true_params", task.true_params);
      if (!g.seed_given) read_key(j, "seed", task.seed);
      read_key(j, "loss", loss);
      read_key(j, "steps", opt.steps);
      read_key(j, "learning_rate", opt.learning_rate);
      read_key(j, "log_every", opt.log_every);
      read_key(j, "alpha", alpha);
      read_key(j, "gamma", gamma);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("train-toy config: ") + e.what());
    }
  }
  if (!a.loss.empty()) loss = a.loss;
  opt.loss = parse_regression_loss(loss);
  opt.balanced = derive_balanced_params(alpha, gamma);
  const auto log = run_toy_regression(task, opt);
  Table t{{"step", "loss", "inlier_grad_share", "outlier_grad_share"}, {}};
  for (const auto& s : log.steps) {
    t.add({static_cast<std::int64_t>(s.step), s.loss, s.inlier_grad_share, s.outlier_grad_share});
  }
  emit_table(g, t);
  std::cerr << "final_loss=" << io::format_double(log.final_loss)
            << " final_inlier_mse=" << io::format_double(log.final_inlier_mse)
            << " final_param_error=" << io::format_double(log.final_param_error) << "\n";
}

// ------------------------------------------------------------- train-longtail

struct TrainLongtailArgs {
  std::string config;
  bool no_bcr = false;
};

void cmd_train_longtail(const Globals& g, const TrainLongtailArgs& a) {
  LongTailTask task;
  task.seed = g.seed;
  if (!a.config.empty()) {
    const auto j = read_json_file(a.config);
    check_keys(j,
               {"class_counts", "separation", "noise_sigma", "heldout_per_class", "steps", "learning_rate", "seed",
                "buckets", "turning_point", "temperature"},
               "train-longtail config");
    try {
      read_key(j, "class_counts", task.class_counts);
      read_key(j, "separation", task.separation);
      read_key(j, "noise_sigma", task.noise_sigma);
      read_key(j, "heldout_per_class", task.heldout_per_class);
      read_key(j, "steps", task.steps);
      read_key(j, "learning_rate", task.learning_rate);
      if (!g.seed_given) read_key(j, "seed", task.seed);
      read_key(j, "buckets", task.bcr.num_buckets);
      read_key(j, "turning_point", task.bcr.turning_point);
      read_key(j, "temperature", task.bcr.temperature);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("train-longtail config: ") + e.what());
    }
  }
  const auto result = run_toy_longtail(task, !a.no_bcr);
  Table t{{"class_id", "accuracy"}, {}};
  for (const auto& c : result.per_class) t.add({std::int64_t{c.class_id}, c.accuracy});
  emit_table(g, t);
  std::cerr << "mean_accuracy=" << io::format_double(result.mean_accuracy) << "\n";
}

// ------------------------------------------------------------------- bfp-demo

struct BfpArgs {
  std::string pyramid;
  std::string params;
  std::optional<int> target_level;
  std::string interp = "nearest";
};

void cmd_bfp_demo(const Globals& g, const BfpArgs& a) {
  if (g.out.empty()) throw InvalidArgument("bfp-demo needs --out <directory>");
  const auto pyr = io::read_pyramid(a.pyramid);
  RngState rng(g.seed);
  const NonLocalParams params =
      a.params.empty() ? NonLocalParams::init(pyr.levels.front().channels(), rng) : io::read_nonlocal_params(a.params);
  if (a.interp != "nearest" && a.interp != "bilinear") {
    throw InvalidArgument("unknown interpolation '" + a.interp + "' (nearest | bilinear)");
  }
  const auto mode = a.interp == "nearest" ? Interpolation::nearest : Interpolation::bilinear;
  const auto out = balanced_feature_pyramid(pyr, params, a.target_level, mode);
  io::write_pyramid(g.out, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced detector-training toolkit: IoU-balanced sampling, balanced feature pyramid,\n"
               "balanced L1 / LGR losses and bucketed class re-weighting."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed (default 0)");
  app.add_option("--out", g.out, "Output file (directory for bfp-demo); stdout when omitted");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  SampleHistArgs sh;
  auto* sample_hist = app.add_subcommand("sample-hist", "IoU histogram of negatives drawn by a sampler");
  sample_hist->add_option("--pool", sh.pool_file, "Candidate CSV (id,iou,class_id,instance_id,is_positive)");
  sample_hist->add_option("--spec", sh.spec, "Synthetic pool profile when no --pool is given (uniform | skewed, alias figure3)");
  sample_hist->add_option("--pool-size", sh.pool_size, "Synthetic pool size");
  sample_hist->add_option("--num-gt", sh.num_gt, "Synthetic ground-truth boxes");
  sample_hist->add_option("--sampler", sh.sampler, "random | iou-balanced");
  sample_hist->add_option("--num-samples", sh.num_samples, "Negatives drawn per trial (N)");
  sample_hist->add_option("-K,--num-bins", sh.num_bins, "IoU-balanced sampler bins (K)");
  sample_hist->add_option("--trials", sh.trials, "Number of draws");
  sample_hist->add_option("--bins", sh.hist_bins, "Histogram bins over [iou-floor, iou-ceiling]");
  sample_hist->add_option("--iou-floor", sh.iou_floor, "Lower end of the binned IoU interval");
  sample_hist->add_option("--iou-ceiling", sh.iou_ceiling, "Upper end of the binned IoU interval");

  LossCurveArgs lc;
  auto* loss_curve = app.add_subcommand("loss-curve", "Smooth L1 vs balanced L1 loss/gradient curves as CSV");
  loss_curve->add_option("--alpha", lc.alpha, "Balanced L1 alpha");
  loss_curve->add_option("--gamma", lc.gamma, "Balanced L1 gamma");
  loss_curve->add_option("--x-min", lc.x_min, "Grid start");
  loss_curve->add_option("--x-max", lc.x_max, "Grid end");
  loss_curve->add_option("--step", lc.step, "Grid spacing");

  BcrArgs bcr;
  auto* bcr_weights = app.add_subcommand("bcr-weights", "Bucketed class re-weighting table from class counts");
  bcr_weights->add_option("--input", bcr.input, "CSV with header class_id,count")->required();
  bcr_weights->add_option("--buckets", bcr.buckets, "Number of buckets S");
  bcr_weights->add_option("--turning-point", bcr.turning_point, "Sigmoid turning point a");
  bcr_weights->add_option("--temperature", bcr.temperature, "Sigmoid temperature t");

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of analytic loss gradients");
  gradcheck
      ->add_option("--op", gc.op,
                   "smooth_l1 | balanced_l1 | lgr_smooth_l1 | localization | cross_entropy | lgr_cross_entropy | "
                   "weighted_ce")
      ->required();
  gradcheck->add_option("--alpha", gc.alpha, "Balanced L1 alpha");
  gradcheck->add_option("--gamma", gc.gamma, "Balanced L1 gamma");
  gradcheck->add_option("--ce-alpha", gc.ce_alpha, "LGR cross-entropy alpha");
  gradcheck->add_option("--ce-gamma", gc.ce_gamma, "LGR cross-entropy gamma");
  gradcheck->add_option("--points", gc.points, "Number of sample points");
  gradcheck->add_option("--classes", gc.classes, "Vector length for classification losses");

  TrainToyArgs tt;
  auto* train_toy = app.add_subcommand("train-toy", "Toy linear regression with outliers; per-step log CSV");
  train_toy->add_option("--config", tt.config, "JSON experiment config");
  train_toy->add_option("--loss", tt.loss, "smooth_l1 | balanced_l1 (overrides config)");

  TrainLongtailArgs tl;
  auto* train_longtail = app.add_subcommand("train-longtail", "Toy long-tail classification; per-class accuracy CSV");
  train_longtail->add_option("--config", tl.config, "JSON experiment config");
  train_longtail->add_flag("--no-bcr", tl.no_bcr, "Train with unit class weights");

  BfpArgs bfp;
  auto* bfp_demo = app.add_subcommand("bfp-demo", "Run the balanced feature pyramid on a pyramid directory");
  bfp_demo->add_option("--pyramid", bfp.pyramid, "Directory with manifest.json and level_<l>.blt")->required();
  bfp_demo->add_option("--params", bfp.params, "JSON with theta, phi, g matrices (default: seeded init, g = 0)");
  bfp_demo->add_option("--target-level", bfp.target_level, "Integration level (default: second coarsest)");
  bfp_demo->add_option("--interp", bfp.interp, "Upsampling mode: nearest | bilinear");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*sample_hist) cmd_sample_hist(g, sh);
    if (*loss_curve) emit_table(g, loss_curve_table(lc));
    if (*bcr_weights) cmd_bcr_weights(g, bcr);
    if (*gradcheck) cmd_gradcheck(g, gc);
    if (*train_toy) cmd_train_toy(g, tt);
    if (*train_longtail) cmd_train_longtail(g, tl);
    if (*bfp_demo) cmd_bfp_demo(g, bfp);
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const Diverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return 0;
}
