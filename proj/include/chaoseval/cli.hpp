#ifndef CHAOSEVAL_CLI_HPP
#define CHAOSEVAL_CLI_HPP

// Command-line front end shared by the `chaoseval` binary and the tests.
//
// Config precedence: flags > environment > config file > defaults. The config
// file is named by --config or CHAOSEVAL_CONFIG. Environment overrides:
// CHAOSEVAL_IOU, CHAOSEVAL_MODE, CHAOSEVAL_RANGE, CHAOSEVAL_WORKERS,
// CHAOSEVAL_LENIENT, CHAOSEVAL_COARSE_STEP.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "chaoseval/data_model.hpp"
#include "chaoseval/error.hpp"
#include "chaoseval/fusion.hpp"
#include "chaoseval/io.hpp"
#include "chaoseval/json.hpp"
#include "chaoseval/metrics.hpp"
#include "chaoseval/pruning.hpp"
#include "chaoseval/sweep.hpp"
#include "chaoseval/synth.hpp"

namespace chaoseval::cli {

enum ExitCode : int { kOk = 0, kUsageError = 1, kDataError = 2, kRuntimeError = 3 };

using Environment = std::function<std::optional<std::string>(const std::string&)>;

inline Environment process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

inline std::size_t default_workers() {
  auto n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

struct Config {
  double iou_threshold = kDefaultIouThreshold;
  PruneMode mode = PruneMode::BoxLevel;
  CapacityRange range{50, 2200, 1};
  std::size_t workers = default_workers();
  bool lenient = false;
  bool gt_ignore_extra_columns = false;
  bool two_pass = false;
  std::size_t coarse_step = 50;

  void validate() const {
    validate_iou_threshold(iou_threshold);
    range.validate();
    if (workers == 0) throw UsageError("workers must be >= 1");
    if (coarse_step < range.step) throw UsageError("coarse_step must be >= the range step");
  }

  /// Effective settings recorded in output metadata. The worker count is
  /// left out: it never changes results, and outputs must be byte-identical
  /// across worker counts.
  json to_json() const {
    return {{"iou_threshold", iou_threshold},
            {"mode", std::string(to_string(mode))},
            {"range", range.to_string()},
            {"lenient", lenient},
            {"gt_ignore_extra_columns", gt_ignore_extra_columns},
            {"two_pass", two_pass},
            {"coarse_step", coarse_step}};
  }

  void apply(const json& j) {
    try {
      if (j.contains("iou_threshold")) iou_threshold = j.at("iou_threshold").get<double>();
      if (j.contains("mode")) mode = parse_prune_mode(j.at("mode").get<std::string>());
      if (j.contains("range")) range = CapacityRange::parse(j.at("range").get<std::string>());
      if (j.contains("workers")) workers = j.at("workers").get<std::size_t>();
      if (j.contains("lenient")) lenient = j.at("lenient").get<bool>();
      if (j.contains("gt_ignore_extra_columns")) gt_ignore_extra_columns = j.at("gt_ignore_extra_columns").get<bool>();
      if (j.contains("two_pass")) two_pass = j.at("two_pass").get<bool>();
      if (j.contains("coarse_step")) coarse_step = j.at("coarse_step").get<std::size_t>();
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad config file: ") + e.what());
    }
  }

  void apply(const Environment& env) {
    auto number = [](const std::string& name, const std::string& text) {
      try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
      } catch (const std::exception&) {
        throw UsageError(name + ": not a number: '" + text + "'");
      }
    };
    auto count = [&](const std::string& name, const std::string& text) {
      double v = number(name, text);
      if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw UsageError(name + ": expected a non-negative integer, got '" + text + "'");
      }
      return static_cast<std::size_t>(v);
    };
    if (auto v = env("CHAOSEVAL_IOU")) iou_threshold = number("CHAOSEVAL_IOU", *v);
    if (auto v = env("CHAOSEVAL_MODE")) mode = parse_prune_mode(*v);
    if (auto v = env("CHAOSEVAL_RANGE")) range = CapacityRange::parse(*v);
    if (auto v = env("CHAOSEVAL_WORKERS")) workers = count("CHAOSEVAL_WORKERS", *v);
    if (auto v = env("CHAOSEVAL_LENIENT")) lenient = *v == "1" || *v == "true";
    if (auto v = env("CHAOSEVAL_COARSE_STEP")) coarse_step = count("CHAOSEVAL_COARSE_STEP", *v);
  }
};

/// Lower-case hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed for " + path.string());
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

namespace detail {

struct Input {
  std::string role;
  std::string path;
};

inline json metadata(const std::string& command, const Config& cfg, const std::vector<Input>& inputs) {
  json in = json::array();
  for (const auto& i : inputs) in.push_back({{"role", i.role}, {"path", i.path}, {"sha256", sha256_file(i.path)}});
  return {{"tool", "chaoseval"}, {"version", std::string(kVersion)}, {"command", command}, {"config", cfg.to_json()},
          {"inputs", in}};
}

inline void write_json(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

inline LoadOptions load_options(const Config& cfg, std::vector<std::string>* warnings) {
  return LoadOptions{cfg.lenient, cfg.gt_ignore_extra_columns, warnings};
}

/// Flags shared by the subcommands. Unset optionals leave the environment
/// and config file in charge.
struct CommonFlags {
  std::string config_path;
  bool lenient = false;
  bool gt_ignore_extra = false;
  std::optional<double> iou;
  std::optional<std::string> mode;
  std::optional<std::string> range;
  std::optional<std::size_t> workers;
  bool two_pass = false;
  std::optional<std::size_t> coarse_step;
};

} // namespace detail

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, const Environment& env = process_environment(),
               std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"chaoseval: confidence pruning, frame-mAP evaluation and capacity sweeps", "chaoseval"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  detail::CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->set_version_flag("--version", std::string(kVersion));
    sub->add_option("--config", flags.config_path, "JSON config file (overrides CHAOSEVAL_CONFIG)");
    sub->add_flag("--lenient", flags.lenient, "clamp out-of-range coordinates with a warning");
  };
  auto add_gt = [&](CLI::App* sub) {
    sub->add_flag("--gt-ignore-extra", flags.gt_ignore_extra,
                                       "ignore ground-truth columns after action_id (e.g. a score)");
  };
  auto add_iou = [&](CLI::App* sub) { sub->add_option("--iou", flags.iou, "IoU match threshold"); };
  auto add_mode = [&](CLI::App* sub) { sub->add_option("--mode", flags.mode, "pruning unit: box|row"); };

  std::string dets_path, gt_path, out_path, curve_path, a_path, b_path, json_path, spec_path, preset, gt_out, dims;
  std::size_t capacity = 0;
  std::uint64_t seed = 0;

  auto* prune_cmd = app.add_subcommand("prune", "keep the top-capacity anchors of every frame");
  add_common(prune_cmd);
  prune_cmd->add_option("--detections", dets_path, "detections CSV")->required();
  prune_cmd->add_option("--capacity", capacity, "anchors kept per frame")->required();
  add_mode(prune_cmd);
  prune_cmd->add_option("--out", out_path, "pruned detections CSV (metadata in <out>.json)")->required();

  auto* eval_cmd = app.add_subcommand("eval", "frame-mAP of detections against ground truth");
  add_common(eval_cmd);
  add_gt(eval_cmd);
  eval_cmd->add_option("--detections", dets_path, "detections CSV")->required();
  eval_cmd->add_option("--gt", gt_path, "ground-truth CSV")->required();
  add_iou(eval_cmd);
  eval_cmd->add_option("--out", out_path, "report JSON")->default_str("report.json");

  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate every capacity in a range and pick the best");
  add_common(sweep_cmd);
  add_gt(sweep_cmd);
  sweep_cmd->add_option("--detections", dets_path, "detections CSV")->required();
  sweep_cmd->add_option("--gt", gt_path, "ground-truth CSV")->required();
  sweep_cmd->add_option("--range", flags.range, "lo:hi[:step]");
  add_mode(sweep_cmd);
  add_iou(sweep_cmd);
  sweep_cmd->add_option("--workers", flags.workers, "worker threads");
  auto* two_pass_opt = sweep_cmd->add_flag("--two-pass", flags.two_pass, "coarse pass, then step-size pass near its best");
  sweep_cmd->add_option("--coarse-step", flags.coarse_step, "stride of the coarse pass")->needs(two_pass_opt);
  sweep_cmd->add_option("--curve", curve_path, "curve CSV (capacity,map,ap_std)");
  sweep_cmd->add_option("--out", out_path, "sweep JSON")->default_str("sweep.json");

  auto* compare_cmd = app.add_subcommand("compare", "per-class AP differences between two reports");
  add_common(compare_cmd);
  compare_cmd->add_option("--a", a_path, "first report JSON")->required();
  compare_cmd->add_option("--b", b_path, "second report JSON")->required();
  compare_cmd->add_option("--out", out_path, "delta table CSV")->required();
  compare_cmd->add_option("--json", json_path, "delta table JSON with metadata");

  auto* gen_cmd = app.add_subcommand("gen-synth", "generate a synthetic detection/ground-truth pair");
  add_common(gen_cmd);
  auto* spec_opt = gen_cmd->add_option("--spec", spec_path, "scenario spec JSON");
  auto* preset_opt = gen_cmd->add_option("--preset", preset, "reference|noiseless|adversarial");
  spec_opt->excludes(preset_opt);
  auto* seed_opt = gen_cmd->add_option("--seed", seed, "seed for --preset");
  seed_opt->needs(preset_opt);
  gen_cmd->add_option("--out-dets", dets_path, "detections CSV")->required();
  gen_cmd->add_option("--out-gt", gt_out, "ground-truth CSV")->required();

  auto* fuse_cmd = app.add_subcommand("fuse-demo", "run the toy dual-stream fusion pipeline");
  add_common(fuse_cmd);
  fuse_cmd->add_option("--seed", seed, "seed for volumes and kernel");
  fuse_cmd->add_option("--dims", dims, "overrides, e.g. cv=4,cs=6,cf=2,h=4,w=4");
  fuse_cmd->add_option("--out", out_path, "output JSON")->default_str("fused.json");

  std::vector<std::string> storage(args.begin(), args.end());
  if (storage.empty()) storage.emplace_back("chaoseval");
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsageError;
    }
    if (eval_cmd->parsed() && out_path.empty()) out_path = "report.json";
    if (sweep_cmd->parsed() && out_path.empty()) out_path = "sweep.json";
    if (fuse_cmd->parsed() && out_path.empty()) out_path = "fused.json";

    Config cfg;
    std::string cfg_file = flags.config_path;
    if (cfg_file.empty()) cfg_file = env("CHAOSEVAL_CONFIG").value_or("");
    if (!cfg_file.empty()) {
      try {
        cfg.apply(json::parse(read_file(cfg_file)));
      } catch (const json::parse_error& e) {
        throw UsageError("config file " + cfg_file + " is not valid JSON: " + e.what());
      } catch (const DataError& e) {
        throw UsageError(std::string("config file: ") + e.what());
      }
    }
    cfg.apply(env);
    if (flags.lenient) cfg.lenient = true;
    if (flags.gt_ignore_extra) cfg.gt_ignore_extra_columns = true;
    if (flags.iou) cfg.iou_threshold = *flags.iou;
    if (flags.mode) cfg.mode = parse_prune_mode(*flags.mode);
    if (flags.range) cfg.range = CapacityRange::parse(*flags.range);
    if (flags.workers) cfg.workers = *flags.workers;
    if (flags.two_pass) cfg.two_pass = true;
    if (flags.coarse_step) cfg.coarse_step = *flags.coarse_step;
    cfg.validate();

    std::vector<std::string> warnings;
    auto flush_warnings = [&] {
      for (const auto& w : warnings) err << "warning: " << w << "\n";
      warnings.clear();
    };
    auto opts = detail::load_options(cfg, &warnings);

    if (prune_cmd->parsed()) {
      auto dets = load_detections(dets_path, opts);
      flush_warnings();
      auto pruned = prune(dets, capacity, cfg.mode);
      auto meta = detail::metadata("prune", cfg, {{"detections", dets_path}});
      write_file_atomic(out_path, to_csv(pruned));
      json side = {{"metadata", meta},
                   {"capacity", capacity},
                   {"mode", std::string(to_string(cfg.mode))},
                   {"input_rows", dets.size()},
                   {"output_rows", pruned.size()},
                   {"frames", dets.frames().size()}};
      detail::write_json(out_path + ".json", side);
      out << "kept " << pruned.size() << " of " << dets.size() << " rows\n";
    } else if (eval_cmd->parsed()) {
      auto dets = load_detections(dets_path, opts);
      auto gts = load_ground_truth(gt_path, opts);
      flush_warnings();
      auto report = mean_average_precision(dets, gts, cfg.iou_threshold);
      json j = {{"metadata", detail::metadata("eval", cfg, {{"detections", dets_path}, {"gt", gt_path}})}};
      j.update(to_json(report));
      detail::write_json(out_path, j);
      out << "map " << fixed6(report.map) << " over " << report.n_classes << " classes\n";
    } else if (sweep_cmd->parsed()) {
      auto dets = load_detections(dets_path, opts);
      auto gts = load_ground_truth(gt_path, opts);
      flush_warnings();
      auto result = cfg.two_pass
                        ? sweep_two_pass(dets, gts, cfg.range, cfg.coarse_step, cfg.mode, cfg.iou_threshold, cfg.workers)
                        : sweep(dets, gts, cfg.range, cfg.mode, cfg.iou_threshold, cfg.workers);
      json j = {{"metadata", detail::metadata("sweep", cfg, {{"detections", dets_path}, {"gt", gt_path}})}};
      j.update(to_json(result, cfg.range, cfg.mode, cfg.iou_threshold));
      detail::write_json(out_path, j);
      if (!curve_path.empty()) emit_curve(result, curve_path);
      out << "best capacity " << result.best_capacity << " map " << fixed6(result.best_map) << " ("
          << result.points.size() << " points)\n";
    } else if (compare_cmd->parsed()) {
      auto parse_report = [](const std::string& path) {
        try {
          return eval_report_from_json(json::parse(read_file(path)));
        } catch (const json::parse_error& e) {
          throw DataError(path + ": not valid JSON: " + e.what());
        }
      };
      auto rows = compare_runs(parse_report(a_path), parse_report(b_path));
      write_file_atomic(out_path, deltas_csv(rows));
      if (!json_path.empty()) {
        detail::write_json(json_path, {{"metadata", detail::metadata("compare", cfg, {{"a", a_path}, {"b", b_path}})},
                                       {"deltas", to_json(rows)}});
      }
      out << rows.size() << " shared classes\n";
    } else if (gen_cmd->parsed()) {
      ScenarioSpec spec;
      if (!spec_path.empty()) {
        try {
          spec = scenario_from_json(json::parse(read_file(spec_path)));
        } catch (const json::parse_error& e) {
          throw UsageError(spec_path + ": not valid JSON: " + e.what());
        }
      } else if (!preset.empty()) {
        json p = {{"preset", preset}};
        if (seed_opt->count() > 0) p["seed"] = seed;
        spec = scenario_from_json(p);
      } else {
        throw UsageError("gen-synth needs --spec or --preset");
      }
      auto data = generate(spec);
      write_file_atomic(dets_path, to_csv(data.detections));
      write_file_atomic(gt_out, to_csv(data.ground_truth));
      out << data.detections.size() << " detections, " << data.ground_truth.size() << " ground-truth rows\n";
    } else if (fuse_cmd->parsed()) {
      auto toy = dims.empty() ? ToyDims{} : ToyDims::parse(dims);
      auto demo = run_fusion_demo(seed, toy);
      json j = {{"metadata", detail::metadata("fuse-demo", cfg, {})}, {"seed", seed}};
      j.update(to_json(demo));
      detail::write_json(out_path, j);
      out << "fused " << demo.fused.channels() << "x" << demo.fused.height() << "x" << demo.fused.width() << "\n";
    }
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n(run with --help for usage)\n";
    return kUsageError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

} // namespace chaoseval::cli

#endif // CHAOSEVAL_CLI_HPP
