// kforge: command line front end for the simulation / reconstruction pipeline.
#include "kforge/config.hpp"
#include "kforge/error.hpp"
#include "kforge/pipeline.hpp"
#include "kforge/sim.hpp"
#include "kforge/toy_video.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace kforge;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> set;
  std::size_t jobs = 1;
  bool emit_figures = false;
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config, "pipeline.cfg (key = value lines)");
  cmd->add_option("--seed", c.seed, "master seed; falls back to the config, then KFORGE_SEED");
  cmd->add_option("--out", c.out, "output directory (overrides out_dir)");
  cmd->add_option("--set", c.set, "extra key=value overrides, applied last");
  cmd->add_option("--jobs", c.jobs, "worker threads over videos")->check(CLI::PositiveNumber);
  cmd->add_flag("--emit-figures", c.emit_figures, "write frame and y-t PNGs of every reconstruction");
}

PipelineConfig resolve(const Common &c) {
  PipelineConfig base;
  if (const char *env = std::getenv("KFORGE_SEED"); env && *env) set_config_value(base, "seed", env);
  PipelineConfig cfg = c.config.empty() ? base : load_pipeline_config(c.config, base);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  for (const auto &kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

RunOptions run_options(const Common &c) { return {c.jobs, c.emit_figures}; }

void print_reports(const std::vector<QualityReport> &reports) { write_quality_csv(std::cout, reports); }

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"kforge: simulated dynamic MR k-space from video, undersampling, reconstruction, metrics"};
  app.require_subcommand(1);

  Common c;
  std::string input, method = "cs", sampling = "cartesian";

  auto *sim = app.add_subcommand("simulate", "video frames -> fully sampled multi-coil k-space (.kfrg)");
  add_common(sim, c);
  sim->add_option("--input", input, "video directory (overrides video_dir)");

  auto *traj = app.add_subcommand("traj", "write the Cartesian mask and radial/spiral trajectories");
  add_common(traj, c);

  auto *rec = app.add_subcommand("recon", "undersample and reconstruct simulated k-space");
  add_common(rec, c);
  rec->add_option("--method", method, "zf or cs")->check(CLI::IsMember({"zf", "cs"}));
  rec->add_option("--sampling", sampling, "cartesian, radial or spiral")
      ->check(CLI::IsMember({"cartesian", "radial", "spiral"}));
  rec->add_option("--input", input, "k-space .kfrg file or directory (default <out>/kspace)");

  std::string pred_dir, truth_dir, eval_out;
  auto *eval = app.add_subcommand("evaluate", "metrics and Friedman/Nemenyi ranking of reconstructions");
  add_common(eval, c);
  eval->add_option("--sampling", sampling, "picks <out>/recon/<sampling> when --pred is not given")
      ->check(CLI::IsMember({"cartesian", "radial", "spiral"}));
  eval->add_option("--pred", pred_dir, "directory with one sub-directory of .kfrg images per method");
  eval->add_option("--truth", truth_dir, "directory of reference .kfrg images (default <pred>/truth)");
  eval->add_option("--eval-out", eval_out, "where metrics.csv and friedman.json go");

  std::vector<std::string> archs{"varnet", "unet3d", "fastdvdnet"};
  auto *exp = app.add_subcommand("export", "build training records and the split manifest");
  add_common(exp, c);
  exp->add_option("--arch", archs, "architectures to export")->check(CLI::IsMember({"varnet", "unet3d", "fastdvdnet"}));
  exp->add_option("--input", input, "k-space directory (default <out>/kspace)");

  auto *all = app.add_subcommand("all", "simulate, traj, recon (zf + cs, every sampling), evaluate, export");
  add_common(all, c);
  all->add_option("--input", input, "video directory (overrides video_dir)");

  std::size_t toy_count = 10, toy_frames = 50, toy_size = 64;
  std::uint64_t toy_seed = 0;
  std::string toy_out = "videos";
  auto *toy = app.add_subcommand("toy-videos", "write synthetic frame directories for desk-scale runs");
  toy->add_option("--count", toy_count, "number of videos")->check(CLI::PositiveNumber);
  toy->add_option("--frames", toy_frames, "frames per video")->check(CLI::PositiveNumber);
  toy->add_option("--size", toy_size, "frame height and width")->check(CLI::Range(2, 4096));
  toy->add_option("--seed", toy_seed, "seed");
  toy->add_option("--out", toy_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(ErrorKind::validation);
  }

  try {
    if (*toy) {
      for (std::size_t i = 0; i < toy_count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "toy%03zu", i);
        write_frame_directory(toy_video(toy_frames, toy_size, toy_size, derive_seed(toy_seed, name)),
                              fs::path(toy_out) / name);
      }
      std::cout << "wrote " << toy_count << " videos to " << toy_out << "\n";
      return 0;
    }

    PipelineConfig cfg = resolve(c);
    const RunOptions opts = run_options(c);
    if (*sim) {
      if (!input.empty()) cfg.video_dir = input;
      const auto paths = run_simulate(cfg, opts);
      std::cout << "simulated " << paths.size() << " videos into " << (cfg.out_dir / "kspace").string() << "\n";
    } else if (*traj) {
      run_traj(cfg);
      std::cout << "trajectories in " << (cfg.out_dir / "traj").string() << "\n";
    } else if (*rec) {
      std::optional<fs::path> in;
      if (!input.empty()) in = fs::path(input);
      print_reports(run_recon(cfg, parse_method(method), parse_sampling(sampling), opts, in));
    } else if (*eval) {
      const fs::path pred = pred_dir.empty() ? cfg.out_dir / "recon" / sampling : fs::path(pred_dir);
      const fs::path truth = truth_dir.empty() ? pred / "truth" : fs::path(truth_dir);
      const fs::path out = eval_out.empty() ? cfg.out_dir / "evaluation" / pred.filename() : fs::path(eval_out);
      const auto s = run_evaluate(pred, truth, cfg, out);
      print_reports(s.reports);
      if (s.friedman) {
        std::cout << "# ranked by " << s.ranked_metric << "; mean ranks:";
        for (std::size_t m = 0; m < s.methods.size(); ++m)
          std::cout << " " << s.methods[m] << "=" << s.friedman->mean_ranks[m];
        std::cout << "\n# friedman statistic " << s.friedman->statistic << ", p " << s.friedman->p_value << "\n";
      }
    } else if (*exp) {
      std::vector<Arch> as;
      for (const auto &a : archs) as.push_back(parse_arch(a));
      std::optional<fs::path> in;
      if (!input.empty()) in = fs::path(input);
      std::cout << "manifest " << run_export(cfg, as, opts, in).string() << "\n";
    } else if (*all) {
      if (!input.empty()) cfg.video_dir = input;
      run_all(cfg, opts);
      std::cout << "done: " << cfg.out_dir.string() << "\n";
    }
    return 0;
  } catch (const Error &e) {
    std::cerr << "kforge: " << e.what() << "\n";
    return int(e.kind());
  } catch (const fs::filesystem_error &e) {
    std::cerr << "kforge: " << e.what() << "\n";
    return int(ErrorKind::missing_input);
  } catch (const std::exception &e) {
    std::cerr << "kforge: " << e.what() << "\n";
    return int(ErrorKind::numerical);
  }
}
