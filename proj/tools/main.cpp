#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "topicshift/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (key = value lines)");
  cmd->add_option("--preset", opts.preset, "Base preset: paper or desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--seed", opts.seed, "Master seed");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--jobs", opts.jobs, "Worker threads for instances");
}

topicshift::ExperimentConfig resolve(const CommonOpts& opts) {
  using topicshift::ExperimentConfig;
  ExperimentConfig cfg = opts.preset == "paper" ? ExperimentConfig::paper_preset()
                                                : ExperimentConfig::desk_preset();
  if (!opts.config_path.empty()) cfg = ExperimentConfig::from_file(opts.config_path, cfg);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.jobs) cfg.jobs = *opts.jobs;
  return cfg;
}

void print_rows(const topicshift::SweepResult& r) {
  std::printf("%4s %10s %12s %10s  (95%% = mean +- 1.96 sd across epochs)\n",
              r.grid_name.c_str(), "keep%", "ambiguous%", "change%");
  for (const auto& row : r.rows)
    std::printf("%4lld %7.2f+-%.2f %9.2f+-%.2f %7.2f+-%.2f\n",
                static_cast<long long>(row.grid_value), row.keep_mean, row.keep_sd,
                row.ambiguous_mean, row.ambiguous_sd, row.change_mean, row.change_sd);
  std::printf("skipped (structural zero): %d, gate failures: %d\n", r.skipped_structural,
              r.gate_failures);
  std::printf("wrote %s, %s, %s\n", r.summary_csv.c_str(), r.records_csv.c_str(),
              r.figure_svg.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-layer attention topic-change simulations"};
  app.require_subcommand(1);

  CommonOpts opts;
  int instance_index = 0;
  double mc_p = 0.15;
  int mc_tokens = 10, mc_lmax = 5, mc_len = 20, mc_trials = 10000;

  auto* length = app.add_subcommand("length-sweep", "Outcome proportions over the T_test grid");
  add_common(length, opts);
  auto* ambiguity =
      app.add_subcommand("ambiguity-sweep", "Outcome proportions over the L grid (fixed T_test)");
  add_common(ambiguity, opts);
  auto* convergence =
      app.add_subcommand("convergence", "Direction correlation of W(tau) vs the max-margin limit");
  add_common(convergence, opts);
  auto* similarity =
      app.add_subcommand("priority-similarity", "Attention order similarity of the mixed model");
  add_common(similarity, opts);
  auto* mc = app.add_subcommand("mc-frequency", "Monte Carlo for the outnumbering condition");
  add_common(mc, opts);
  mc->add_option("--p", mc_p, "Shared probability of each top token");
  mc->add_option("--tokens", mc_tokens, "Vocabulary size for the sampled sequences");
  mc->add_option("--lmax", mc_lmax, "Evaluate l = 1..lmax");
  mc->add_option("--T", mc_len, "Sequence length");
  mc->add_option("--trials", mc_trials, "Monte Carlo trials");
  auto* single = app.add_subcommand("single-instance", "Run one instance and dump its artifacts");
  add_common(single, opts);
  single->add_option("--instance", instance_index, "Instance index under the master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const topicshift::ExperimentConfig cfg = resolve(opts);
    if (length->parsed()) {
      print_rows(topicshift::run_length_sweep(cfg));
    } else if (ambiguity->parsed()) {
      print_rows(topicshift::run_ambiguity_sweep(cfg));
    } else if (convergence->parsed()) {
      const auto curves = topicshift::run_convergence(cfg);
      std::printf("tau=%d: corr a=%.4f b=%.4f ab=%.4f (wrote %s)\n", curves.steps.back(),
                  curves.mean_a.back(), curves.mean_b.back(), curves.mean_ab.back(),
                  curves.csv_path.c_str());
    } else if (similarity->parsed()) {
      const auto curves = topicshift::run_priority_similarity(cfg);
      std::printf("tau=%d: similarity vs W_a=%.5f vs W_b=%.5f (wrote %s)\n", curves.steps.back(),
                  curves.vs_a_mean.back(), curves.vs_b_mean.back(), curves.csv_path.c_str());
    } else if (mc->parsed()) {
      const auto run = topicshift::run_frequency_mc(cfg, mc_p, mc_tokens, mc_lmax, mc_len,
                                                    mc_trials);
      for (const auto& e : run.estimates)
        std::printf("l=%d  P=%.5f +- %.5f\n", e.top_size, e.estimate, e.std_error);
      std::printf("wrote %s\n", run.csv_path.c_str());
    } else if (single->parsed()) {
      topicshift::run_single_instance(cfg, instance_index);
      std::printf("wrote artifacts under %s\n", cfg.out_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
