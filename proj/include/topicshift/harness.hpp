#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "topicshift/analysis.hpp"
#include "topicshift/attention.hpp"
#include "topicshift/datagen.hpp"
#include "topicshift/graphsvm.hpp"
#include "topicshift/tpg.hpp"
#include "topicshift/vocab.hpp"

namespace topicshift {

inline constexpr const char* kVersion = "0.1.0";

// Flat experiment configuration. The "paper" preset carries the full-scale
// simulation protocol; "desk" shrinks counts so a sweep finishes in minutes.
struct ExperimentConfig {
  int token_count = 10;        // K
  int dim = 16;                // d
  int edges_per_graph = 4;     // L
  int train_len = 4;           // T_train
  int test_len = 20;           // T_test for the ambiguity sweep / classification runs
  int similarity_len = 4;      // sequence length for the priority-similarity run
  int n_train = 5000;
  double eta = 0.01;           // per-sample rate; train() receives eta * n_samples
  int iterations = 8000;
  int record_every = 200;
  int instances = 100;
  int epochs = 50;
  int sequences_per_epoch = 100;
  std::uint64_t seed = 1;
  double grouping_eps = 5e-4;
  std::vector<int> test_len_grid = {4, 8, 16, 24, 32, 64, 128, 256, 512};
  std::vector<int> edge_grid = {4, 6, 8, 10, 12, 14, 16, 18};
  int reconstruction_budget = 10;
  double gate_correlation = 0.9;
  int jobs = 1;
  std::string out_dir = "out";

  static ExperimentConfig paper_preset();
  static ExperimentConfig desk_preset();

  // "key = value" lines, '#' comments; unknown keys are errors.
  static ExperimentConfig from_file(const std::string& path, const ExperimentConfig& base);
  std::string to_text() const;
  std::uint64_t content_hash() const;
};

// Per-role seeds derived from the master seed; any instance is reproducible
// in isolation from (master seed, instance index).
struct InstanceSeeds {
  std::uint64_t instance = 0;
  std::uint64_t vocab = 0;
  std::uint64_t topic_a = 0;
  std::uint64_t topic_b = 0;
  std::uint64_t dataset_a = 0;
  std::uint64_t dataset_b = 0;
  std::uint64_t tests = 0;

  static InstanceSeeds derive(std::uint64_t master, int instance_index);
};

struct InstanceResult {
  int index = 0;
  InstanceSeeds seeds;
  Vocabulary vocab;
  Topic topic_a, topic_b, topic_ab;
  Dataset dataset_a, dataset_b;
  SvmSolution svm_a, svm_b, svm_ab;
  TrainResult trained_a, trained_b, trained_ab;
  double corr_a = 0.0, corr_b = 0.0, corr_ab = 0.0;

  bool gate_ok(double threshold) const {
    return corr_a >= threshold && corr_b >= threshold && corr_ab >= threshold;
  }
};

enum class SkipReason { kNone, kStructuralZero, kGateFailure };

struct InstanceOutcome {
  SkipReason skip = SkipReason::kNone;
  std::optional<InstanceResult> result;  // engaged when skip == kNone or kGateFailure
};

// Builds topics and datasets, verifies the reconstruction gate, solves the
// three max-margin programs and trains the three models. Returns a skip when
// any max-margin solution is structurally zero.
InstanceOutcome run_instance(const ExperimentConfig& cfg, int instance_index,
                             bool with_checkpoints = false);

struct SweepRow {
  double grid_value = 0.0;
  double keep_mean = 0.0, keep_sd = 0.0;
  double ambiguous_mean = 0.0, ambiguous_sd = 0.0;
  double change_mean = 0.0, change_sd = 0.0;
  long sequences = 0;
  long change_with_freq_condition = 0;
  long change_total = 0;
  long unstable = 0;
};

struct SweepResult {
  std::string grid_name;  // "T" or "L"
  std::vector<SweepRow> rows;
  std::vector<std::uint64_t> instance_seeds;
  int skipped_structural = 0;
  int gate_failures = 0;
  std::string records_csv;  // emitted file paths
  std::string summary_csv;
  std::string figure_svg;
};

SweepResult run_length_sweep(const ExperimentConfig& cfg);
SweepResult run_ambiguity_sweep(const ExperimentConfig& cfg);

struct ConvergenceCurves {
  std::vector<int> steps;
  // mean and sd across instances, per checkpoint, for W_a / W_b / W_ab
  std::vector<double> mean_a, sd_a, mean_b, sd_b, mean_ab, sd_ab;
  int skipped_structural = 0;
  std::string csv_path, svg_path;
};

ConvergenceCurves run_convergence(const ExperimentConfig& cfg);

struct SimilarityCurves {
  std::vector<int> steps;
  std::vector<double> vs_a_mean, vs_a_sd, vs_b_mean, vs_b_sd;
  int skipped_structural = 0;
  std::string csv_path, svg_path;
};

SimilarityCurves run_priority_similarity(const ExperimentConfig& cfg);

struct McRunResult {
  std::vector<McEstimate> estimates;
  std::string csv_path;
  std::string svg_path;
};

McRunResult run_frequency_mc(const ExperimentConfig& cfg, double top_prob, int num_tokens,
                             int max_top_size, int seq_len, int trials);

// Writes vocab/topics/datasets/checkpoints/solutions for one instance.
void run_single_instance(const ExperimentConfig& cfg, int instance_index);

void write_manifest(const ExperimentConfig& cfg, const std::string& run_name,
                    const std::vector<std::uint64_t>& instance_seeds, int skipped_structural,
                    int gate_failures, double unstable_fraction);

}  // namespace topicshift
