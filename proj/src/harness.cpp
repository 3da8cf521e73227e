#include "topicshift/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "topicshift/svg.hpp"

namespace topicshift {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

ExperimentConfig ExperimentConfig::paper_preset() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::desk_preset() {
  ExperimentConfig c;
  c.n_train = 2000;
  c.instances = 6;
  c.epochs = 10;
  c.sequences_per_epoch = 25;
  return c;
}

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw std::runtime_error("config: empty grid");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream o;
  for (std::size_t i = 0; i < v.size(); ++i) o << (i ? "," : "") << v[i];
  return o.str();
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path,
                                             const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  ExperimentConfig cfg = base;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "K") cfg.token_count = std::stoi(value);
    else if (key == "d") cfg.dim = std::stoi(value);
    else if (key == "L") cfg.edges_per_graph = std::stoi(value);
    else if (key == "T_train") cfg.train_len = std::stoi(value);
    else if (key == "T_test") cfg.test_len = std::stoi(value);
    else if (key == "similarity_T") cfg.similarity_len = std::stoi(value);
    else if (key == "n_train") cfg.n_train = std::stoi(value);
    else if (key == "eta") cfg.eta = std::stod(value);
    else if (key == "iterations") cfg.iterations = std::stoi(value);
    else if (key == "record_every") cfg.record_every = std::stoi(value);
    else if (key == "instances") cfg.instances = std::stoi(value);
    else if (key == "epochs") cfg.epochs = std::stoi(value);
    else if (key == "sequences_per_epoch") cfg.sequences_per_epoch = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "grouping_eps") cfg.grouping_eps = std::stod(value);
    else if (key == "T_test_grid") cfg.test_len_grid = parse_int_list(value);
    else if (key == "L_grid") cfg.edge_grid = parse_int_list(value);
    else if (key == "reconstruction_budget") cfg.reconstruction_budget = std::stoi(value);
    else if (key == "gate_correlation") cfg.gate_correlation = std::stod(value);
    else if (key == "jobs") cfg.jobs = std::stoi(value);
    else if (key == "out_dir") cfg.out_dir = value;
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown key '" + key +
                               "'");
  }
  return cfg;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "K = " << token_count << '\n'
    << "d = " << dim << '\n'
    << "L = " << edges_per_graph << '\n'
    << "T_train = " << train_len << '\n'
    << "T_test = " << test_len << '\n'
    << "similarity_T = " << similarity_len << '\n'
    << "n_train = " << n_train << '\n'
    << "eta = " << eta << '\n'
    << "iterations = " << iterations << '\n'
    << "record_every = " << record_every << '\n'
    << "instances = " << instances << '\n'
    << "epochs = " << epochs << '\n'
    << "sequences_per_epoch = " << sequences_per_epoch << '\n'
    << "seed = " << seed << '\n'
    << "grouping_eps = " << grouping_eps << '\n'
    << "T_test_grid = " << join_ints(test_len_grid) << '\n'
    << "L_grid = " << join_ints(edge_grid) << '\n'
    << "reconstruction_budget = " << reconstruction_budget << '\n'
    << "gate_correlation = " << gate_correlation << '\n'
    << "jobs = " << jobs << '\n'
    << "out_dir = " << out_dir << '\n';
  return o.str();
}

std::uint64_t ExperimentConfig::content_hash() const {
  // FNV-1a over the canonical text.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : to_text()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------- instances

InstanceSeeds InstanceSeeds::derive(std::uint64_t master, int instance_index) {
  InstanceSeeds s;
  s.instance = split_seed(master, static_cast<std::uint64_t>(instance_index));
  s.vocab = split_seed(s.instance, 0);
  s.topic_a = split_seed(s.instance, 1);
  s.topic_b = split_seed(s.instance, 2);
  s.dataset_a = split_seed(s.instance, 3);
  s.dataset_b = split_seed(s.instance, 4);
  s.tests = split_seed(s.instance, 5);
  return s;
}

InstanceOutcome run_instance(const ExperimentConfig& cfg, int instance_index,
                             bool with_checkpoints) {
  InstanceOutcome out;
  InstanceResult r;
  r.index = instance_index;
  r.seeds = InstanceSeeds::derive(cfg.seed, instance_index);
  r.vocab = build_orthonormal_vocab(cfg.token_count, cfg.dim, r.seeds.vocab);
  r.topic_a = random_topic(cfg.token_count, cfg.edges_per_graph, r.seeds.topic_a);
  r.topic_b = random_topic(cfg.token_count, cfg.edges_per_graph, r.seeds.topic_b);
  r.topic_ab = union_topics(r.topic_a, r.topic_b);

  const SvmConstraintSet cs_a = build_constraints(r.topic_a, r.vocab, Comparability::kStrict);
  const SvmConstraintSet cs_b = build_constraints(r.topic_b, r.vocab, Comparability::kStrict);
  const SvmConstraintSet cs_ab =
      build_constraints(r.topic_ab, r.vocab, Comparability::kPermissive);
  r.svm_a = solve_graph_svm(cs_a, r.vocab);
  r.svm_b = solve_graph_svm(cs_b, r.vocab);
  r.svm_ab = solve_graph_svm(cs_ab, r.vocab);
  if (r.svm_a.zero || r.svm_b.zero || r.svm_ab.zero) {
    out.skip = SkipReason::kStructuralZero;
    return out;
  }

  // Reconstruction gate: the dataset must rebuild the exact edge sets before
  // any model is trained on it.
  r.dataset_a = generate_reconstructing_training_set(r.topic_a, cfg.n_train, cfg.train_len,
                                                     r.seeds.dataset_a, "a",
                                                     cfg.reconstruction_budget);
  r.dataset_b = generate_reconstructing_training_set(r.topic_b, cfg.n_train, cfg.train_len,
                                                     r.seeds.dataset_b, "b",
                                                     cfg.reconstruction_budget);
  const Dataset dataset_ab = merge_datasets(r.dataset_a, r.dataset_b);

  TrainConfig tc;
  tc.iterations = cfg.iterations;
  tc.record_every = with_checkpoints ? cfg.record_every : 0;
  tc.eta = cfg.eta * static_cast<double>(r.dataset_a.samples.size());
  r.trained_a = train(r.dataset_a, tc, r.vocab);
  tc.eta = cfg.eta * static_cast<double>(r.dataset_b.samples.size());
  r.trained_b = train(r.dataset_b, tc, r.vocab);
  tc.eta = cfg.eta * static_cast<double>(dataset_ab.samples.size());
  r.trained_ab = train(dataset_ab, tc, r.vocab);

  r.corr_a = direction_correlation(r.trained_a.weights, r.svm_a);
  r.corr_b = direction_correlation(r.trained_b.weights, r.svm_b);
  r.corr_ab = direction_correlation(r.trained_ab.weights, r.svm_ab);
  if (!r.gate_ok(cfg.gate_correlation)) out.skip = SkipReason::kGateFailure;
  out.result = std::move(r);
  return out;
}

namespace {

// Collects the first `count` non-skipped instances in candidate-index order;
// candidates are evaluated in parallel but reduced deterministically.
struct InstancePool {
  std::vector<InstanceResult> kept;
  int skipped_structural = 0;
  int gate_failures = 0;
};

InstancePool collect_instances(const ExperimentConfig& cfg, int count, bool with_checkpoints) {
  InstancePool pool;
  int next_candidate = 0;
  const int jobs = std::max(1, cfg.jobs);
  while (static_cast<int>(pool.kept.size()) < count) {
    const int missing = count - static_cast<int>(pool.kept.size());
    const int batch = std::max(jobs, missing);
    std::vector<InstanceOutcome> results(batch);
    if (jobs == 1) {
      for (int i = 0; i < batch; ++i)
        results[i] = run_instance(cfg, next_candidate + i, with_checkpoints);
    } else {
      std::vector<std::thread> workers;
      std::mutex mu;
      int cursor = 0;
      for (int t = 0; t < jobs; ++t) {
        workers.emplace_back([&]() {
          while (true) {
            int mine;
            {
              std::lock_guard<std::mutex> lock(mu);
              if (cursor >= batch) return;
              mine = cursor++;
            }
            results[mine] = run_instance(cfg, next_candidate + mine, with_checkpoints);
          }
        });
      }
      for (auto& w : workers) w.join();
    }
    for (int i = 0; i < batch && static_cast<int>(pool.kept.size()) < count; ++i) {
      auto& res = results[i];
      if (res.skip == SkipReason::kStructuralZero) {
        ++pool.skipped_structural;
      } else if (res.skip == SkipReason::kGateFailure) {
        ++pool.gate_failures;
      } else {
        pool.kept.push_back(std::move(*res.result));
      }
    }
    next_candidate += batch;
    if (next_candidate > count * 100 + 1000)
      throw std::runtime_error("collect_instances: too many skipped instances");
  }
  return pool;
}

struct EpochTally {
  long keep = 0, ambiguous = 0, change = 0;
  long total() const { return keep + ambiguous + change; }
};

double pct(long part, long whole) {
  return whole > 0 ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
}

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
  }
}

struct RecordsWriter {
  std::ofstream out;
  explicit RecordsWriter(const std::string& path) : out(path) {
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "instance,seed,T,L,outcome,freq_condition,ghat_a_size,ghat_ab_size,gdot_a_size\n";
  }
  void add(int instance, std::uint64_t seed, int t_len, int edges, const OutcomeRecord& rec) {
    out << instance << ',' << seed << ',' << t_len << ',' << edges << ','
        << outcome_name(rec.outcome) << ',' << (rec.freq_condition ? 1 : 0) << ','
        << rec.hp_scc_a.size() << ',' << rec.hp_scc_ab.size() << ',' << rec.priority_scc_a.size()
        << '\n';
  }
};

// Classification of one grid point over all instances and epochs, using the
// certified max-margin directions of each instance.
void classify_grid_point(const ExperimentConfig& cfg, const std::vector<InstanceResult>& insts,
                         int seq_len, int grid_key, SweepRow& row, RecordsWriter& records,
                         int edges_per_graph) {
  std::vector<EpochTally> epochs(cfg.epochs);
  const GroupingTolerance tol{cfg.grouping_eps};
  for (const auto& inst : insts) {
    const AttnWeights dir_a = inst.svm_a.normalized();
    const AttnWeights dir_ab = inst.svm_ab.normalized();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      Rng rng(split_seed(split_seed(inst.seeds.tests, static_cast<std::uint64_t>(grid_key)),
                         static_cast<std::uint64_t>(epoch)));
      for (int s = 0; s < cfg.sequences_per_epoch; ++s) {
        const std::vector<int> seq = generate_test_sequence(inst.topic_a, seq_len, rng);
        const OutcomeRecord rec = classify_outcome(seq, dir_a, dir_ab, inst.topic_a, inst.vocab,
                                                   tol);
        auto& tally = epochs[epoch];
        switch (rec.outcome) {
          case Outcome::kKeepTopic: ++tally.keep; break;
          case Outcome::kAmbiguous: ++tally.ambiguous; break;
          case Outcome::kChangeTopic: ++tally.change; break;
        }
        if (rec.outcome == Outcome::kChangeTopic) {
          ++row.change_total;
          if (rec.freq_condition) ++row.change_with_freq_condition;
        }
        if (!rec.stable) ++row.unstable;
        records.add(inst.index, inst.seeds.instance, seq_len, edges_per_graph, rec);
      }
    }
  }
  std::vector<double> keep_pct, amb_pct, chg_pct;
  for (const auto& e : epochs) {
    keep_pct.push_back(pct(e.keep, e.total()));
    amb_pct.push_back(pct(e.ambiguous, e.total()));
    chg_pct.push_back(pct(e.change, e.total()));
    row.sequences += e.total();
  }
  mean_sd(keep_pct, row.keep_mean, row.keep_sd);
  mean_sd(amb_pct, row.ambiguous_mean, row.ambiguous_sd);
  mean_sd(chg_pct, row.change_mean, row.change_sd);
}

void write_summary_csv(const std::string& path, const std::string& grid_name,
                       const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << grid_name
      << ",keep_mean,keep_sd,keep_lo95,keep_hi95,ambiguous_mean,ambiguous_sd,ambiguous_lo95,"
         "ambiguous_hi95,change_mean,change_sd,change_lo95,change_hi95,sequences\n";
  out.setf(std::ios::fixed);
  out.precision(4);
  for (const auto& r : rows) {
    auto emit = [&](double mean, double sd) {
      out << ',' << mean << ',' << sd << ',' << std::max(0.0, mean - 1.96 * sd) << ','
          << std::min(100.0, mean + 1.96 * sd);
    };
    out << static_cast<long long>(r.grid_value);
    emit(r.keep_mean, r.keep_sd);
    emit(r.ambiguous_mean, r.ambiguous_sd);
    emit(r.change_mean, r.change_sd);
    out << ',' << r.sequences << '\n';
  }
}

void write_sweep_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, bool log_x, const std::vector<SweepRow>& rows) {
  SvgChart chart(title, x_label, "proportion (%)");
  chart.set_log_x(log_x);
  auto series = [&](const char* label, const char* color, auto mean_of, auto sd_of) {
    SvgChart::Series s;
    s.label = label;
    s.color = color;
    for (const auto& r : rows) {
      s.x.push_back(r.grid_value);
      const double m = mean_of(r), d = sd_of(r);
      s.y.push_back(m);
      s.y_lo.push_back(std::max(0.0, m - 1.96 * d));
      s.y_hi.push_back(std::min(100.0, m + 1.96 * d));
    }
    chart.add_series(std::move(s));
  };
  series("keep", "#1f77b4", [](const SweepRow& r) { return r.keep_mean; },
         [](const SweepRow& r) { return r.keep_sd; });
  series("ambiguous", "#ff7f0e", [](const SweepRow& r) { return r.ambiguous_mean; },
         [](const SweepRow& r) { return r.ambiguous_sd; });
  series("change", "#2ca02c", [](const SweepRow& r) { return r.change_mean; },
         [](const SweepRow& r) { return r.change_sd; });
  chart.save(path);
}

double unstable_fraction(const std::vector<SweepRow>& rows) {
  long unstable = 0, total = 0;
  for (const auto& r : rows) {
    unstable += r.unstable;
    total += r.sequences;
  }
  return total > 0 ? static_cast<double>(unstable) / static_cast<double>(total) : 0.0;
}

}  // namespace

// ---------------------------------------------------------------- sweeps

SweepResult run_length_sweep(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  InstancePool pool = collect_instances(cfg, cfg.instances, false);

  SweepResult result;
  result.grid_name = "T";
  result.skipped_structural = pool.skipped_structural;
  result.gate_failures = pool.gate_failures;
  for (const auto& inst : pool.kept) result.instance_seeds.push_back(inst.seeds.instance);

  result.records_csv = cfg.out_dir + "/length_sweep_records.csv";
  RecordsWriter records(result.records_csv);
  for (int t_len : cfg.test_len_grid) {
    SweepRow row;
    row.grid_value = t_len;
    classify_grid_point(cfg, pool.kept, t_len, t_len, row, records, cfg.edges_per_graph);
    result.rows.push_back(row);
  }
  result.summary_csv = cfg.out_dir + "/length_sweep_summary.csv";
  write_summary_csv(result.summary_csv, "T", result.rows);
  result.figure_svg = cfg.out_dir + "/length_sweep.svg";
  write_sweep_svg(result.figure_svg, "Outcome proportions vs test length", "T_test", true,
                  result.rows);
  write_manifest(cfg, "length_sweep", result.instance_seeds, result.skipped_structural,
                 result.gate_failures, unstable_fraction(result.rows));
  return result;
}

SweepResult run_ambiguity_sweep(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  SweepResult result;
  result.grid_name = "L";

  result.records_csv = cfg.out_dir + "/ambiguity_sweep_records.csv";
  RecordsWriter records(result.records_csv);
  for (int edges : cfg.edge_grid) {
    ExperimentConfig point = cfg;
    point.edges_per_graph = edges;
    InstancePool pool = collect_instances(point, cfg.instances, false);
    result.skipped_structural += pool.skipped_structural;
    result.gate_failures += pool.gate_failures;
    for (const auto& inst : pool.kept) result.instance_seeds.push_back(inst.seeds.instance);

    SweepRow row;
    row.grid_value = edges;
    classify_grid_point(point, pool.kept, cfg.test_len, 1000 + edges, row, records, edges);
    result.rows.push_back(row);
  }
  result.summary_csv = cfg.out_dir + "/ambiguity_sweep_summary.csv";
  write_summary_csv(result.summary_csv, "L", result.rows);
  result.figure_svg = cfg.out_dir + "/ambiguity_sweep.svg";
  write_sweep_svg(result.figure_svg, "Outcome proportions vs topic overlap", "L", false,
                  result.rows);
  write_manifest(cfg, "ambiguity_sweep", result.instance_seeds, result.skipped_structural,
                 result.gate_failures, unstable_fraction(result.rows));
  return result;
}

// ---------------------------------------------------------------- curves

ConvergenceCurves run_convergence(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  InstancePool pool = collect_instances(cfg, cfg.instances, true);
  ConvergenceCurves curves;
  curves.skipped_structural = pool.skipped_structural + pool.gate_failures;

  const auto& first = pool.kept.front().trained_a.checkpoints;
  for (const auto& c : first) curves.steps.push_back(c.step);
  const std::size_t n_steps = curves.steps.size();

  auto fill = [&](auto member, const SvmSolution InstanceResult::*svm, std::vector<double>& mean,
                  std::vector<double>& sd) {
    for (std::size_t s = 0; s < n_steps; ++s) {
      std::vector<double> vals;
      for (const auto& inst : pool.kept) {
        const auto& cps = (inst.*member).checkpoints;
        if (s < cps.size() && cps[s].weights.norm() > 0)
          vals.push_back(direction_correlation(cps[s].weights, inst.*svm));
      }
      double m = 0.0, d = 0.0;
      mean_sd(vals, m, d);
      mean.push_back(m);
      sd.push_back(d);
    }
  };
  fill(&InstanceResult::trained_a, &InstanceResult::svm_a, curves.mean_a, curves.sd_a);
  fill(&InstanceResult::trained_b, &InstanceResult::svm_b, curves.mean_b, curves.sd_b);
  fill(&InstanceResult::trained_ab, &InstanceResult::svm_ab, curves.mean_ab, curves.sd_ab);

  curves.csv_path = cfg.out_dir + "/convergence.csv";
  {
    std::ofstream out(curves.csv_path);
    if (!out) throw std::runtime_error("cannot open " + curves.csv_path);
    out << "tau,corr_a_mean,corr_a_sd,corr_b_mean,corr_b_sd,corr_ab_mean,corr_ab_sd\n";
    out.precision(6);
    for (std::size_t s = 0; s < n_steps; ++s)
      out << curves.steps[s] << ',' << curves.mean_a[s] << ',' << curves.sd_a[s] << ','
          << curves.mean_b[s] << ',' << curves.sd_b[s] << ',' << curves.mean_ab[s] << ','
          << curves.sd_ab[s] << '\n';
  }
  curves.svg_path = cfg.out_dir + "/convergence.svg";
  {
    SvgChart chart("Direction correlation vs training step", "tau", "correlation");
    auto add = [&](const char* label, const char* color, const std::vector<double>& m,
                   const std::vector<double>& d) {
      SvgChart::Series s;
      s.label = label;
      s.color = color;
      for (std::size_t i = 0; i < n_steps; ++i) {
        s.x.push_back(curves.steps[i]);
        s.y.push_back(m[i]);
        s.y_lo.push_back(m[i] - 1.96 * d[i]);
        s.y_hi.push_back(std::min(1.0, m[i] + 1.96 * d[i]));
      }
      chart.add_series(std::move(s));
    };
    add("W_a", "#1f77b4", curves.mean_a, curves.sd_a);
    add("W_b", "#ff7f0e", curves.mean_b, curves.sd_b);
    add("W_ab", "#2ca02c", curves.mean_ab, curves.sd_ab);
    chart.save(curves.svg_path);
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& inst : pool.kept) seeds.push_back(inst.seeds.instance);
  write_manifest(cfg, "convergence", seeds, pool.skipped_structural, pool.gate_failures, 0.0);
  return curves;
}

SimilarityCurves run_priority_similarity(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  InstancePool pool = collect_instances(cfg, cfg.instances, true);
  SimilarityCurves curves;
  curves.skipped_structural = pool.skipped_structural + pool.gate_failures;

  for (const auto& c : pool.kept.front().trained_ab.checkpoints) curves.steps.push_back(c.step);
  const std::size_t n_steps = curves.steps.size();

  for (std::size_t s = 0; s < n_steps; ++s) {
    std::vector<double> vs_a, vs_b;
    for (const auto& inst : pool.kept) {
      const auto& cps_ab = inst.trained_ab.checkpoints;
      const auto& cps_a = inst.trained_a.checkpoints;
      const auto& cps_b = inst.trained_b.checkpoints;
      if (s >= cps_ab.size() || s >= cps_a.size() || s >= cps_b.size()) continue;
      Rng rng(split_seed(inst.seeds.tests, 7000 + static_cast<std::uint64_t>(s)));
      double sum_a = 0.0, sum_b = 0.0;
      const int n_seq = cfg.sequences_per_epoch;
      for (int q = 0; q < n_seq; ++q) {
        const std::vector<int> seq =
            generate_test_sequence(inst.topic_a, cfg.similarity_len, rng);
        sum_a += priority_similarity(seq, cps_a[s].weights, cps_ab[s].weights, inst.vocab);
        sum_b += priority_similarity(seq, cps_b[s].weights, cps_ab[s].weights, inst.vocab);
      }
      vs_a.push_back(sum_a / n_seq);
      vs_b.push_back(sum_b / n_seq);
    }
    double m = 0.0, d = 0.0;
    mean_sd(vs_a, m, d);
    curves.vs_a_mean.push_back(m);
    curves.vs_a_sd.push_back(d);
    mean_sd(vs_b, m, d);
    curves.vs_b_mean.push_back(m);
    curves.vs_b_sd.push_back(d);
  }

  curves.csv_path = cfg.out_dir + "/priority_similarity.csv";
  {
    std::ofstream out(curves.csv_path);
    if (!out) throw std::runtime_error("cannot open " + curves.csv_path);
    out << "tau,sim_vs_a_mean,sim_vs_a_sd,sim_vs_b_mean,sim_vs_b_sd\n";
    out.precision(6);
    for (std::size_t s = 0; s < n_steps; ++s)
      out << curves.steps[s] << ',' << curves.vs_a_mean[s] << ',' << curves.vs_a_sd[s] << ','
          << curves.vs_b_mean[s] << ',' << curves.vs_b_sd[s] << '\n';
  }
  curves.svg_path = cfg.out_dir + "/priority_similarity.svg";
  {
    SvgChart chart("Attention priority similarity of W_ab", "tau", "similarity");
    auto add = [&](const char* label, const char* color, const std::vector<double>& m,
                   const std::vector<double>& d) {
      SvgChart::Series s;
      s.label = label;
      s.color = color;
      for (std::size_t i = 0; i < n_steps; ++i) {
        s.x.push_back(curves.steps[i]);
        s.y.push_back(m[i]);
        s.y_lo.push_back(m[i] - 1.96 * d[i]);
        s.y_hi.push_back(std::min(1.0, m[i] + 1.96 * d[i]));
      }
      chart.add_series(std::move(s));
    };
    add("relative to W_a", "#1f77b4", curves.vs_a_mean, curves.vs_a_sd);
    add("relative to W_b", "#ff7f0e", curves.vs_b_mean, curves.vs_b_sd);
    chart.save(curves.svg_path);
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& inst : pool.kept) seeds.push_back(inst.seeds.instance);
  write_manifest(cfg, "priority_similarity", seeds, pool.skipped_structural, pool.gate_failures,
                 0.0);
  return curves;
}

McRunResult run_frequency_mc(const ExperimentConfig& cfg, double top_prob, int num_tokens,
                             int max_top_size, int seq_len, int trials) {
  fs::create_directories(cfg.out_dir);
  std::vector<int> sizes;
  for (int l = 1; l <= max_top_size; ++l) sizes.push_back(l);
  McRunResult out;
  out.estimates = coupled_frequency_mc(top_prob, num_tokens, sizes, seq_len, trials, cfg.seed);
  out.csv_path = cfg.out_dir + "/frequency_mc.csv";
  {
    std::ofstream f(out.csv_path);
    if (!f) throw std::runtime_error("cannot open " + out.csv_path);
    f << "l,estimate,std_error,diff_from_prev,diff_std_error\n";
    f.precision(8);
    for (const auto& e : out.estimates)
      f << e.top_size << ',' << e.estimate << ',' << e.std_error << ',' << e.diff_from_prev << ','
        << e.diff_std_error << '\n';
  }
  out.svg_path = cfg.out_dir + "/frequency_mc.svg";
  {
    SvgChart chart("Outnumbering probability vs top-set size", "l", "probability");
    SvgChart::Series s;
    s.label = "estimate";
    s.color = "#1f77b4";
    for (const auto& e : out.estimates) {
      s.x.push_back(e.top_size);
      s.y.push_back(e.estimate);
      s.y_lo.push_back(std::max(0.0, e.estimate - 1.96 * e.std_error));
      s.y_hi.push_back(e.estimate + 1.96 * e.std_error);
    }
    chart.add_series(std::move(s));
    chart.save(out.svg_path);
  }
  write_manifest(cfg, "frequency_mc", {}, 0, 0, 0.0);
  return out;
}

void run_single_instance(const ExperimentConfig& cfg, int instance_index) {
  fs::create_directories(cfg.out_dir);
  const InstanceOutcome outcome = run_instance(cfg, instance_index, true);
  if (outcome.skip == SkipReason::kStructuralZero) {
    std::ofstream out(cfg.out_dir + "/skipped.txt");
    out << "instance " << instance_index << " skipped: structurally zero max-margin solution\n";
    return;
  }
  const InstanceResult& r = *outcome.result;
  save_vocabulary(r.vocab, cfg.out_dir + "/vocab.txt");
  save_topic(r.topic_a, cfg.out_dir + "/topic_a.txt");
  save_topic(r.topic_b, cfg.out_dir + "/topic_b.txt");
  save_topic(r.topic_ab, cfg.out_dir + "/topic_ab.txt");
  save_dataset(r.dataset_a, cfg.out_dir + "/dataset_a.txt");
  save_dataset(r.dataset_b, cfg.out_dir + "/dataset_b.txt");
  for (const auto& [name, trained, svm] :
       {std::tuple{"a", &r.trained_a, &r.svm_a}, std::tuple{"b", &r.trained_b, &r.svm_b},
        std::tuple{"ab", &r.trained_ab, &r.svm_ab}}) {
    const std::string dir = cfg.out_dir + "/checkpoints_" + name;
    fs::create_directories(dir);
    for (const auto& c : trained->checkpoints)
      save_checkpoint(c, dir + "/step_" + std::to_string(c.step) + ".txt");
    Checkpoint svm_cp{0, 0.0, svm->weights};
    save_checkpoint(svm_cp, cfg.out_dir + "/svm_" + std::string(name) + ".txt");
  }
  {
    std::ofstream out(cfg.out_dir + "/instance.txt");
    out.precision(10);
    out << "instance = " << instance_index << '\n'
        << "seed = " << r.seeds.instance << '\n'
        << "corr_a = " << r.corr_a << '\n'
        << "corr_b = " << r.corr_b << '\n'
        << "corr_ab = " << r.corr_ab << '\n'
        << "svm_a_norm = " << r.svm_a.weights.norm() << '\n'
        << "svm_b_norm = " << r.svm_b.weights.norm() << '\n'
        << "svm_ab_norm = " << r.svm_ab.weights.norm() << '\n'
        << "gate = " << (r.gate_ok(cfg.gate_correlation) ? "pass" : "fail") << '\n';
  }
  write_manifest(cfg, "single_instance", {r.seeds.instance}, 0,
                 outcome.skip == SkipReason::kGateFailure ? 1 : 0, 0.0);
}

void write_manifest(const ExperimentConfig& cfg, const std::string& run_name,
                    const std::vector<std::uint64_t>& instance_seeds, int skipped_structural,
                    int gate_failures, double unstable) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/manifest_" + run_name + ".txt");
  if (!out) throw std::runtime_error("write_manifest: cannot open output");
  out << "run = " << run_name << '\n';
  out << "version = " << kVersion << '\n';
  out << "config_hash = " << std::hex << cfg.content_hash() << std::dec << '\n';
  out << "skipped_structural_zero = " << skipped_structural << '\n';
  out << "gate_failures = " << gate_failures << '\n';
  out << "unstable_classification_fraction = " << unstable << '\n';
  out << "dispersion = across-epoch standard deviation; 95% intervals are mean +- 1.96 sd\n";
  out << "instance_seeds =";
  for (auto s : instance_seeds) out << ' ' << s;
  out << '\n';
  out << "--- config ---\n" << cfg.to_text();
}

}  // namespace topicshift
