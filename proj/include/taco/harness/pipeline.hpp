#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "taco/cfn/cfn.hpp"
#include "taco/cfn/rnd.hpp"
#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/harness/metrics.hpp"
#include "taco/harness/run_config.hpp"
#include "taco/oracle/oracle.hpp"
#include "taco/policy/categorical_policy.hpp"
#include "taco/policy/flow_policy.hpp"
#include "taco/search/feature_search.hpp"
#include "taco/tasks/dataset.hpp"
#include "taco/tasks/task_spec.hpp"
#include "taco/verify/tts.hpp"

namespace taco::harness {

namespace fs = std::filesystem;

struct RunPaths {
  fs::path root;

  explicit RunPaths(const fs::path& out_dir) : root(out_dir) {}

  fs::path config_echo() const { return root / "config.cfg"; }
  fs::path task_file() const { return root / "task.txt"; }
  fs::path dataset() const { return root / "dataset.txt"; }
  fs::path policy_ckpt() const { return root / "policy.ckpt"; }
  fs::path policy_loss() const { return root / "policy_loss.csv"; }
  fs::path features() const { return root / "features.bin"; }
  fs::path cfn_ckpt() const { return root / "cfn.ckpt"; }
  fs::path cfn_loss() const { return root / "cfn_loss.csv"; }
  fs::path eval_episodes_csv() const { return root / "eval_results.csv"; }
  fs::path eval_summary_csv() const { return root / "eval_summary.csv"; }
  fs::path ablation_csv() const { return root / "ablation_results.csv"; }
  fs::path bench_csv() const { return root / "cache_bench.csv"; }
  fs::path run_log() const { return root / "run_log.csv"; }
  fs::path regressor_ckpt() const { return root / "arm_distance_regressor.ckpt"; }
  fs::path unscaled_cfn_ckpt() const { return root / "arm_cfn_unscaled.ckpt"; }
  fs::path raw_encoder_ckpt() const { return root / "arm_raw_encoder.ckpt"; }
  fs::path rnd_ckpt() const { return root / "arm_rnd.ckpt"; }
};

// Sub-stream tags so every stage draws from its own seed lane.
namespace seed_lane {
inline constexpr std::uint64_t kPolicyInit = 10;
inline constexpr std::uint64_t kPolicyTrain = 11;
inline constexpr std::uint64_t kFeatures = 20;
inline constexpr std::uint64_t kCfn = 30;
inline constexpr std::uint64_t kArmRegressor = 40;
inline constexpr std::uint64_t kArmRawEncoder = 41;
inline constexpr std::uint64_t kArmRnd = 42;
inline constexpr std::uint64_t kEval = 50;
inline constexpr std::uint64_t kEvalCandidates = 51;
inline constexpr std::uint64_t kBench = 60;
}  // namespace seed_lane

inline void require_exists(const fs::path& path, const std::string& stage,
                           const std::string& producer) {
  if (!fs::exists(path))
    throw ArtifactError(stage + " requires " + path.string() + "; run " + producer + " first");
}

inline void refuse_overwrite(const fs::path& path, bool force, const std::string& stage) {
  if (!force && fs::exists(path))
    throw UsageError(stage + ": " + path.string() + " exists; pass --force to overwrite");
}

inline MetricsLog open_log(const RunConfig& cfg, const RunPaths& paths) {
  const std::string digest = cfg.digest();
  return MetricsLog(paths.run_log(), digest.substr(0, 8) + "-" + std::to_string(cfg.seed),
                    digest);
}

inline void write_loss_csv(const fs::path& path, const std::vector<double>& losses,
                           const std::string& config_digest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write loss curve: " + path.string());
  out << "# config_digest " << config_digest << "\n";
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i)
    out << i << ',' << io::fmt_double(losses[i]) << "\n";
}

inline void cmd_gen_data(const RunConfig& cfg, bool force) {
  const RunPaths paths(cfg.out_dir);
  fs::create_directories(paths.root);
  refuse_overwrite(paths.dataset(), force, "gen-data");
  const tasks::TaskSpec task = tasks::make_preset(cfg.task_preset);
  const std::string digest = cfg.digest();
  WallClock clock;
  const tasks::Dataset data = tasks::generate_dataset(task, cfg.data_n, cfg.seed);
  tasks::save_task(task, paths.task_file(), digest);
  tasks::save_dataset(data, paths.dataset(), digest);
  cfg.save(paths.config_echo());
  MetricsLog log = open_log(cfg, paths);
  log.append("gen-data", "n", static_cast<double>(data.rows.size()), clock.elapsed_ms());
}

inline policy::FlowPolicyConfig flow_config_for(const RunConfig& cfg,
                                                const tasks::TaskSpec& task) {
  policy::FlowPolicyConfig pc;
  pc.context_dim = task.context_dim;
  pc.action_dim = task.action_dim;
  pc.instruction_count = task.instruction_count;
  pc.embed_dim = cfg.policy_embed_dim;
  pc.cache_dim = cfg.policy_cache_dim;
  pc.feat_dim = cfg.policy_feat_dim;
  pc.hidden_dim = cfg.policy_hidden_dim;
  pc.integration_steps = cfg.policy_integration_steps;
  return pc;
}

inline policy::CategoricalPolicyConfig categorical_config_for(const RunConfig& cfg,
                                                              const tasks::TaskSpec& task) {
  policy::CategoricalPolicyConfig pc;
  pc.context_dim = task.context_dim;
  pc.action_dim = task.action_dim;
  pc.instruction_count = task.instruction_count;
  pc.embed_dim = cfg.policy_embed_dim;
  pc.hidden_dim = cfg.policy_hidden_dim;
  pc.cache_dim = cfg.policy_cache_dim;
  pc.bins = cfg.policy_bins;
  pc.grid_lo = cfg.policy_grid_lo;
  pc.grid_hi = cfg.policy_grid_hi;
  pc.temperature = cfg.policy_temperature;
  return pc;
}

inline void cmd_train_policy(const RunConfig& cfg, bool force) {
  const RunPaths paths(cfg.out_dir);
  require_exists(paths.task_file(), "train-policy", "gen-data");
  require_exists(paths.dataset(), "train-policy", "gen-data");
  refuse_overwrite(paths.policy_ckpt(), force, "train-policy");
  const tasks::TaskSpec task = tasks::load_task(paths.task_file());
  const tasks::Dataset data = tasks::load_dataset(paths.dataset());
  const std::string digest = cfg.digest();
  const std::string dataset_digest = digest_file(paths.dataset().string());
  WallClock clock;
  std::vector<double> losses;
  if (cfg.policy_kind == "flow") {
    Rng init_rng(sub_seed(cfg.seed, seed_lane::kPolicyInit));
    policy::FlowPolicy flow(flow_config_for(cfg, task), init_rng);
    policy::FlowTrainConfig tc;
    tc.steps = cfg.policy_train_steps;
    tc.batch = cfg.policy_train_batch;
    tc.seed = sub_seed(cfg.seed, seed_lane::kPolicyTrain);
    const policy::TrainStats stats = train_flow(flow, data, tc);
    losses = stats.losses;
    flow.save(paths.policy_ckpt(),
              {{"config_digest", digest}, {"dataset_digest", dataset_digest}});
  } else if (cfg.policy_kind == "categorical") {
    Rng init_rng(sub_seed(cfg.seed, seed_lane::kPolicyInit));
    policy::CategoricalPolicy cat(categorical_config_for(cfg, task), init_rng);
    const policy::TrainStats stats =
        cat.train(data, cfg.policy_train_steps, cfg.policy_train_batch,
                  sub_seed(cfg.seed, seed_lane::kPolicyTrain));
    losses = stats.losses;
    cat.save(paths.policy_ckpt(),
             {{"config_digest", digest}, {"dataset_digest", dataset_digest}});
  } else {
    throw UsageError("unknown policy kind: '" + cfg.policy_kind + "'");
  }
  write_loss_csv(paths.policy_loss(), losses, digest);
  MetricsLog log = open_log(cfg, paths);
  log.append("train-policy", "final_loss", losses.empty() ? 0.0 : losses.back(),
             clock.elapsed_ms());
}

inline void check_policy_provenance(const RunPaths& paths,
                                    const std::map<std::string, std::string>& policy_meta) {
  const auto it = policy_meta.find("dataset_digest");
  if (it == policy_meta.end()) throw ProvenanceError("policy checkpoint lacks dataset digest");
  const std::string actual = digest_file(paths.dataset().string());
  if (it->second != actual)
    throw ProvenanceError("policy was trained on a different dataset (digest " + it->second +
                          " vs " + actual + ")");
}

inline void cmd_extract_features(const RunConfig& cfg, bool force) {
  const RunPaths paths(cfg.out_dir);
  require_exists(paths.policy_ckpt(), "extract-features", "train-policy");
  require_exists(paths.dataset(), "extract-features", "gen-data");
  refuse_overwrite(paths.features(), force, "extract-features");
  const tasks::Dataset data = tasks::load_dataset(paths.dataset());
  WallClock clock;
  search::FeatureDataset feats;
  std::map<std::string, std::string> policy_meta;
  if (cfg.policy_kind == "flow") {
    const policy::FlowPolicy flow = policy::FlowPolicy::load(paths.policy_ckpt(), &policy_meta);
    check_policy_provenance(paths, policy_meta);
    const search::NoiseSchedule sched = search::make_schedule(
        search::schedule_mode_from_string(cfg.search_mode), cfg.search_noise_fraction,
        cfg.search_n);
    feats = search::build_feature_dataset(flow, data, sched,
                                          sub_seed(cfg.seed, seed_lane::kFeatures));
  } else if (cfg.policy_kind == "categorical") {
    const policy::CategoricalPolicy cat =
        policy::CategoricalPolicy::load(paths.policy_ckpt(), &policy_meta);
    check_policy_provenance(paths, policy_meta);
    feats.feat_dim = cat.feature_dim();
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
      const auto& row = data.rows[i];
      feats.rows.push_back({cat.feature_for(row.context, row.instruction, row.action), i, 0.0,
                            0.0});
    }
  } else {
    throw UsageError("unknown policy kind: '" + cfg.policy_kind + "'");
  }
  feats.policy_digest = digest_file(paths.policy_ckpt().string());
  feats.dataset_digest = digest_file(paths.dataset().string());
  search::save_feature_dataset(feats, paths.features());
  std::vector<double> residuals;
  residuals.reserve(feats.rows.size());
  for (const auto& r : feats.rows) residuals.push_back(r.residual);
  std::sort(residuals.begin(), residuals.end());
  const double median = residuals.empty() ? 0.0 : residuals[residuals.size() / 2];
  MetricsLog log = open_log(cfg, paths);
  log.append("extract-features", "rows", static_cast<double>(feats.rows.size()),
             clock.elapsed_ms());
  log.append("extract-features", "residual_median", median, clock.elapsed_ms());
}

inline void cmd_train_cfn(const RunConfig& cfg, bool force) {
  const RunPaths paths(cfg.out_dir);
  require_exists(paths.features(), "train-cfn", "extract-features");
  require_exists(paths.policy_ckpt(), "train-cfn", "train-policy");
  refuse_overwrite(paths.cfn_ckpt(), force, "train-cfn");
  const search::FeatureDataset feats = search::load_feature_dataset(paths.features());
  const std::string policy_digest = digest_file(paths.policy_ckpt().string());
  if (feats.policy_digest != policy_digest)
    throw ProvenanceError("feature file was extracted from a different policy (digest " +
                          feats.policy_digest + " vs " + policy_digest + ")");
  WallClock clock;
  cfn::CfnTrainStats stats;
  cfn::CfnNetwork net =
      cfn::train_cfn(feats.features(), cfg.cfn, sub_seed(cfg.seed, seed_lane::kCfn), &stats);
  const std::string digest = cfg.digest();
  net.save(paths.cfn_ckpt(), {{"config_digest", digest},
                              {"features_digest", digest_file(paths.features().string())}});
  write_loss_csv(paths.cfn_loss(), stats.losses, digest);
  MetricsLog log = open_log(cfg, paths);
  log.append("train-cfn", "final_loss", stats.losses.empty() ? 0.0 : stats.losses.back(),
             clock.elapsed_ms());
}

namespace detail {

// Candidate generator abstraction so eval and ablate handle both policy
// kinds uniformly.
struct CandidateGen {
  const policy::FlowPolicy* flow = nullptr;
  const policy::CategoricalPolicy* categorical = nullptr;
  std::size_t integration_steps = 10;
  double temperature = 1.0;

  std::vector<policy::PolicyOutput> operator()(const nn::Vec& context, int instruction,
                                               std::size_t m, std::uint64_t seed) const {
    if (flow)
      return verify::generate_candidates(*flow, context, instruction, m, integration_steps, seed);
    std::vector<policy::PolicyOutput> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      Rng rng = Rng(seed).fork(i);
      out.push_back(categorical->sample(context, instruction, temperature, rng));
    }
    return out;
  }
};

inline std::string json_scores(const std::vector<double>& scores) {
  std::string out = "[";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i) out += ',';
    out += io::fmt_double(scores[i]);
  }
  out += ']';
  return out;
}

struct ComboResult {
  double rate = 0.0;
  double stderr_ = 0.0;
};

// Runs `episodes` paired decision steps: episode e always sees the same
// context and candidate noise regardless of M or scorer.
inline ComboResult run_combo(const tasks::TaskSpec& task, const CandidateGen& gen,
                             const verify::Scorer& scorer, std::size_t m, std::size_t episodes,
                             std::uint64_t eval_seed, std::ostream* episode_csv) {
  Rng base(eval_seed);
  std::size_t successes = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng ep = base.fork(e);
    nn::Vec context(task.context_dim);
    ep.fill_normal(context);
    const int instruction =
        task.instruction_count > 1 ? ep.uniform_int(static_cast<int>(task.instruction_count)) : 0;
    const std::uint64_t cand_seed = sub_seed(eval_seed, 1000000 + e);
    const auto candidates = gen(context, instruction, m, cand_seed);
    const auto scores = verify::score_candidates(scorer, context, instruction, candidates);
    const std::size_t selected = verify::select_index(scores);
    const int reward = tasks::evaluate_reward(task, context, candidates[selected].action);
    successes += static_cast<std::size_t>(reward);
    if (episode_csv) {
      Fnv1a h;
      h.update(context);
      (*episode_csv) << task.id << ',' << h.hex() << ',' << m << ',' << scorer.kind() << ','
                     << selected << ',' << io::fmt_double(scores[selected]) << ',' << reward
                     << ",\"" << json_scores(scores) << "\"\n";
    }
  }
  ComboResult out;
  out.rate = static_cast<double>(successes) / static_cast<double>(episodes);
  out.stderr_ = std::sqrt(out.rate * (1.0 - out.rate) / static_cast<double>(episodes));
  return out;
}

}  // namespace detail

inline void cmd_eval(const RunConfig& cfg, bool force) {
  const RunPaths paths(cfg.out_dir);
  require_exists(paths.task_file(), "eval", "gen-data");
  require_exists(paths.policy_ckpt(), "eval", "train-policy");
  refuse_overwrite(paths.eval_episodes_csv(), force, "eval");
  const tasks::TaskSpec task = tasks::load_task(paths.task_file());

  std::unique_ptr<policy::FlowPolicy> flow;
  std::unique_ptr<policy::CategoricalPolicy> categorical;
  detail::CandidateGen gen;
  gen.integration_steps = cfg.policy_integration_steps;
  gen.temperature = cfg.policy_temperature;
  if (cfg.policy_kind == "flow") {
    flow = std::make_unique<policy::FlowPolicy>(policy::FlowPolicy::load(paths.policy_ckpt()));
    gen.flow = flow.get();
  } else {
    categorical = std::make_unique<policy::CategoricalPolicy>(
        policy::CategoricalPolicy::load(paths.policy_ckpt()));
    gen.categorical = categorical.get();
  }

  // The M=1 baseline row and the oracle ceiling row are always present.
  std::vector<std::size_t> m_list = cfg.eval_m_list;
  if (std::find(m_list.begin(), m_list.end(), std::size_t{1}) == m_list.end())
    m_list.insert(m_list.begin(), 1);
  std::vector<std::string> scorers = cfg.eval_scorers;
  if (std::find(scorers.begin(), scorers.end(), "exact-density-oracle") == scorers.end())
    scorers.push_back("exact-density-oracle");

  std::unique_ptr<cfn::CfnNetwork> cfn_net;
  if (std::find(scorers.begin(), scorers.end(), "cfn") != scorers.end()) {
    require_exists(paths.cfn_ckpt(), "eval", "train-cfn");
    cfn_net = std::make_unique<cfn::CfnNetwork>(cfn::CfnNetwork::load(paths.cfn_ckpt()));
  }

  const std::string digest = cfg.digest();
  std::ofstream episodes_csv(paths.eval_episodes_csv(), std::ios::trunc);
  if (!episodes_csv) throw ArtifactError("cannot write eval results");
  episodes_csv << "# config_digest " << digest << "\n";
  episodes_csv
      << "task,context_digest,m,scorer,selected_index,selected_score,reward,candidate_scores\n";
  std::ofstream summary_csv(paths.eval_summary_csv(), std::ios::trunc);
  summary_csv << "# config_digest " << digest << "\n";
  summary_csv << "task,m,scorer,episodes,rate,stderr\n";

  MetricsLog log = open_log(cfg, paths);
  const std::uint64_t eval_seed = sub_seed(cfg.seed, seed_lane::kEval);
  for (const std::string& scorer_name : scorers) {
    std::unique_ptr<verify::Scorer> scorer;
    if (scorer_name == "cfn") {
      scorer = std::make_unique<verify::CfnScorer>(cfn_net.get());
    } else if (scorer_name == "exact-density-oracle") {
      scorer = std::make_unique<verify::DensityOracleScorer>(&task);
    } else {
      throw UsageError("eval: unsupported scorer '" + scorer_name + "'");
    }
    for (const std::size_t m : m_list) {
      WallClock clock;
      const detail::ComboResult result = detail::run_combo(
          task, gen, *scorer, m, cfg.eval_episodes, eval_seed, &episodes_csv);
      summary_csv << task.id << ',' << m << ',' << scorer_name << ',' << cfg.eval_episodes << ','
                  << io::fmt_double(result.rate) << ',' << io::fmt_double(result.stderr_) << "\n";
      log.append("eval", scorer_name + "_m" + std::to_string(m), result.rate,
                 clock.elapsed_ms());
    }
  }
}

// Table-5 arms plus the RND counter, paired over identical episode seeds.
inline void cmd_ablate(const RunConfig& cfg, bool force) {
  const RunPaths paths(cfg.out_dir);
  if (cfg.policy_kind != "flow") throw UsageError("ablate supports flow policies only");
  require_exists(paths.task_file(), "ablate", "gen-data");
  require_exists(paths.policy_ckpt(), "ablate", "train-policy");
  require_exists(paths.features(), "ablate", "extract-features");
  require_exists(paths.cfn_ckpt(), "ablate", "train-cfn");
  refuse_overwrite(paths.ablation_csv(), force, "ablate");

  const tasks::TaskSpec task = tasks::load_task(paths.task_file());
  const tasks::Dataset data = tasks::load_dataset(paths.dataset());
  const policy::FlowPolicy flow = policy::FlowPolicy::load(paths.policy_ckpt());
  const search::FeatureDataset feats = search::load_feature_dataset(paths.features());
  cfn::CfnNetwork full_cfn = cfn::CfnNetwork::load(paths.cfn_ckpt());

  const std::string digest = cfg.digest();
  MetricsLog log = open_log(cfg, paths);

  // Arm models. The unscaled arm reuses the full arm's training seed so the
  // coin pairing is identical; only the feature scale differs.
  WallClock train_clock;
  cfn::CfnConfig unscaled_cfg = cfg.cfn;
  unscaled_cfg.feature_scale = 1.0;
  cfn::CfnNetwork unscaled =
      cfn::train_cfn(feats.features(), unscaled_cfg, sub_seed(cfg.seed, seed_lane::kCfn));
  unscaled.save(paths.unscaled_cfn_ckpt(), {{"config_digest", digest}});

  nn::Mlp regressor = verify::train_distance_regressor(
      feats, cfg.cfn.hidden_dim, cfg.cfn.epochs, cfg.cfn.batch,
      sub_seed(cfg.seed, seed_lane::kArmRegressor));
  {
    nn::ParamList params;
    regressor.collect_params("regressor", params);
    nn::save_checkpoint(paths.regressor_ckpt(), params,
                        {{"kind", "distance-regressor"},
                         {"config_digest", digest},
                         {"feat_dim", std::to_string(feats.feat_dim)},
                         {"hidden_dim", std::to_string(cfg.cfn.hidden_dim)}});
  }

  Rng raw_rng(sub_seed(cfg.seed, seed_lane::kArmRawEncoder));
  verify::RawEncoderCfn raw_encoder(task.context_dim, task.action_dim, cfg.policy_feat_dim,
                                    cfg.policy_hidden_dim, cfg.cfn, raw_rng);
  raw_encoder.train(data, sub_seed(cfg.seed, seed_lane::kArmRawEncoder));
  {
    auto params = raw_encoder.all_params();
    nn::save_checkpoint(paths.raw_encoder_ckpt(), params,
                        {{"kind", "raw-encoder-cfn"}, {"config_digest", digest}});
  }

  Rng rnd_rng(sub_seed(cfg.seed, seed_lane::kArmRnd));
  cfn::RndCounter rnd(feats.feat_dim, cfn::RndConfig{}, rnd_rng);
  rnd.train(feats.features(), sub_seed(cfg.seed, seed_lane::kArmRnd));
  {
    auto params = rnd.all_params();
    nn::save_checkpoint(paths.rnd_ckpt(), params,
                        {{"kind", "rnd"}, {"config_digest", digest}});
  }
  log.append("ablate", "arm_training_done", 1.0, train_clock.elapsed_ms());

  detail::CandidateGen gen;
  gen.flow = &flow;
  gen.integration_steps = cfg.policy_integration_steps;

  std::ofstream csv(paths.ablation_csv(), std::ios::trunc);
  csv << "# config_digest " << digest << "\n";
  csv << "task,arm,m,episodes,rate,stderr\n";

  const std::uint64_t eval_seed = sub_seed(cfg.seed, seed_lane::kEval);
  const auto run_arm = [&](const std::string& name, const verify::Scorer& scorer) {
    WallClock clock;
    const detail::ComboResult result = detail::run_combo(task, gen, scorer, cfg.ablate_m,
                                                         cfg.ablate_episodes, eval_seed, nullptr);
    csv << task.id << ',' << name << ',' << cfg.ablate_m << ',' << cfg.ablate_episodes << ','
        << io::fmt_double(result.rate) << ',' << io::fmt_double(result.stderr_) << "\n";
    log.append("ablate", name, result.rate, clock.elapsed_ms());
  };

  run_arm("full", verify::CfnScorer(&full_cfn));
  run_arm("wo-cfn", verify::DistanceRegressorScorer(&regressor));
  run_arm("wo-feature-scaling", verify::CfnScorer(&unscaled, "cfn-unscaled"));
  run_arm("wo-internal-feature", verify::RawEncoderScorer(&raw_encoder));
  run_arm("rnd", verify::RndScorer(&rnd));
}

inline std::string candidate_batch_digest(const std::vector<policy::PolicyOutput>& batch) {
  Fnv1a h;
  for (const auto& c : batch) {
    h.update(c.action);
    h.update(c.feature);
  }
  return h.hex();
}

inline void cmd_bench_cache(const RunConfig& cfg) {
  const RunPaths paths(cfg.out_dir);
  if (cfg.policy_kind != "flow") throw UsageError("bench-cache supports flow policies only");
  require_exists(paths.policy_ckpt(), "bench-cache", "train-policy");
  const policy::FlowPolicy flow = policy::FlowPolicy::load(paths.policy_ckpt());
  const std::string digest = cfg.digest();
  std::ofstream csv(paths.bench_csv(), std::ios::trunc);
  csv << "# config_digest " << digest << "\n";
  csv << "m,repetitions,cached_mean_ms,uncached_mean_ms,reduction_pct,cached_encoder_calls,"
         "uncached_encoder_calls\n";
  MetricsLog log = open_log(cfg, paths);
  const std::uint64_t bench_seed = sub_seed(cfg.seed, seed_lane::kBench);
  for (const std::size_t m : cfg.bench_m_list) {
    Rng ctx_rng = Rng(bench_seed).fork(m);
    nn::Vec context(flow.config().context_dim);
    ctx_rng.fill_normal(context);
    double cached_total = 0.0;
    double uncached_total = 0.0;
    std::uint64_t cached_calls = 0;
    std::uint64_t uncached_calls = 0;
    for (std::size_t rep = 0; rep < cfg.bench_repetitions; ++rep) {
      flow.reset_encoder_call_count();
      WallClock cached_clock;
      const auto cached = verify::generate_candidates(flow, context, 0, m,
                                                      cfg.policy_integration_steps, bench_seed);
      cached_total += cached_clock.elapsed_ms();
      cached_calls = flow.encoder_call_count();

      flow.reset_encoder_call_count();
      WallClock uncached_clock;
      const auto uncached = verify::generate_candidates_uncached(
          flow, context, 0, m, cfg.policy_integration_steps, bench_seed);
      uncached_total += uncached_clock.elapsed_ms();
      uncached_calls = flow.encoder_call_count();

      if (candidate_batch_digest(cached) != candidate_batch_digest(uncached))
        throw CacheError("cached and uncached candidate batches differ at M=" +
                         std::to_string(m));
    }
    const double cached_mean = cached_total / static_cast<double>(cfg.bench_repetitions);
    const double uncached_mean = uncached_total / static_cast<double>(cfg.bench_repetitions);
    const double reduction = 100.0 * (1.0 - cached_mean / uncached_mean);
    csv << m << ',' << cfg.bench_repetitions << ',' << io::fmt_double(cached_mean) << ','
        << io::fmt_double(uncached_mean) << ',' << io::fmt_double(reduction) << ','
        << cached_calls << ',' << uncached_calls << "\n";
    log.append("bench-cache", "reduction_pct_m" + std::to_string(m), reduction, 0.0);
  }
}

}  // namespace taco::harness
