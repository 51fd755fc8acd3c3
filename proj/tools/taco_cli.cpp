// Pipeline driver: data generation, training stages, evaluation, ablations,
// and the cache benchmark.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "taco/taco.hpp"

namespace {

// Distinct exit codes so scripts can tell failure classes apart.
constexpr int kExitUsage = 64;
constexpr int kExitProvenance = 65;
constexpr int kExitMissingArtifact = 66;
constexpr int kExitNumeric = 70;

void apply_out_root(taco::harness::RunConfig& cfg) {
  const char* root = std::getenv("TACO_OUT_ROOT");
  if (root && *root && std::filesystem::path(cfg.out_dir).is_relative()) {
    cfg.out_dir = (std::filesystem::path(root) / cfg.out_dir).string();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TACO pipeline: generate-then-verify action selection with a pseudo-count verifier"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seed_str;
  std::string out_dir;
  bool force = false;
  app.add_option("--config", config_path, "config file (flat dotted keys)");
  app.add_option("--seed", seed_str, "override run.seed");
  app.add_option("--out", out_dir, "override run.out");
  app.add_flag("--force", force, "overwrite existing stage outputs");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic demonstration dataset");
  auto* train_policy = app.add_subcommand("train-policy", "train the flow (or categorical) policy");
  auto* extract = app.add_subcommand("extract-features", "high-fidelity feature search");
  auto* train_cfn = app.add_subcommand("train-cfn", "train the pseudo-count estimator");
  auto* eval = app.add_subcommand("eval", "success rate per (M, scorer), with baseline and oracle rows");
  auto* ablate = app.add_subcommand("ablate", "verifier ablation arms, paired seeds");
  auto* bench = app.add_subcommand("bench-cache", "cached vs uncached candidate generation timing");
  auto* run_all = app.add_subcommand("run-all", "gen-data through eval in one go");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    taco::harness::RunConfig cfg;
    if (!config_path.empty()) cfg = taco::harness::RunConfig::from_file(config_path);
    if (!seed_str.empty()) cfg.seed = std::stoull(seed_str);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    apply_out_root(cfg);

    const auto run_stage = [&](const char* name, auto&& fn) {
      taco::harness::WallClock clock;
      fn();
      std::cout << "[" << name << "] done in " << static_cast<long>(clock.elapsed_ms()) << " ms, outputs in "
                << cfg.out_dir << "\n";
    };

    if (gen->parsed()) run_stage("gen-data", [&] { taco::harness::cmd_gen_data(cfg, force); });
    if (train_policy->parsed())
      run_stage("train-policy", [&] { taco::harness::cmd_train_policy(cfg, force); });
    if (extract->parsed())
      run_stage("extract-features", [&] { taco::harness::cmd_extract_features(cfg, force); });
    if (train_cfn->parsed())
      run_stage("train-cfn", [&] { taco::harness::cmd_train_cfn(cfg, force); });
    if (eval->parsed()) run_stage("eval", [&] { taco::harness::cmd_eval(cfg, force); });
    if (ablate->parsed()) run_stage("ablate", [&] { taco::harness::cmd_ablate(cfg, force); });
    if (bench->parsed()) run_stage("bench-cache", [&] { taco::harness::cmd_bench_cache(cfg); });
    if (run_all->parsed()) {
      run_stage("gen-data", [&] { taco::harness::cmd_gen_data(cfg, force); });
      run_stage("train-policy", [&] { taco::harness::cmd_train_policy(cfg, force); });
      run_stage("extract-features", [&] { taco::harness::cmd_extract_features(cfg, force); });
      run_stage("train-cfn", [&] { taco::harness::cmd_train_cfn(cfg, force); });
      run_stage("eval", [&] { taco::harness::cmd_eval(cfg, force); });
    }
    return 0;
  } catch (const taco::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const taco::ContractViolation& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const taco::ProvenanceError& e) {
    std::cerr << "provenance error: " << e.what() << "\n";
    return kExitProvenance;
  } catch (const taco::ArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const taco::TrainingError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const taco::SamplingError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const taco::ScoringError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const taco::SearchError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const taco::CacheError& e) {
    std::cerr << "cache equivalence failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
