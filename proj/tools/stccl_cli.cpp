// Copyright 2026 The STCCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "stccl/analysis.hpp"
#include "stccl/checkpoint_io.hpp"
#include "stccl/config.hpp"
#include "stccl/container.hpp"
#include "stccl/corpus.hpp"
#include "stccl/dataset.hpp"
#include "stccl/demo.hpp"
#include "stccl/errors.hpp"

namespace fs = std::filesystem;
using namespace stccl;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  out << text;
}

RunConfig load_config(const std::string& config_path, const std::string& profile) {
  RunConfig base = profile == "paper" ? RunConfig::paper() : RunConfig::desk();
  if (config_path.empty()) return base;
  return RunConfig::load(config_path, std::move(base));
}

std::string cache_dir() {
  const char* dir = std::getenv("STCCL_CACHE_DIR");
  return dir ? dir : "";
}

PairManifest manifest_for(const CorpusIndex& corpus) {
  const std::string cache = cache_dir();
  if (!cache.empty()) {
    const std::string key =
        (fs::path(cache) / ("pairs-" + corpus_fingerprint(corpus.root()) + ".jsonl")).string();
    if (fs::exists(key)) return load_manifest(key);
    PairManifest manifest = build_pair_manifest(corpus);
    std::error_code ec;
    fs::create_directories(cache, ec);
    if (!ec) save_manifest(manifest, key);
    return manifest;
  }
  return build_pair_manifest(corpus);
}

int cmd_generate(const std::string& config_path, const std::string& profile,
                 const std::string& out_dir, std::int64_t seed_override) {
  RunConfig cfg = load_config(config_path, profile);
  if (seed_override >= 0) cfg.corpus.seed = static_cast<std::uint64_t>(seed_override);
  const std::string fingerprint = generate_corpus(cfg.corpus, out_dir);
  nlohmann::ordered_json out;
  out["fingerprint"] = fingerprint;
  out["path"] = out_dir;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_pair(const std::string& corpus_dir, const std::string& out_path) {
  CorpusIndex corpus = CorpusIndex::load(corpus_dir);
  PairManifest manifest = manifest_for(corpus);
  save_manifest(manifest, out_path);
  nlohmann::ordered_json out;
  out["pairs"] = manifest.size();
  out["path"] = out_path;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_train_metric(const std::string& config_path, const std::string& profile,
                     const std::string& corpus_dir, const std::string& pairs_path,
                     const std::string& out_path, std::int64_t seed_override,
                     const std::string& mechanism_override) {
  RunConfig cfg = load_config(config_path, profile);
  if (seed_override >= 0) cfg.metric.seed = static_cast<std::uint64_t>(seed_override);
  if (!mechanism_override.empty()) {
    if (mechanism_override == "vd") cfg.metric.mechanism = Mechanism::kVisualDisparity;
    else if (mechanism_override == "cm") cfg.metric.mechanism = Mechanism::kCorrelationMatrix;
    else throw ConfigError("--mechanism must be vd or cm");
  }

  CorpusIndex corpus = CorpusIndex::load(corpus_dir);
  PairManifest manifest =
      pairs_path.empty() ? manifest_for(corpus) : load_manifest(pairs_path);
  PairedDataset dataset = build_aligned_pairs(corpus, manifest);
  const std::string fingerprint = corpus_fingerprint(corpus_dir);

  BackboneSpec spec = cfg.backbone;
  spec.input_h = corpus.image_size();
  spec.input_w = corpus.image_size();

  std::vector<EpochStats> curve;
  MetricCheckpoint ckpt = train_metric(dataset, spec, cfg.metric, &curve, fingerprint);
  save_checkpoint(ckpt, out_path);

  std::ostringstream curve_csv;
  curve_csv << "epoch,L_sccl,L_tccl,L_stccl\n";
  for (const EpochStats& row : curve) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", row.epoch, row.sccl, row.tccl,
                  row.stccl);
    curve_csv << buf;
  }
  write_text(out_path + ".curve.csv", curve_csv.str());

  nlohmann::ordered_json out;
  out["checkpoint"] = out_path;
  out["hash"] = file_hash_hex(out_path);
  out["epochs"] = cfg.metric.epochs;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& profile,
                const std::string& corpus_dir, const std::string& ckpt_path, bool untrained,
                const std::string& mechanism_name, const std::string& pairs_path,
                const std::string& out_prefix, int budget, std::int64_t seed) {
  RunConfig cfg = load_config(config_path, profile);
  CorpusIndex corpus = CorpusIndex::load(corpus_dir);
  PairManifest manifest =
      pairs_path.empty() ? manifest_for(corpus) : load_manifest(pairs_path);
  PairedDataset dataset = build_aligned_pairs(corpus, manifest);

  MetricCheckpoint ckpt;
  bool use_projection = false;
  if (untrained) {
    Mechanism mechanism = cfg.metric.mechanism;
    if (!mechanism_name.empty()) {
      mechanism = mechanism_name == "cm" ? Mechanism::kCorrelationMatrix
                                         : Mechanism::kVisualDisparity;
    }
    BackboneSpec spec = cfg.backbone;
    spec.input_h = corpus.image_size();
    spec.input_w = corpus.image_size();
    ckpt = make_untrained_checkpoint(spec, mechanism, cfg.metric.correlation,
                                     cfg.metric.contrastive, cfg.metric.caas, cfg.metric.head,
                                     cfg.metric.seed);
  } else {
    if (ckpt_path.empty()) throw ArgumentError("analyze needs --ckpt or --untrained");
    ckpt = load_checkpoint(ckpt_path);
    use_projection = true;
  }

  AnalysisConfig acfg;
  acfg.sample_budget = budget;
  acfg.seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : 5;
  SimilarityStats stats = similarity_stats(dataset, ckpt, use_projection, acfg);

  const std::vector<SimilarityStats> list{stats};
  write_text(out_prefix + ".json", report_json(list));
  write_text(out_prefix + ".csv", report_csv(list));
  write_text(out_prefix + ".dat", histogram_dat(list));

  nlohmann::ordered_json out;
  out["report"] = out_prefix + ".{json,csv,dat}";
  for (int d = 0; d < 2; ++d) {
    for (int level = 1; level <= 4; ++level) {
      const CellStats& c = stats.cell(d == 0 ? Domain::kSpatial : Domain::kTemporal, level);
      nlohmann::ordered_json cell;
      cell["domain"] = d == 0 ? "spatial" : "temporal";
      cell["level"] = level;
      cell["mean_pos"] = c.mean_pos();
      cell["mean_neg"] = c.mean_neg();
      cell["gap"] = c.gap();
      out["cells"].push_back(cell);
    }
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& profile,
                   const std::string& corpus_dir, const std::string& ckpt_path,
                   const std::string& variant_name, const std::string& seeds_arg,
                   const std::string& out_dir, int jobs) {
  RunConfig cfg = load_config(config_path, profile);
  CorpusIndex corpus = CorpusIndex::load(corpus_dir);

  MetricCheckpoint ckpt;
  const MetricCheckpoint* ckpt_ptr = nullptr;
  if (!ckpt_path.empty()) {
    ckpt = load_checkpoint(ckpt_path);
    ckpt_ptr = &ckpt;
  }

  if (!seeds_arg.empty()) {
    cfg.experiment.seeds.clear();
    std::istringstream is(seeds_arg);
    std::string token;
    while (std::getline(is, token, ',')) {
      cfg.experiment.seeds.push_back(std::stoull(token));
    }
  }

  std::vector<Variant> variants;
  if (variant_name == "all") {
    variants = all_variants();
  } else {
    variants = {parse_variant(variant_name)};
  }
  for (Variant v : variants) {
    if (v != Variant::kBaseline && ckpt_ptr == nullptr) {
      throw ArgumentError("variant " + std::string(to_string(v)) + " needs --ckpt",
                          "missing_checkpoint");
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output dir: " + out_dir);

  std::vector<ExperimentRow> rows;
  for (Variant v : variants) {
    ExperimentConfig run_cfg = cfg.experiment;
    run_cfg.variant = v;
    std::vector<ExperimentRow> part = run_experiment(corpus, ckpt_ptr, run_cfg, jobs);
    rows.insert(rows.end(), part.begin(), part.end());

    nlohmann::ordered_json job_meta;
    job_meta["variant"] = to_string(v);
    job_meta["seeds"] = run_cfg.seeds;
    job_meta["epochs"] = run_cfg.epochs;
    job_meta["lambda_stccl"] = run_cfg.lambda_stccl;
    job_meta["checkpoint"] = ckpt_path;
    std::string tag = to_string(v);
    for (char& c : tag) {
      if (c == '+') c = '_';
    }
    write_text((fs::path(out_dir) / ("job-" + tag + ".json")).string(), job_meta.dump(2) + "\n");
  }
  write_text((fs::path(out_dir) / "results.csv").string(), results_csv(rows));

  nlohmann::ordered_json out;
  out["results"] = (fs::path(out_dir) / "results.csv").string();
  out["rows"] = rows.size();
  if (variant_name == "all") {
    const TrendReport trends = evaluate_trends(rows);
    out["trend_improvement"] = trends.improvement_ok ? "pass" : "fail";
    out["trend_ablation"] = trends.ablation_ok ? "pass" : "fail";
    out["trend_caas"] = trends.caas_ok ? "pass" : "fail";
    std::cerr << "trend improvement (stccl+caas vs baseline): "
              << (trends.improvement_ok ? "pass" : "fail") << "\n"
              << "trend ablation (stccl vs sccl/tccl):        "
              << (trends.ablation_ok ? "pass" : "fail") << "\n"
              << "trend caas (stccl+caas vs stccl):           "
              << (trends.caas_ok ? "pass" : "fail") << "\n";
  }
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STCCL supervision toolkit"};
  app.require_subcommand(1);

  std::string config_path, profile = "desk", out_path, corpus_dir, pairs_path, ckpt_path;
  std::string mechanism, variant = "baseline", seeds;
  std::int64_t seed = -1;
  int budget = 10000, jobs = 1;
  bool untrained = false;

  auto* generate = app.add_subcommand("generate", "render the synthetic paired corpus");
  generate->add_option("--config", config_path);
  generate->add_option("--profile", profile)->check(CLI::IsMember({"desk", "paper"}));
  generate->add_option("--out", out_path)->required();
  generate->add_option("--seed", seed);

  auto* pair = app.add_subcommand("pair", "DTW-align renditions into a pair manifest");
  pair->add_option("--corpus", corpus_dir)->required();
  pair->add_option("--out", out_path)->required();

  auto* train = app.add_subcommand("train-metric", "train the correlation metric");
  train->add_option("--config", config_path);
  train->add_option("--profile", profile)->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--corpus", corpus_dir)->required();
  train->add_option("--pairs", pairs_path);
  train->add_option("--out", out_path)->required();
  train->add_option("--seed", seed);
  train->add_option("--mechanism", mechanism)->check(CLI::IsMember({"vd", "cm"}));

  auto* analyze = app.add_subcommand("analyze", "positive/negative similarity statistics");
  analyze->add_option("--config", config_path);
  analyze->add_option("--profile", profile)->check(CLI::IsMember({"desk", "paper"}));
  analyze->add_option("--corpus", corpus_dir)->required();
  analyze->add_option("--ckpt", ckpt_path);
  analyze->add_flag("--untrained", untrained);
  analyze->add_option("--mechanism", mechanism)->check(CLI::IsMember({"vd", "cm"}));
  analyze->add_option("--pairs", pairs_path);
  analyze->add_option("--out", out_path)->required();
  analyze->add_option("--budget", budget);
  analyze->add_option("--seed", seed);

  auto* experiment = app.add_subcommand("experiment", "toy translator ablation runs");
  experiment->add_option("--config", config_path);
  experiment->add_option("--profile", profile)->check(CLI::IsMember({"desk", "paper"}));
  experiment->add_option("--corpus", corpus_dir)->required();
  experiment->add_option("--ckpt", ckpt_path);
  experiment->add_option("--variant", variant);
  experiment->add_option("--seeds", seeds);
  experiment->add_option("--out", out_path)->required();
  experiment->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    nlohmann::ordered_json err;
    err["error"] = "usage";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 2;
  }

  try {
    if (generate->parsed()) return cmd_generate(config_path, profile, out_path, seed);
    if (pair->parsed()) return cmd_pair(corpus_dir, out_path);
    if (train->parsed()) {
      return cmd_train_metric(config_path, profile, corpus_dir, pairs_path, out_path, seed,
                              mechanism);
    }
    if (analyze->parsed()) {
      return cmd_analyze(config_path, profile, corpus_dir, ckpt_path, untrained, mechanism,
                         pairs_path, out_path, budget, seed);
    }
    if (experiment->parsed()) {
      return cmd_experiment(config_path, profile, corpus_dir, ckpt_path, variant, seeds, out_path,
                            jobs);
    }
  } catch (const Error& e) {
    nlohmann::ordered_json err;
    err["error"] = e.code();
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    nlohmann::ordered_json err;
    err["error"] = "runtime";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 3;
  }
  return 0;
}
