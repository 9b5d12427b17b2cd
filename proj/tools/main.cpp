#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <tuple>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mireg/pipeline.hpp"
#include "mireg/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

mireg::PipelineConfig resolve_config(const std::string& config_path,
                                     const std::vector<std::string>& overrides) {
  mireg::PipelineConfig config;
  if (!config_path.empty()) config = mireg::parse_config_file(config_path);
  for (const std::string& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + entry + "'");
    std::string key = entry.substr(0, eq);
    std::string value = entry.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    mireg::apply_config_entry(config, key, value);
  }
  config.validate();
  return config;
}

void write_timing_json(const std::string& path, double total_ms) {
  nlohmann::json doc{{"format", "mireg.timing.v1"}, {"total_ms", total_ms}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
}

struct SynthArgs {
  std::string out;
  int instances = 4;
  int points = 20000;
  double noise = 0.0;
  double outliers = 0.0;
  double occlusion = 0.0;
  double margin = 0.15;
  std::uint64_t seed = 0;
  std::string model_id = "model";
};

void run_synth(const SynthArgs& args) {
  const mireg::PointCloud model =
      mireg::make_test_model(args.points, mireg::splitmix64(args.seed ^ 0x6d6f64656cULL));
  mireg::SceneConfig scfg;
  scfg.instances = args.instances;
  scfg.noise_sigma = args.noise;
  scfg.outlier_fraction = args.outliers;
  scfg.occlusion_fraction = args.occlusion;
  scfg.margin = args.margin;
  scfg.model_id = args.model_id;
  const mireg::GeneratedScene scene = mireg::generate_scene(model, scfg, args.seed);
  mireg::SceneBundle bundle;
  bundle.model = model;
  bundle.target = scene.target;
  bundle.annotation = scene.annotation;
  mireg::save_scene_bundle(bundle, args.out);
  std::cout << "scene: " << bundle.target.size() << " points, " << args.instances
            << " instances -> " << args.out << "\n";
}

struct RunArgs {
  std::string scene;
  std::string out;
  std::string config_path;
  std::vector<std::string> overrides;
};

void run_register(const RunArgs& args, bool baseline) {
  const mireg::PipelineConfig config = resolve_config(args.config_path, args.overrides);
  const mireg::SceneBundle bundle = mireg::load_scene_bundle(args.scene);
  std::filesystem::create_directories(args.out);
  const auto start = Clock::now();
  const mireg::RegistrationResult result =
      baseline ? mireg::run_baseline(bundle, config) : mireg::run_pipeline(bundle, config);
  const double ms = elapsed_ms(start);
  mireg::write_results_json(result, config, args.out + "/results.json");
  write_timing_json(args.out + "/timing.json", ms);
  std::cout << (baseline ? "baseline" : "pipeline") << ": " << result.instances.size()
            << " instances, d_op=" << result.d_op << " -> " << args.out << "/results.json\n";
}

struct EvalArgs {
  std::string scene;
  std::string results;
  std::string out;
  std::string profile = "welding";
};

void run_eval(const EvalArgs& args) {
  const mireg::SceneBundle bundle = mireg::load_scene_bundle(args.scene, true);
  const std::vector<mireg::PoseCandidate> instances = mireg::load_results_json(args.results);
  std::vector<mireg::RigidTransform> transforms;
  for (const mireg::PoseCandidate& c : instances) transforms.push_back(c.transform);
  const mireg::SuccessProfile profile = mireg::profile_by_name(args.profile);
  const mireg::EvalOutput eval =
      mireg::evaluate_instances(transforms, bundle.annotation, profile);
  if (!args.out.empty()) {
    std::filesystem::create_directories(args.out);
    mireg::write_report_json(eval, profile, args.out + "/report.json");
    mireg::write_report_csv(eval, args.out + "/report.csv");
  }
  const mireg::PairCounts& counts = eval.report.per_pair.front();
  std::printf("matched=%d predicted=%d ground_truth=%d MR=%.4f MP=%.4f MF=%.4f\n",
              counts.matched, counts.predicted, counts.ground_truth, eval.report.mr,
              eval.report.mp, eval.report.mf);
}

struct BenchArgs {
  std::string out;
  int seeds = 3;
  std::string instances = "2,4,6,8";
  std::string corruption = "1.0,0.7";
  int points = 8000;
  double noise = 0.0;
  double outliers = 0.0;
  int threads = 0;
  std::string config_path;
  std::vector<std::string> overrides;
};

struct BenchRow {
  std::uint64_t seed;
  int instances;
  double ratio;
  std::string method;
  int predicted, matched, ground_truth;
  double mr, mp, mf;
  double ms;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw std::invalid_argument("empty list: '" + text + "'");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("empty list: '" + text + "'");
  return out;
}

void run_bench(const BenchArgs& args) {
  const mireg::PipelineConfig base_config = resolve_config(args.config_path, args.overrides);
  const std::vector<int> instance_counts = parse_int_list(args.instances);
  const std::vector<double> ratios = parse_double_list(args.corruption);
  if (args.seeds < 1) throw std::invalid_argument("--seeds must be positive");

  struct Job {
    std::uint64_t seed;
    int instances;
    double ratio;
  };
  std::vector<Job> jobs;
  for (int s = 0; s < args.seeds; ++s)
    for (int n : instance_counts)
      for (double r : ratios)
        jobs.push_back({base_config.seed + static_cast<std::uint64_t>(s), n, r});

  std::vector<std::vector<BenchRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      const Job& job = jobs[idx];
      const std::uint64_t scene_seed =
          mireg::splitmix64(job.seed * 0x9e3779b97f4a7c15ULL ^
                            static_cast<std::uint64_t>(job.instances * 1000003 +
                                                       static_cast<int>(job.ratio * 1000)));
      const mireg::PointCloud model =
          mireg::make_test_model(args.points, mireg::splitmix64(scene_seed ^ 0x6d6f64656cULL));
      mireg::SceneConfig scfg;
      scfg.instances = job.instances;
      scfg.noise_sigma = args.noise;
      scfg.outlier_fraction = args.outliers;
      const mireg::GeneratedScene scene = mireg::generate_scene(model, scfg, scene_seed);
      mireg::SceneBundle bundle;
      bundle.model = model;
      bundle.target = scene.target;
      bundle.annotation = scene.annotation;

      mireg::PipelineConfig config = base_config;
      config.seed = scene_seed;
      config.inlier_ratio = job.ratio;
      const mireg::SuccessProfile profile = mireg::profile_by_name(config.profile);

      for (const bool baseline : {false, true}) {
        const auto start = Clock::now();
        const mireg::RegistrationResult result =
            baseline ? mireg::run_baseline(bundle, config) : mireg::run_pipeline(bundle, config);
        const double ms = elapsed_ms(start);
        std::vector<mireg::RigidTransform> transforms;
        for (const mireg::PoseCandidate& c : result.instances)
          transforms.push_back(c.transform);
        const mireg::EvalOutput eval =
            mireg::evaluate_instances(transforms, bundle.annotation, profile);
        const mireg::PairCounts& counts = eval.report.per_pair.front();
        results[idx].push_back({job.seed, job.instances, job.ratio,
                                baseline ? "baseline" : "pipeline", counts.predicted,
                                counts.matched, counts.ground_truth, eval.report.mr,
                                eval.report.mp, eval.report.mf, ms});
      }
    }
  };

  int n_threads = args.threads;
  if (n_threads <= 0)
    n_threads = static_cast<int>(
        std::min<std::size_t>(jobs.size(), std::max(1u, std::thread::hardware_concurrency())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  std::vector<BenchRow> rows;
  for (const auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    if (a.instances != b.instances) return a.instances < b.instances;
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    return a.method < b.method;
  });

  std::filesystem::create_directories(args.out);
  {
    std::ofstream csv(args.out + "/bench.csv");
    if (!csv) throw std::runtime_error("cannot open bench.csv for writing");
    csv << "seed,instances,inlier_ratio,method,predicted,matched,ground_truth,mr,mp,mf\n";
    csv.precision(17);
    for (const BenchRow& r : rows)
      csv << r.seed << ',' << r.instances << ',' << r.ratio << ',' << r.method << ','
          << r.predicted << ',' << r.matched << ',' << r.ground_truth << ',' << r.mr << ','
          << r.mp << ',' << r.mf << '\n';
  }
  {
    // aggregate over seeds per (instances, ratio, method)
    std::map<std::tuple<int, double, std::string>, std::vector<const BenchRow*>> groups;
    for (const BenchRow& r : rows) groups[{r.instances, r.ratio, r.method}].push_back(&r);
    std::ofstream csv(args.out + "/bench_summary.csv");
    if (!csv) throw std::runtime_error("cannot open bench_summary.csv for writing");
    csv << "instances,inlier_ratio,method,runs,mean_mr,mean_mp,mean_mf\n";
    csv.precision(17);
    for (const auto& [key, members] : groups) {
      double mr = 0, mp = 0, mf = 0;
      for (const BenchRow* r : members) {
        mr += r->mr;
        mp += r->mp;
        mf += r->mf;
      }
      const double n = static_cast<double>(members.size());
      csv << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
          << members.size() << ',' << mr / n << ',' << mp / n << ',' << mf / n << '\n';
    }
  }
  {
    std::ofstream csv(args.out + "/bench_timing.csv");
    if (!csv) throw std::runtime_error("cannot open bench_timing.csv for writing");
    csv << "seed,instances,inlier_ratio,method,ms\n";
    csv.precision(6);
    for (const BenchRow& r : rows)
      csv << r.seed << ',' << r.instances << ',' << r.ratio << ',' << r.method << ',' << r.ms
          << '\n';
  }
  std::cout << "bench: " << rows.size() << " rows -> " << args.out << "/bench.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-instance rigid point-cloud registration"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic annotated scene");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--instances", synth.instances, "instance count");
  synth_cmd->add_option("--points", synth.points, "model point count");
  synth_cmd->add_option("--noise", synth.noise, "per-point noise sigma");
  synth_cmd->add_option("--outliers", synth.outliers, "outlier fraction");
  synth_cmd->add_option("--occlusion", synth.occlusion, "occluded fraction per instance");
  synth_cmd->add_option("--margin", synth.margin, "separation margin");
  synth_cmd->add_option("--seed", synth.seed, "scene seed");
  synth_cmd->add_option("--model-id", synth.model_id, "model identifier");

  RunArgs reg, base;
  CLI::App* reg_cmd = app.add_subcommand("register", "run the registration pipeline");
  reg_cmd->add_option("--scene", reg.scene, "scene directory")->required();
  reg_cmd->add_option("--out", reg.out, "output directory")->required();
  reg_cmd->add_option("--config", reg.config_path, "config file");
  reg_cmd->add_option("--set", reg.overrides, "override one config key (key=value)");

  CLI::App* base_cmd = app.add_subcommand("baseline", "run the consensus baseline");
  base_cmd->add_option("--scene", base.scene, "scene directory")->required();
  base_cmd->add_option("--out", base.out, "output directory")->required();
  base_cmd->add_option("--config", base.config_path, "config file");
  base_cmd->add_option("--set", base.overrides, "override one config key (key=value)");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score results against the annotation");
  eval_cmd->add_option("--scene", eval.scene, "scene directory")->required();
  eval_cmd->add_option("--results", eval.results, "results.json path")->required();
  eval_cmd->add_option("--out", eval.out, "report output directory");
  eval_cmd->add_option("--profile", eval.profile, "success profile (welding | scan2cad)");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "pipeline/baseline grid comparison");
  bench_cmd->add_option("--out", bench.out, "output directory")->required();
  bench_cmd->add_option("--seeds", bench.seeds, "seeds per cell");
  bench_cmd->add_option("--instances", bench.instances, "comma-separated instance counts");
  bench_cmd->add_option("--corruption", bench.corruption, "comma-separated inlier ratios");
  bench_cmd->add_option("--points", bench.points, "model point count");
  bench_cmd->add_option("--noise", bench.noise, "per-point noise sigma");
  bench_cmd->add_option("--outliers", bench.outliers, "outlier fraction");
  bench_cmd->add_option("--threads", bench.threads, "worker threads (0 = auto)");
  bench_cmd->add_option("--config", bench.config_path, "config file");
  bench_cmd->add_option("--set", bench.overrides, "override one config key (key=value)");

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) run_synth(synth);
    if (reg_cmd->parsed()) run_register(reg, false);
    if (base_cmd->parsed()) run_register(base, true);
    if (eval_cmd->parsed()) run_eval(eval);
    if (bench_cmd->parsed()) run_bench(bench);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
