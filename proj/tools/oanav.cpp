// oanav: scene generation, closed-loop benchmark runs and offline annotation.

#include "oanav/annotate.hpp"
#include "oanav/bench.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace oanav;

namespace {

std::vector<Variant> parse_variants(const std::string& spec) {
  if (spec == "all") return all_variants();
  std::vector<Variant> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(variant_from_string(tok));
  }
  if (out.empty()) throw Error("no variants given");
  return out;
}

BenchConfig config_or_default(const std::string& path) { return path.empty() ? BenchConfig{} : load_config(path); }

std::vector<NamedScene> load_scene_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedScene> out;
  for (const auto& f : files) out.push_back({f.stem().string(), load_scene(f)});
  if (out.empty()) throw Error("no scene files in " + dir.string());
  return out;
}

int cmd_run(const std::string& scene_path, const std::string& variant, std::uint64_t seed, const fs::path& out,
            const std::string& config) {
  const BenchConfig cfg = config_or_default(config);
  const Scene scene = load_scene(scene_path);
  const std::string name = fs::path(scene_path).stem().string();
  EpisodeLogs logs;
  const EpisodeMetrics m = run_episode(scene, variant_from_string(variant), cfg, seed, &logs, name);
  fs::create_directories(out);
  {
    std::ofstream csv(out / "metrics.csv");
    write_metrics_header(csv);
    write_metrics_row(csv, m);
  }
  write_episode_logs(logs, out);
  std::ofstream(out / "config.json") << config_to_json(cfg).dump(2) << '\n';
  write_metrics_header(std::cout);
  write_metrics_row(std::cout, m);
  return m.success ? 0 : 2;
}

int cmd_batch(const fs::path& scenes_dir, const std::string& variants, const fs::path& out, std::uint64_t seed,
              unsigned threads, bool logs, const std::string& config) {
  const BenchConfig cfg = config_or_default(config);
  const auto scenes = load_scene_dir(scenes_dir);
  BatchOptions opt;
  opt.seed = seed;
  opt.threads = threads;
  opt.write_logs = logs;
  const auto results = run_batch(scenes, parse_variants(variants), cfg, opt, out);
  write_summary_csv(std::cout, summarize(results));
  return 0;
}

int cmd_gen_scenes(int n, const std::string& density, const fs::path& out, std::uint64_t seed) {
  if (n < 1) throw Error("--n must be positive");
  std::vector<NamedScene> scenes;
  if (density == "mixed") {
    const int ns = n / 3;
    const int nm = n / 3;
    scenes = generate_scene_set(ns, nm, n - ns - nm, seed);
  } else {
    scenes = generate_scene_set(density == "sparse" ? n : 0, density == "medium" ? n : 0, density == "dense" ? n : 0,
                                seed);
    if (scenes.empty()) throw Error("unknown density: " + density);
  }
  fs::create_directories(out);
  for (const auto& s : scenes) save_scene(s.scene, out / (s.name + ".json"));
  std::cout << "wrote " << scenes.size() << " scenes to " << out.string() << '\n';
  return 0;
}

int cmd_export_models(const fs::path& out) {
  fs::create_directories(out);
  for (const auto cls : {ObjectClass::Chair, ObjectClass::Table}) {
    std::ofstream(out / (to_string(cls) + ".json")) << model_to_json(make_model(cls, 0)).dump() << '\n';
  }
  std::cout << "wrote chair.json and table.json to " << out.string() << '\n';
  return 0;
}

CadDatabase load_models(const fs::path& dir) {
  std::vector<CadModel> models;
  for (const auto cls : {ObjectClass::Chair, ObjectClass::Table}) {
    const fs::path p = dir / (to_string(cls) + ".json");
    std::ifstream in(p);
    if (!in) throw Error("missing model file " + p.string());
    models.push_back(model_from_json(nlohmann::json::parse(in)));
    if (models.back().cls != cls) throw Error(p.string() + " holds the wrong class");
  }
  return CadDatabase(std::move(models));
}

int cmd_annotate(const std::vector<std::string>& sessions, const fs::path& models, const fs::path& out,
                 const std::string& manual) {
  std::vector<PointCloud> clouds;
  std::vector<std::string> names;
  for (const auto& s : sessions) {
    clouds.push_back(read_oapc(s));
    names.push_back(fs::path(s).filename().string());
  }
  std::vector<ManualBox> boxes;
  if (!manual.empty()) boxes = load_manual_boxes(manual);
  const Annotation a = annotate(clouds, load_models(models), AnnotateConfig{}, boxes);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_annotation(a, names, out);
  int aligned = 0;
  for (const auto& i : a.instances) aligned += i.aligned;
  std::cout << a.instances.size() << " instances (" << aligned << " aligned) -> " << out.string() << '\n';
  return 0;
}

int cmd_sessions(std::uint64_t seed, const fs::path& out) {
  SessionSetConfig cfg;
  cfg.scene.seed = seed;
  const SessionSet set = make_sessions(cfg);
  fs::create_directories(out);
  for (std::size_t s = 0; s < set.scenes.size(); ++s) {
    const std::string tag(1, static_cast<char>('A' + s));
    write_oapc(set.clouds[s], out / (tag + ".oapc"));
    save_scene(set.scenes[s], out / (tag + "_truth.json"));
  }
  std::cout << "wrote " << set.scenes.size() << " sessions to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-affordance-aware navigation toolkit"};
  app.require_subcommand(1);

  std::string scene, variant = "Ours", config;
  std::uint64_t seed = 1;
  std::string out;
  auto* run = app.add_subcommand("run", "Run one closed-loop episode");
  run->add_option("--scene", scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--variant", variant, "Con, Oppo, GT-Perc or Ours");
  run->add_option("--seed", seed, "Episode seed");
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--config", config, "JSON config overriding defaults")->check(CLI::ExistingFile);

  std::string scenes_dir, variants = "all";
  unsigned threads = 0;
  bool logs = false;
  auto* batch = app.add_subcommand("batch", "Run every variant over a directory of scenes");
  batch->add_option("--scenes", scenes_dir, "Directory of scene JSON files")->required();
  batch->add_option("--variants", variants, "'all' or a comma-separated list");
  batch->add_option("--out", out, "Output directory")->required();
  batch->add_option("--seed", seed, "Batch seed");
  batch->add_option("--threads", threads, "Worker threads (0: all cores)");
  batch->add_flag("--logs", logs, "Write per-episode logs and costmaps");
  batch->add_option("--config", config, "JSON config overriding defaults")->check(CLI::ExistingFile);

  int n = 25;
  std::string density = "mixed";
  auto* gen = app.add_subcommand("gen-scenes", "Generate random furnished rooms");
  gen->add_option("--n", n, "Number of scenes");
  gen->add_option("--density", density, "sparse, medium, dense or mixed")
      ->check(CLI::IsMember({"sparse", "medium", "dense", "mixed"}));
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Master seed");

  std::vector<std::string> sessions;
  std::string models, manual;
  auto* ann = app.add_subcommand("annotate", "Label multi-session point clouds");
  ann->add_option("--sessions", sessions, "Session clouds (.oapc), world frame")->required()->expected(2, -1);
  ann->add_option("--models", models, "Directory with chair.json and table.json")->required();
  ann->add_option("--out", out, "Output labels JSON")->required();
  ann->add_option("--manual", manual, "Optional JSON file of manual boxes")->check(CLI::ExistingFile);

  auto* ses = app.add_subcommand("sessions", "Simulate a two-session rearranged room");
  ses->add_option("--seed", seed, "Scene seed");
  ses->add_option("--out", out, "Output directory")->required();

  auto* exp = app.add_subcommand("export-models", "Write the default CAD models as JSON");
  exp->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(scene, variant, seed, out, config);
    if (*batch) return cmd_batch(scenes_dir, variants, out, seed, threads, logs, config);
    if (*gen) return cmd_gen_scenes(n, density, out, seed);
    if (*ann) return cmd_annotate(sessions, models, out, manual);
    if (*ses) return cmd_sessions(seed, out);
    if (*exp) return cmd_export_models(out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
