#include "longrisk/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "longrisk/appconfig.hpp"
#include "longrisk/evaluate.hpp"
#include "longrisk/kernels.hpp"
#include "longrisk/version.hpp"

namespace fs = std::filesystem;

namespace longrisk {

namespace {

constexpr const char* kDefaultScenarios = "0,1*,2*,3*,4*,4+";

struct CohortInput {
  std::vector<SubjectTimeline> timelines;
  std::vector<SubjectTruth> truth;
  CohortConfig config;
  std::string manifest_path;
};

CohortInput load_cohort_input(const std::string& path) {
  CohortInput input;
  if (fs::is_directory(path)) {
    auto arc = load_cohort_archive(path);
    input.timelines = std::move(arc.timelines);
    input.truth = std::move(arc.truth);
    input.config = arc.config;
    input.manifest_path = (fs::path(path) / "manifest.csv").string();
  } else {
    input.timelines = load_manifest(path);
    input.manifest_path = path;
    if (!input.timelines.empty() &&
        input.timelines.front().visits.front().kind == PayloadKind::image) {
      const auto& img = input.timelines.front().visits.front().images[0];
      input.config.image_height = img.height;
      input.config.image_width = img.width;
    }
  }
  if (input.timelines.empty()) {
    throw ValidationError("cohort at '" + path + "' has no subjects");
  }
  return input;
}

ModelConfig base_model_config(const CohortInput& cohort) {
  ModelConfig mcfg;
  mcfg.stub_mode =
      cohort.timelines.front().visits.front().kind == PayloadKind::image
          ? ImageEncoderStub::Mode::random_projection
          : ImageEncoderStub::Mode::passthrough;
  mcfg.image_height = cohort.config.image_height;
  mcfg.image_width = cohort.config.image_width;
  mcfg.norm_mean = cohort.config.norm_mean;
  mcfg.norm_std = cohort.config.norm_std;
  return mcfg;
}

std::vector<std::string> split_list(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, delim)) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// "none", "full", or "d:128,256;heads:1,4;l2:1e-4,1e-5"
std::vector<TrainConfig> parse_grid_spec(const std::string& spec,
                                         const TrainConfig& base) {
  if (spec == "none") return {base};
  if (spec == "full") return full_grid(base);
  std::vector<std::size_t> widths = {base.d_model};
  std::vector<std::size_t> heads = {base.n_heads};
  std::vector<double> l2s = {base.l2};
  for (const auto& part : split_list(spec, ';')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("grid spec '" + spec +
                        "': expected d:.../heads:.../l2:... sections");
    }
    const std::string key = part.substr(0, colon);
    const auto values = split_list(part.substr(colon + 1), ',');
    if (values.empty()) throw ConfigError("grid spec: empty value list for " + key);
    try {
      if (key == "d") {
        widths.clear();
        for (const auto& v : values) widths.push_back(std::stoul(v));
      } else if (key == "heads") {
        heads.clear();
        for (const auto& v : values) heads.push_back(std::stoul(v));
      } else if (key == "l2") {
        l2s.clear();
        for (const auto& v : values) l2s.push_back(std::stod(v));
      } else {
        throw ConfigError("grid spec: unknown section '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("grid spec: cannot parse values in section '" + key + "'");
    }
  }
  std::vector<TrainConfig> grid;
  for (auto d : widths) {
    for (auto h : heads) {
      for (auto l2 : l2s) {
        TrainConfig cfg = base;
        cfg.d_model = d;
        cfg.n_heads = h;
        cfg.l2 = l2;
        cfg.grid_mode = true;
        cfg.validate();  // restricted to the published sets
        grid.push_back(cfg);
      }
    }
  }
  return grid;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

RunManifest make_manifest(const std::string& command, std::uint64_t seed,
                          const CLI::App* sub) {
  RunManifest m;
  m.command = command;
  m.master_seed = seed;
  m.tool_version = std::string(kVersion);
  m.timestamp = iso_timestamp_utc();
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (!opt->results().empty()) {
      cfg[name] = opt->results().size() == 1 ? nlohmann::json(opt->results()[0])
                                             : nlohmann::json(opt->results());
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  m.effective_config = cfg;
  return m;
}

// ---- generate ----

struct GenerateOpts {
  std::string out;
  CohortConfig cohort;
  bool force = false;
  int jobs = 0;
};

int cmd_generate(const GenerateOpts& opts, const CLI::App* sub) {
  kernels::set_threads(opts.jobs);
  opts.cohort.validate();
  const std::string out_dir = resolve_output_dir(opts.out);

  Rng rng(opts.cohort.seed);
  auto cohort = generate_cohort(opts.cohort, rng);
  save_cohort_archive(out_dir, cohort, opts.force);

  auto manifest = make_manifest("generate", opts.cohort.seed, sub);
  manifest.inputs = nlohmann::json::object();
  manifest.outputs = {{"archive", out_dir}};
  manifest.effective_config["cohort"] = opts.cohort.to_json();
  write_run_manifest(out_dir, manifest);

  std::cout << "wrote cohort archive to " << out_dir << "\n"
            << render_summary(summarize_cohort(cohort.timelines));
  return 0;
}

// ---- train ----

struct TrainOpts {
  std::string cohort_path;
  std::string out;
  std::string grid_spec = "none";
  std::string resume_path;
  TrainConfig train;
  bool force = false;
  int jobs = 0;
};

int cmd_train(const TrainOpts& opts, const CLI::App* sub) {
  kernels::set_threads(opts.jobs);
  opts.train.validate();
  if (!opts.resume_path.empty() && opts.grid_spec != "none") {
    throw ConfigError("--resume cannot be combined with a grid search");
  }

  auto cohort = load_cohort_input(opts.cohort_path);
  const ModelConfig base = base_model_config(cohort);
  TrainConfig train_cfg = opts.train;
  train_cfg.grid_mode = opts.grid_spec != "none";
  const auto grid = parse_grid_spec(opts.grid_spec, train_cfg);

  const std::string out_dir = resolve_output_dir(opts.out);
  prepare_output_dir(out_dir, opts.force);

  Rng master(train_cfg.seed);
  Rng split_rng = master.child(0x5137);
  std::vector<std::size_t> all(cohort.timelines.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto [fit_subjects, val_subjects] =
      make_validation_split(cohort.timelines, all, split_rng);

  nlohmann::json ckpt_meta{
      {"train_config", train_cfg.to_json()},
      {"data_fingerprint", fingerprint_file(cohort.manifest_path)},
      {"n_fit_subjects", fit_subjects.size()},
      {"n_val_subjects", val_subjects.size()}};

  TrainState state;
  std::string grid_csv;
  RiskModel best;
  if (grid.size() == 1 && !grid.front().grid_mode) {
    RiskModel warm;
    const RiskModel* warm_ptr = nullptr;
    if (!opts.resume_path.empty()) {
      warm = RiskModel::load(opts.resume_path);
      warm_ptr = &warm;
    }
    auto result = train(grid.front(), base, cohort.timelines, fit_subjects,
                        val_subjects, warm_ptr);
    best = std::move(result.model);
    state = std::move(result.state);
  } else {
    auto searched =
        grid_search(grid, base, cohort.timelines, fit_subjects, val_subjects);
    best = std::move(searched.best_model);
    state = std::move(searched.best_state);
    grid_csv = grid_results_csv(searched);
    ckpt_meta["grid_best_index"] = searched.best_index;
    ckpt_meta["grid_best_config"] =
        searched.points[searched.best_index].config.to_json();
    write_text((fs::path(out_dir) / "grid_results.csv").string(), grid_csv);
  }
  ckpt_meta["best_validation_loss"] = state.best_validation_loss;
  ckpt_meta["epochs_run"] = state.epochs_run;

  const std::string ckpt_path = (fs::path(out_dir) / "model.ckpt").string();
  best.save(ckpt_path, ckpt_meta);

  std::ostringstream log;
  log << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < state.epoch_losses.size(); ++e) {
    log << (e + 1) << "," << state.epoch_losses[e].first << ","
        << state.epoch_losses[e].second << "\n";
  }
  write_text((fs::path(out_dir) / "training_log.csv").string(), log.str());

  auto manifest = make_manifest("train", train_cfg.seed, sub);
  manifest.inputs = {{"cohort", opts.cohort_path}};
  manifest.outputs = {{"checkpoint", ckpt_path}};
  write_run_manifest(out_dir, manifest);

  std::cout << "trained " << grid.size() << " configuration(s); best validation "
            << "loss " << state.best_validation_loss << " at epoch "
            << state.best_epoch << " (" << state.epochs_run << " epochs run)\n"
            << "checkpoint: " << ckpt_path << "\n";
  if (!grid_csv.empty()) {
    std::cout << "grid results: " << (fs::path(out_dir) / "grid_results.csv").string()
              << "\n";
  }
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  std::string checkpoint;
  std::string cohort_path;
  std::string out;
  std::string scenarios = kDefaultScenarios;
  std::size_t repeats = 100;
  std::uint64_t seed = 1;
  bool force = false;
  int jobs = 0;
};

int cmd_evaluate(const EvaluateOpts& opts, const CLI::App* sub) {
  kernels::set_threads(opts.jobs);
  if (opts.repeats == 0) throw ConfigError("--repeats must be positive");
  const auto scenarios = parse_scenarios(opts.scenarios);

  RiskModel model = RiskModel::load(opts.checkpoint);
  auto cohort = load_cohort_input(opts.cohort_path);
  model.check_compatible(cohort.timelines);

  const std::string out_dir = resolve_output_dir(opts.out);
  prepare_output_dir(out_dir, opts.force);

  if (opts.repeats == 1) {
    std::cerr << "warning: single pseudo-test repeat; confidence intervals "
                 "are suppressed\n";
  }

  auto report = evaluate_checkpoint(model, cohort.timelines, scenarios,
                                    opts.repeats, opts.seed);
  report.provenance["checkpoint"] = opts.checkpoint;
  report.provenance["cohort"] = opts.cohort_path;

  const std::string table = report.render_table();
  write_text((fs::path(out_dir) / "report.txt").string(), table);
  write_text((fs::path(out_dir) / "report.json").string(),
             report.to_json().dump(2) + "\n");

  auto manifest = make_manifest("evaluate", opts.seed, sub);
  manifest.inputs = {{"checkpoint", opts.checkpoint}, {"cohort", opts.cohort_path}};
  manifest.outputs = {{"report_table", (fs::path(out_dir) / "report.txt").string()},
                      {"report_json", (fs::path(out_dir) / "report.json").string()}};
  write_run_manifest(out_dir, manifest);

  std::cout << table;
  return 0;
}

// ---- saliency ----

struct SaliencyOpts {
  std::string checkpoint;
  std::string cohort_path;
  std::string out;
  std::string subjects;
  int year = 5;
  bool force = false;
  int jobs = 0;
};

int cmd_saliency(const SaliencyOpts& opts, const CLI::App* sub) {
  kernels::set_threads(opts.jobs);
  if (opts.year < 1 || opts.year > 5) {
    throw ConfigError("--year must be in 1..5");
  }
  const auto wanted = split_list(opts.subjects, ',');
  if (wanted.empty()) throw ConfigError("--subjects: no subject ids given");

  RiskModel model = RiskModel::load(opts.checkpoint);
  auto cohort = load_cohort_input(opts.cohort_path);
  model.check_compatible(cohort.timelines);

  std::vector<std::size_t> indices;
  for (const auto& sid : wanted) {
    bool found = false;
    for (std::size_t i = 0; i < cohort.timelines.size(); ++i) {
      if (cohort.timelines[i].subject_id == sid) {
        indices.push_back(i);
        found = true;
        break;
      }
    }
    if (!found) {
      std::string available;
      for (std::size_t i = 0; i < cohort.timelines.size() && i < 20; ++i) {
        if (i) available += ", ";
        available += cohort.timelines[i].subject_id;
      }
      if (cohort.timelines.size() > 20) available += ", ...";
      throw ValidationError("unknown subject '" + sid +
                            "'; available: " + available);
    }
  }

  const std::string out_dir = resolve_output_dir(opts.out);
  prepare_output_dir(out_dir, opts.force);

  for (auto idx : indices) {
    const auto& tl = cohort.timelines[idx];
    const auto samples = expand_trajectories(tl, static_cast<int>(idx));
    const auto& sample = samples.back();  // richest history
    const auto maps = saliency(model, cohort.timelines, sample, opts.year);
    const auto& now_visit =
        tl.visits[static_cast<std::size_t>(sample.now_visit_index())];
    for (int slot = 0; slot < 4; ++slot) {
      const std::string stem = tl.subject_id + "_" + kSlotNames[slot];
      write_pfm((fs::path(out_dir) / (stem + "_saliency.pfm")).string(),
                maps[slot]);
      write_pfm((fs::path(out_dir) / (stem + "_input.pfm")).string(),
                now_visit.images[slot]);
    }
  }

  auto manifest = make_manifest("saliency", 0, sub);
  manifest.inputs = {{"checkpoint", opts.checkpoint}, {"cohort", opts.cohort_path}};
  manifest.outputs = {{"directory", out_dir}};
  write_run_manifest(out_dir, manifest);

  std::cout << "wrote " << indices.size() * 4 << " saliency maps to " << out_dir
            << "\n";
  return 0;
}

// ---- report (full experiment or re-render) ----

struct ReportOpts {
  std::string cohort_path;
  std::string out;
  std::string render_path;  // re-render mode
  std::string scenarios = kDefaultScenarios;
  std::string grid_spec = "none";
  std::size_t splits = 10;
  std::size_t repeats = 100;
  std::size_t min_successful = 8;
  double train_ratio = 0.8;
  TrainConfig train;
  bool force = false;
  int jobs = 0;
};

int cmd_report(const ReportOpts& opts, const CLI::App* sub) {
  kernels::set_threads(opts.jobs);
  if (!opts.render_path.empty()) {
    std::ifstream in(opts.render_path);
    if (!in) throw IoError("cannot open report: " + opts.render_path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON in " + opts.render_path);
    std::cout << MetricReport::from_json(j).render_table();
    return 0;
  }
  if (opts.cohort_path.empty() || opts.out.empty()) {
    throw ConfigError("report: --cohort and --out are required (or --render)");
  }
  opts.train.validate();

  auto cohort = load_cohort_input(opts.cohort_path);
  ExperimentConfig xcfg;
  xcfg.n_splits = opts.splits;
  xcfg.n_repeats = opts.repeats;
  xcfg.train_ratio = opts.train_ratio;
  xcfg.min_successful_splits = opts.min_successful;
  xcfg.master_seed = opts.train.seed;
  xcfg.scenarios = parse_scenarios(opts.scenarios);
  TrainConfig train_cfg = opts.train;
  train_cfg.grid_mode = opts.grid_spec != "none";
  xcfg.grid = parse_grid_spec(opts.grid_spec, train_cfg);

  const std::string out_dir = resolve_output_dir(opts.out);
  prepare_output_dir(out_dir, opts.force);

  auto report = run_experiment(cohort.timelines, base_model_config(cohort), xcfg);
  report.provenance["cohort"] = opts.cohort_path;

  const std::string table = report.render_table();
  write_text((fs::path(out_dir) / "report.txt").string(), table);
  write_text((fs::path(out_dir) / "report.json").string(),
             report.to_json().dump(2) + "\n");

  auto manifest = make_manifest("report", xcfg.master_seed, sub);
  manifest.inputs = {{"cohort", opts.cohort_path}};
  manifest.outputs = {{"report_table", (fs::path(out_dir) / "report.txt").string()},
                      {"report_json", (fs::path(out_dir) / "report.json").string()}};
  write_run_manifest(out_dir, manifest);

  std::cout << table;
  return 0;
}

void add_train_flags(CLI::App* sub, TrainConfig& cfg) {
  sub->add_option("--lr", cfg.lr, "learning rate")->capture_default_str();
  sub->add_option("--dropout", cfg.dropout, "dropout probability")
      ->capture_default_str();
  sub->add_option("--d-model", cfg.d_model, "embedding width")
      ->capture_default_str();
  sub->add_option("--heads", cfg.n_heads, "attention heads")
      ->capture_default_str();
  sub->add_option("--l2", cfg.l2, "L2 regularization rate")->capture_default_str();
  sub->add_option("--batch", cfg.batch_size, "minibatch size")
      ->capture_default_str();
  sub->add_option("--epochs", cfg.max_epochs, "epoch cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--patience", cfg.patience, "early-stopping patience")
      ->capture_default_str();
  sub->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  sub->add_flag("--train-visit-encoder", cfg.train_visit_encoder,
                "unfreeze the visit-level aggregator");
  sub->add_flag("!--no-history-augment", cfg.history_augmentation,
                "disable random history dropping during training");
  sub->add_option("--history-drop-prob", cfg.history_drop_prob,
                  "per-visit drop probability for history augmentation")
      ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"longitudinal screening risk modeling toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  GenerateOpts gen;
  auto* gen_cmd = app.add_subcommand(
      "generate", "synthesize a screening cohort with a planted temporal signal");
  gen_cmd->set_config("--config", "", "key=value config file");
  gen_cmd->add_option("--out", gen.out, "output archive directory")->required();
  gen_cmd->add_option("--subjects", gen.cohort.n_subjects, "number of subjects")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.cohort.seed, "master seed")
      ->capture_default_str();
  gen_cmd->add_option("--incidence", gen.cohort.incidence,
                      "fraction of subjects receiving a diagnosis")
      ->capture_default_str();
  gen_cmd->add_option("--attendance", gen.cohort.attendance,
                      "annual screening attendance probability")
      ->capture_default_str();
  gen_cmd->add_option("--start-year", gen.cohort.start_year, "first screening year")
      ->capture_default_str();
  gen_cmd->add_option("--years", gen.cohort.n_screening_years,
                      "screening window length")
      ->capture_default_str();
  gen_cmd->add_option("--height", gen.cohort.image_height, "image height")
      ->capture_default_str();
  gen_cmd->add_option("--width", gen.cohort.image_width, "image width")
      ->capture_default_str();
  gen_cmd->add_option("--lesion-base", gen.cohort.signal.lesion_base,
                      "mean baseline lesion amplitude")
      ->capture_default_str();
  gen_cmd->add_option("--lesion-base-sd", gen.cohort.signal.lesion_base_sd,
                      "baseline amplitude spread")
      ->capture_default_str();
  gen_cmd->add_option("--growth", gen.cohort.signal.growth_per_year,
                      "amplitude growth per year before diagnosis")
      ->capture_default_str();
  gen_cmd->add_option("--frame-jitter", gen.cohort.signal.frame_jitter,
                      "per-visit amplitude noise")
      ->capture_default_str();
  gen_cmd->add_option("--pixel-noise", gen.cohort.signal.pixel_noise,
                      "background pixel noise")
      ->capture_default_str();
  gen_cmd->add_flag("--force", gen.force, "overwrite a non-empty output directory");
  gen_cmd->add_option("--jobs", gen.jobs, "parallel worker threads");

  TrainOpts tr;
  auto* train_cmd =
      app.add_subcommand("train", "train a risk model on a cohort archive");
  train_cmd->set_config("--config", "", "key=value config file");
  train_cmd->add_option("--cohort", tr.cohort_path, "cohort archive or manifest")
      ->required();
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--grid", tr.grid_spec,
                        "'none', 'full' (27 points) or d:...;heads:...;l2:...")
      ->capture_default_str();
  train_cmd->add_option("--resume", tr.resume_path,
                        "warm-start from an existing checkpoint");
  add_train_flags(train_cmd, tr.train);
  train_cmd->add_flag("--force", tr.force, "overwrite a non-empty output directory");
  train_cmd->add_option("--jobs", tr.jobs, "parallel worker threads");

  EvaluateOpts ev;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "score a checkpoint under history-availability scenarios");
  eval_cmd->set_config("--config", "", "key=value config file");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")
      ->required();
  eval_cmd->add_option("--cohort", ev.cohort_path, "cohort archive or manifest")
      ->required();
  eval_cmd->add_option("--out", ev.out, "output directory")->required();
  eval_cmd->add_option("--scenarios", ev.scenarios,
                       "comma list, e.g. 0,1*,2*,3*,4*,4+")
      ->capture_default_str();
  eval_cmd->add_option("--repeats", ev.repeats, "pseudo test sets per cell")
      ->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "resampling seed")->capture_default_str();
  eval_cmd->add_flag("--force", ev.force, "overwrite a non-empty output directory");
  eval_cmd->add_option("--jobs", ev.jobs, "parallel worker threads");

  SaliencyOpts sal;
  auto* sal_cmd = app.add_subcommand(
      "saliency", "pixel-gradient maps for selected subjects");
  sal_cmd->set_config("--config", "", "key=value config file");
  sal_cmd->add_option("--checkpoint", sal.checkpoint, "trained checkpoint")
      ->required();
  sal_cmd->add_option("--cohort", sal.cohort_path, "image-mode cohort archive")
      ->required();
  sal_cmd->add_option("--out", sal.out, "output directory")->required();
  sal_cmd->add_option("--subjects", sal.subjects, "comma list of subject ids")
      ->required();
  sal_cmd->add_option("--year", sal.year, "follow-up year to explain")
      ->capture_default_str();
  sal_cmd->add_flag("--force", sal.force, "overwrite a non-empty output directory");
  sal_cmd->add_option("--jobs", sal.jobs, "parallel worker threads");

  ReportOpts rep;
  auto* rep_cmd = app.add_subcommand(
      "report", "full repeated-split experiment producing the scenario table");
  rep_cmd->set_config("--config", "", "key=value config file");
  rep_cmd->add_option("--cohort", rep.cohort_path, "cohort archive or manifest");
  rep_cmd->add_option("--out", rep.out, "output directory");
  rep_cmd->add_option("--render", rep.render_path,
                      "re-render a stored report.json instead of running");
  rep_cmd->add_option("--scenarios", rep.scenarios, "comma list of scenarios")
      ->capture_default_str();
  rep_cmd->add_option("--splits", rep.splits, "number of train/test splits")
      ->capture_default_str();
  rep_cmd->add_option("--repeats", rep.repeats, "pseudo test sets per cell")
      ->capture_default_str();
  rep_cmd->add_option("--min-successful", rep.min_successful,
                      "minimum successful splits")
      ->capture_default_str();
  rep_cmd->add_option("--train-ratio", rep.train_ratio, "train fraction per split")
      ->capture_default_str();
  rep_cmd->add_option("--grid", rep.grid_spec, "grid spec (see train)")
      ->capture_default_str();
  add_train_flags(rep_cmd, rep.train);
  rep_cmd->add_flag("--force", rep.force, "overwrite a non-empty output directory");
  rep_cmd->add_option("--jobs", rep.jobs, "parallel worker threads");

  std::vector<const char*> argv;
  argv.push_back("longrisk");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (gen_cmd->parsed()) return cmd_generate(gen, gen_cmd);
    if (train_cmd->parsed()) return cmd_train(tr, train_cmd);
    if (eval_cmd->parsed()) return cmd_evaluate(ev, eval_cmd);
    if (sal_cmd->parsed()) return cmd_saliency(sal, sal_cmd);
    if (rep_cmd->parsed()) return cmd_report(rep, rep_cmd);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::usage:
        return 1;
      case ErrorKind::data:
        return 2;
      case ErrorKind::numeric:
        return 3;
    }
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace longrisk
