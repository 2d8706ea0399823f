// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "gnv/error.hpp"
#include "gnv/gradient_suite.hpp"
#include "gnv/image.hpp"
#include "gnv/run_config.hpp"
#include "gnv/synthdata.hpp"
#include "gnv/workflow.hpp"

namespace gnv::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
};

struct TrainOptions {
  std::string dataset;
  std::string resume;
  std::optional<std::size_t> iterations;
  std::string pretrained;
  std::string load_mask;
};

struct ViewOptions {
  std::string dataset;
  std::string checkpoint;
  std::size_t subject = 0;
  std::size_t frame = 0;
  std::size_t camera = 1;
  std::optional<double> time;
  std::string output;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.out = g.out;
  return c;
}

void print_eval(std::ostream& out, std::size_t iteration, const EvalReport& r) {
  out << "eval iter " << iteration << ": psnr " << std::fixed << std::setprecision(3) << r.mean.psnr << " ssim "
      << std::setprecision(4) << r.mean.ssim << " over " << r.frames.size() << " images\n";
  out.unsetf(std::ios::floatfield);
}

int cmd_gen_data(const GlobalOptions& g, const std::string& dataset_override, std::optional<std::size_t> subjects,
                 std::ostream& out) {
  RunConfig c = resolve_config(g);
  if (!dataset_override.empty()) c.dataset = dataset_override;
  GenDataConfig gen = c.gen_data;
  if (subjects) gen.subjects = *subjects;
  if (g.seed) gen.seed = *g.seed;
  const auto subs = make_subjects(gen.subjects, gen.seed);
  generate_dataset(subs, gen.spec, c.dataset);
  out << "wrote " << gen.subjects << " subjects (" << gen.spec.frames << " frames, " << gen.spec.cameras
      << " cameras) to " << c.dataset.string() << "\n";
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, Phase phase, const TrainOptions& t, std::ostream& out) {
  RunConfig c = resolve_config(g);
  if (!t.dataset.empty()) c.dataset = t.dataset;
  if (t.iterations) {
    if (*t.iterations == 0) throw ConfigError("--iterations must be positive");
    switch (phase) {
      case Phase::kPretrain:
        c.pretrain_iterations = *t.iterations;
        break;
      case Phase::kScratch:
        c.scratch_iterations = *t.iterations;
        break;
      case Phase::kFinetune:
        c.finetune_iterations = *t.iterations;
        break;
    }
  }
  if (!t.pretrained.empty()) c.pretrained = t.pretrained;
  if (!t.load_mask.empty()) c.load_mask = LoadMask::parse(t.load_mask);
  const Experiment ex(c);
  PhaseOptions opts;
  if (!t.resume.empty()) opts.resume = fs::path(t.resume);
  const std::size_t total = c.iterations_for(phase);
  const std::size_t report_every = std::max<std::size_t>(1, total / 20);
  opts.on_step = [&](const StepRecord& r) {
    if ((r.iteration + 1) % report_every == 0) {
      out << phase_name(phase) << " " << r.iteration + 1 << "/" << total << " loss " << r.loss << " mse " << r.mse
          << "\n";
    }
  };
  opts.on_eval = [&](const EvalPoint& p) { print_eval(out, p.iteration, p.report); };
  const PhaseResult res = run_phase(ex, phase, opts);
  out << "checkpoint " << res.final_checkpoint.string() << "\n";
  return kExitOk;
}

Experiment view_experiment(const GlobalOptions& g, const ViewOptions& v) {
  RunConfig c = resolve_config(g);
  if (!v.dataset.empty()) c.dataset = v.dataset;
  return Experiment(c);
}

int cmd_render(const GlobalOptions& g, const ViewOptions& v, VoxelView view, std::ostream& out) {
  // Checked before the dataset so a missing file reports the checkpoint.
  if (!fs::exists(v.checkpoint)) throw CheckpointError(CheckpointError::Kind::kNotFound, "checkpoint not found: " + v.checkpoint);
  const Experiment ex = view_experiment(g, v);
  RenderRequest req;
  req.checkpoint = v.checkpoint;
  req.subject = v.subject;
  req.frame = v.frame;
  req.camera = v.camera;
  req.time = v.time;
  req.view = view;
  const Image img = render_from_checkpoint(ex, req);
  fs::path path = v.output;
  if (path.empty()) {
    const char* stem = view == VoxelView::kGeneral ? "general" : view == VoxelView::kIndividual ? "individual" : "render";
    path = ex.config().out / (std::string(stem) + ".png");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png(img, path);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const GlobalOptions& g, const ViewOptions& v, const std::string& split, std::optional<std::size_t> images,
             std::ostream& out) {
  if (!fs::exists(v.checkpoint)) throw CheckpointError(CheckpointError::Kind::kNotFound, "checkpoint not found: " + v.checkpoint);
  const Experiment ex = view_experiment(g, v);
  const LoadedState loaded = load_training_state(v.checkpoint, &ex.model().config());
  const TrainingState& st = loaded.state;
  if (v.subject >= st.subjects.size()) throw ConfigError("subject index out of range for this checkpoint");
  std::size_t dataset_index = ex.target_subject();
  if (loaded.extra.contains("subjects")) dataset_index = loaded.extra.at("subjects").at(v.subject).get<std::size_t>();
  const SubjectData& sd = ex.dataset().subjects.at(dataset_index);
  const std::size_t count = images.value_or(ex.config().eval_images);
  std::vector<const LabeledImage*> list;
  if (split == "train") {
    for (const auto& li : sd.train) list.push_back(&li);
    if (count < list.size()) list.resize(count);
  } else {
    list = eval_subset(sd, count);
  }
  const Pipeline pipeline(ex.model());
  const PerceptualNet perceptual = ex.config().perceptual_weights.empty()
                                       ? PerceptualNet::seeded(ex.config().perceptual_seed)
                                       : PerceptualNet::load(ex.config().perceptual_weights);
  const EvalReport report =
      evaluate(pipeline, st.shared.params, st.subjects[v.subject].params, sd, list, ex.config().render, perceptual);
  const fs::path csv = v.output.empty() ? ex.config().out / "eval" / "metrics.csv" : fs::path(v.output);
  append_metrics_csv(csv, st.iteration, split, report);
  print_eval(out, st.iteration, report);
  out << "appended " << csv.string() << "\n";
  return kExitOk;
}

int cmd_check_grads(const GlobalOptions& g, std::size_t seed_count, std::ostream& out) {
  const std::uint64_t first = g.seed.value_or(0);
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < seed_count; ++k) seeds.push_back(first + k);
  const auto reports = run_gradient_suite(seeds);
  bool ok = true;
  for (const auto& r : reports) {
    out << (r.pass ? "PASS " : "FAIL ") << r.block << " max_rel_err " << std::scientific << std::setprecision(3)
        << r.max_rel_err;
    out.unsetf(std::ios::floatfield);
    if (!r.pass) out << " worst " << r.worst_tensor << (r.diagnostic.empty() ? "" : " (" + r.diagnostic + ")");
    out << "\n";
    ok = ok && r.pass;
  }
  out << (ok ? "gradient suite passed" : "gradient suite FAILED") << " (" << reports.size() << " checks)\n";
  return ok ? kExitOk : kExitFailure;
}

VoxelView parse_view(const std::string& s) {
  if (s == "general") return VoxelView::kGeneral;
  if (s == "individual") return VoxelView::kIndividual;
  return VoxelView::kBoth;
}

void add_view_options(CLI::App* cmd, ViewOptions& v, bool output_is_csv) {
  cmd->add_option("--dataset", v.dataset, "Dataset directory (overrides the config)");
  cmd->add_option("--checkpoint", v.checkpoint, "Training-state checkpoint")->required();
  cmd->add_option("--subject", v.subject, "Subject index within the checkpoint");
  if (output_is_csv) {
    cmd->add_option("--csv", v.output, "Metrics CSV to append to");
    return;
  }
  cmd->add_option("--frame", v.frame, "Frame index");
  cmd->add_option("--camera", v.camera, "Camera index");
  cmd->add_option("--time", v.time, "Time in [0, 1] (defaults to the frame's)")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--output,-o", v.output, "Output PNG path");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gnvox: generalizable neural voxels for articulated bodies", "gnvox"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--deterministic", g.deterministic, "Bit-reproducible execution (always on in this build)");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_dataset;
  std::optional<std::size_t> gen_subjects;
  gen->add_option("--dataset", gen_dataset, "Output dataset directory");
  gen->add_option("--subjects", gen_subjects, "Number of subjects")->check(CLI::PositiveNumber);

  TrainOptions train;
  std::vector<std::pair<CLI::App*, Phase>> train_cmds;
  for (Phase p : {Phase::kPretrain, Phase::kFinetune, Phase::kScratch}) {
    const char* help = p == Phase::kPretrain   ? "Pretrain shared components across subjects"
                       : p == Phase::kFinetune ? "Fine-tune on the target subject from a pretrained state"
                                               : "Train the target subject from scratch";
    auto* cmd = app.add_subcommand(std::string(phase_name(p)), help);
    cmd->add_option("--dataset", train.dataset, "Dataset directory (overrides the config)");
    cmd->add_option("--resume", train.resume, "Continue from a checkpoint of the same phase");
    cmd->add_option("--iterations", train.iterations, "Phase length (overrides the config)");
    if (p == Phase::kFinetune) {
      cmd->add_option("--pretrained", train.pretrained, "Pretrained checkpoint");
      cmd->add_option("--load-mask", train.load_mask, "Components to load: all, none or a comma list");
    }
    train_cmds.emplace_back(cmd, p);
  }

  ViewOptions view;
  auto* render = app.add_subcommand("render", "Render a frame from a checkpoint to PNG");
  add_view_options(render, view, false);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and append metrics CSV");
  add_view_options(eval, view, true);
  std::string split = "eval";
  std::optional<std::size_t> eval_images;
  eval->add_option("--split", split, "eval or train")->check(CLI::IsMember({"eval", "train"}));
  eval->add_option("--images", eval_images, "Number of images");

  auto* grads = app.add_subcommand("check-grads", "Finite-difference check of every differentiable block");
  std::size_t seed_count = 10;
  grads->add_option("--seeds", seed_count, "Number of seeds, starting at --seed")->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect-voxels", "Render with only the general or only the individual grid");
  std::string which = "general";
  inspect->add_option("which", which, "general, individual or both")
      ->check(CLI::IsMember({"general", "individual", "both"}));
  add_view_options(inspect, view, false);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(g, gen_dataset, gen_subjects, out);
    for (const auto& [cmd, phase] : train_cmds) {
      if (cmd->parsed()) return cmd_train(g, phase, train, out);
    }
    if (render->parsed()) return cmd_render(g, view, VoxelView::kBoth, out);
    if (eval->parsed()) return cmd_eval(g, view, split, eval_images, out);
    if (grads->parsed()) return cmd_check_grads(g, seed_count, out);
    if (inspect->parsed()) return cmd_render(g, view, parse_view(which), out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace gnv::cli
