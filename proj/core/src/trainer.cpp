// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "gnv/checkpoint.hpp"
#include "gnv/error.hpp"

namespace gnv {

void TrainConfig::validate() const {
  if (iterations == 0) throw ConfigError("iterations must be positive");
  if (lr.base < 0.0 || lr.voxels < 0.0 || lr.radiance < 0.0) throw ConfigError("learning rates must be non-negative");
  if (lr.decay_period == 0) throw ConfigError("lr decay period must be positive");
  loss.validate();
}

std::uint64_t step_seed(std::uint64_t seed, std::uint64_t iteration) {
  // splitmix64 over a combination of both inputs
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + iteration + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Trainer::Trainer(const Model& model, TrainConfig config, std::vector<const SubjectData*> subjects)
    : model_(&model), config_(std::move(config)), subjects_(std::move(subjects)), pipeline_(model) {
  config_.validate();
  if (subjects_.empty()) throw ConfigError("training needs at least one subject");
  if (config_.phase == Phase::kPretrain && subjects_.size() < 2) throw ConfigError("pretraining needs >= 2 subjects");
  for (const SubjectData* s : subjects_) {
    if (s->train.empty()) throw ConfigError("subject '" + s->id + "' has no training frames");
    config_.render.validate(s->cameras[s->train.front().camera].width, s->cameras[s->train.front().camera].height);
    priors_.push_back(model.weight_prior(s->skeleton));
  }
  perceptual_ = config_.perceptual_weights.empty() ? PerceptualNet::seeded(config_.perceptual_seed)
                                                   : PerceptualNet::load(config_.perceptual_weights);
}

TrainingState Trainer::init_fresh() const {
  TrainingState st;
  st.phase = config_.phase;
  st.shared = model_->init_shared(config_.seed);
  for (std::size_t i = 0; i < subjects_.size(); ++i) st.subjects.push_back(model_->init_subject());
  return st;
}

TrainingState Trainer::init_finetune(const SharedState& pretrained, const LoadMask& mask) const {
  TrainingState st = init_fresh();
  st.shared = model_->load_shared(pretrained, mask, config_.seed);
  return st;
}

std::size_t Trainer::subject_for(std::size_t iteration) const {
  if (config_.order == SubjectOrder::kRoundRobin) return iteration % subjects_.size();
  std::mt19937_64 rng(step_seed(config_.seed ^ 0x5bd1e995ULL, iteration));
  return std::uniform_int_distribution<std::size_t>(0, subjects_.size() - 1)(rng);
}

SceneFrame Trainer::scene(std::size_t subject, std::size_t frame) const {
  const SubjectData& s = *subjects_.at(subject);
  const FrameRecord& f = s.frames.at(frame);
  return SceneFrame{&s.skeleton, priors_[subject], f.pose, f.time};
}

namespace {

void check_finite(const ParameterStore& store, const char* owner, bool grads) {
  for (const auto& t : store.tensors()) {
    const auto& v = grads ? t.grad : t.values;
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw NumericError(std::string("non-finite ") + (grads ? "gradient" : "value") + " in " + owner +
                           " tensor '" + t.name + "'");
      }
    }
  }
}

Image crop(const Image& img, const Patch& p) {
  Image out{p.size, p.size, std::vector<double>(3 * p.size * p.size)};
  for (std::size_t y = 0; y < p.size; ++y)
    for (std::size_t x = 0; x < p.size; ++x) out.set(x, y, img.at(p.x0 + x, p.y0 + y));
  return out;
}

}  // namespace

StepRecord Trainer::step(TrainingState& state) const {
  if (state.subjects.size() != subjects_.size()) throw ConfigError("training state subject count mismatch");
  const std::size_t iter = state.iteration;
  StepRecord rec;
  rec.iteration = iter;
  rec.subject = subject_for(iter);
  const SubjectData& sd = *subjects_[rec.subject];
  SubjectState& subj = state.subjects[rec.subject];

  std::mt19937_64 rng(step_seed(config_.seed, iter));
  rec.image = std::uniform_int_distribution<std::size_t>(0, sd.train.size() - 1)(rng);
  const LabeledImage& target = sd.train[rec.image];
  const Camera& cam = sd.cameras[target.camera];
  const RenderConfig& rc = config_.render;
  const std::vector<Patch> patches = sample_patches(cam.width, cam.height, rc.patch_count, rc.patch_size, rng);
  const std::vector<Pixel> pixels = patch_pixels(patches);
  const std::vector<Ray> rays = generate_rays(cam, pixels);
  const SceneFrame frame = scene(rec.subject, target.frame);

  Pipeline::Cache cache;
  const std::vector<Vec3> pred = pipeline_.render_rays(state.shared.params, subj.params, frame, rays, rc, &rng, &cache);

  // Patch images keep the spatial layout for the perceptual term.
  const std::size_t per_patch = rc.patch_size * rc.patch_size;
  std::vector<double> pred_flat(3 * pred.size()), gt_flat(3 * pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec3 g = target.image.at(pixels[i].x, pixels[i].y);
    for (int c = 0; c < 3; ++c) {
      pred_flat[3 * i + c] = pred[i][c];
      gt_flat[3 * i + c] = g[c];
    }
  }
  rec.mse = mse_loss(pred_flat, gt_flat);
  const LossWeights w = config_.loss.at(state.phase, iter);
  std::vector<double> d_flat(pred_flat.size(), 0.0);
  const double inv_g = 1.0 / static_cast<double>(patches.size());
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const std::size_t off = 3 * p * per_patch;
    Image pi{rc.patch_size, rc.patch_size,
             std::vector<double>(pred_flat.begin() + off, pred_flat.begin() + off + 3 * per_patch)};
    const Image gi = crop(target.image, patches[p]);
    if (w.lambda_l != 0.0) {
      std::vector<double> dp;
      rec.perceptual += inv_g * perceptual_.distance(pi, gi, &dp);
      for (std::size_t k = 0; k < dp.size(); ++k) d_flat[off + k] += w.lambda_l * inv_g * dp[k];
    } else {
      rec.perceptual += inv_g * perceptual_.distance(pi, gi);
    }
  }
  rec.loss = w.lambda_m * rec.mse + w.lambda_l * rec.perceptual;
  if (!std::isfinite(rec.loss)) {
    check_finite(state.shared.params, "shared", false);
    check_finite(subj.params, "subject", false);
    throw NumericError("non-finite loss at iteration " + std::to_string(iter) + " (parameters are finite)");
  }
  mse_loss_backward(pred_flat, gt_flat, w.lambda_m, d_flat);
  std::vector<Vec3> d_pixels(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) d_pixels[i] = Vec3(d_flat[3 * i], d_flat[3 * i + 1], d_flat[3 * i + 2]);

  state.shared.params.zero_grads();
  subj.params.zero_grads();
  pipeline_.backward(state.shared.params, subj.params, frame, cache, rc, d_pixels);
  check_finite(state.shared.params, "shared", true);
  check_finite(subj.params, "subject", true);

  const LrResolver lr = [&](std::string_view name) { return config_.lr.at(name, iter); };
  adam_step(state.shared.params, state.shared.adam, lr);
  adam_step(subj.params, subj.adam, lr);
  state.iteration = iter + 1;
  return rec;
}

void Trainer::run(TrainingState& state, std::size_t until, const StepCallback& on_step) const {
  const std::size_t stop = std::min(until, config_.iterations);
  while (state.iteration < stop) {
    const StepRecord rec = step(state);
    if (on_step) on_step(state, rec);
  }
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<const LabeledImage*> eval_subset(const SubjectData& subject, std::size_t count) {
  std::vector<const LabeledImage*> out;
  const std::size_t n = subject.eval.size();
  if (n == 0 || count == 0) return out;
  if (count >= n) {
    for (const auto& e : subject.eval) out.push_back(&e);
    return out;
  }
  for (std::size_t k = 0; k < count; ++k) out.push_back(&subject.eval[k * n / count]);
  return out;
}

EvalReport evaluate(const Pipeline& pipeline, const ParameterStore& shared, const ParameterStore& subject_params,
                    const SubjectData& subject, std::span<const LabeledImage* const> images,
                    const RenderConfig& config, const PerceptualNet& perceptual) {
  const std::vector<double> prior = pipeline.model().weight_prior(subject.skeleton);
  EvalReport report;
  for (const LabeledImage* li : images) {
    const FrameRecord& f = subject.frames.at(li->frame);
    const SceneFrame frame{&subject.skeleton, prior, f.pose, f.time};
    const Image img = pipeline.render_image(shared, subject_params, frame, subject.cameras.at(li->camera), config);
    FrameMetrics m;
    m.frame = li->frame;
    m.camera = li->camera;
    m.psnr = psnr(img, li->image);
    m.ssim = ssim(img, li->image);
    m.mse = mse_loss(img.rgb, li->image.rgb);
    m.perceptual = perceptual.distance(img, li->image);
    report.frames.push_back(m);
  }
  if (!report.frames.empty()) {
    const double n = static_cast<double>(report.frames.size());
    for (const auto& m : report.frames) {
      report.mean.psnr += m.psnr / n;
      report.mean.ssim += m.ssim / n;
      report.mean.mse += m.mse / n;
      report.mean.perceptual += m.perceptual / n;
    }
  }
  return report;
}

void append_metrics_csv(const std::filesystem::path& path, std::size_t iteration, const std::string& split,
                        const EvalReport& report) {
  const bool fresh = !std::filesystem::exists(path);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  if (fresh) out << "iter,split,frame,camera,psnr,ssim,mse,perceptual\n";
  for (const auto& m : report.frames) {
    out << iteration << ',' << split << ',' << m.frame << ',' << m.camera << ',' << m.psnr << ',' << m.ssim << ','
        << m.mse << ',' << m.perceptual << '\n';
  }
  const auto& m = report.mean;
  out << iteration << ',' << split << ",mean,mean," << m.psnr << ',' << m.ssim << ',' << m.mse << ',' << m.perceptual
      << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using Kind = CheckpointError::Kind;

constexpr const char* kMomentM = "#adam_m";
constexpr const char* kMomentV = "#adam_v";

void add_store(CheckpointFile& file, const std::string& prefix, const ParameterStore& store, const AdamState& adam) {
  for (const auto& t : store.tensors()) {
    file.sections.push_back({prefix + t.name, DType::kF64, t.shape, std::vector<double>(t.values.begin(), t.values.end())});
  }
  for (const auto& t : store.tensors()) {
    const auto it = adam.moments.find(t.name);
    if (it == adam.moments.end()) continue;
    file.sections.push_back({prefix + t.name + kMomentM, DType::kF64, t.shape, it->second.m});
    file.sections.push_back({prefix + t.name + kMomentV, DType::kF64, t.shape, it->second.v});
  }
}

nlohmann::json adam_json(const AdamState& a) {
  return {{"step", a.step}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

void read_adam_meta(const nlohmann::json& j, AdamState& a) {
  a.step = j.at("step").get<std::uint64_t>();
  a.beta1 = j.at("beta1").get<double>();
  a.beta2 = j.at("beta2").get<double>();
  a.eps = j.at("eps").get<double>();
}

void read_store(const CheckpointFile& file, const std::string& prefix, ParameterStore& store, AdamState& adam,
                std::size_t& consumed) {
  for (auto& t : store.tensors()) {
    const std::string name = prefix + t.name;
    const TensorSection* s = file.find(name);
    if (!s) throw CheckpointError(Kind::kMalformed, "checkpoint is missing section '" + name + "'");
    if (s->dims != t.shape) {
      throw CheckpointError(Kind::kShapeMismatch, "shape mismatch in section '" + name + "': stored " +
                                                      shape_to_string(s->dims) + ", expected " +
                                                      shape_to_string(t.shape));
    }
    t.values.assign(s->values.begin(), s->values.end());
    ++consumed;
    const TensorSection* m = file.find(name + kMomentM);
    const TensorSection* v = file.find(name + kMomentV);
    if (!m && !v) continue;
    if (!m || !v || m->dims != t.shape || v->dims != t.shape) {
      throw CheckpointError(Kind::kShapeMismatch, "bad optimizer moments for section '" + name + "'");
    }
    adam.moments[t.name] = AdamMoments{m->values, v->values};
    consumed += 2;
  }
}

}  // namespace

void save_training_state(const std::filesystem::path& path, const Model& model, const TrainingState& state,
                         std::uint64_t seed, const nlohmann::json& extra) {
  CheckpointFile file;
  auto& meta = file.metadata;
  meta["format"] = "gnvox-training-state";
  meta["model"] = to_json(model.config());
  meta["phase"] = std::string(phase_name(state.phase));
  meta["iteration"] = state.iteration;
  meta["seed"] = seed;
  meta["rng"] = {{"scheme", "per-step splitmix64(seed, iteration)"}, {"seed", seed}, {"next_iteration", state.iteration}};
  meta["subject_count"] = state.subjects.size();
  meta["adam"] = {{"shared", adam_json(state.shared.adam)}, {"subjects", nlohmann::json::array()}};
  for (const auto& s : state.subjects) meta["adam"]["subjects"].push_back(adam_json(s.adam));
  meta["extra"] = extra;
  add_store(file, "shared/", state.shared.params, state.shared.adam);
  for (std::size_t k = 0; k < state.subjects.size(); ++k) {
    add_store(file, "subject" + std::to_string(k) + "/", state.subjects[k].params, state.subjects[k].adam);
  }
  write_checkpoint_file(file, path);
}

LoadedState load_training_state(const std::filesystem::path& path, const ModelConfig* expected) {
  const CheckpointFile file = read_checkpoint_file(path);
  LoadedState out;
  try {
    const auto& meta = file.metadata;
    if (meta.value("format", "") != "gnvox-training-state") {
      throw CheckpointError(Kind::kMalformed, "checkpoint does not hold a training state");
    }
    out.model = model_config_from_json(meta.at("model"));
    out.state.phase = parse_phase(meta.at("phase").get<std::string>());
    out.state.iteration = meta.at("iteration").get<std::size_t>();
    out.seed = meta.at("seed").get<std::uint64_t>();
    out.extra = meta.value("extra", nlohmann::json::object());
    const std::size_t subjects = meta.at("subject_count").get<std::size_t>();
    // Sections are validated against the expected architecture when given so
    // that mismatches name the offending section.
    const Model model(expected ? *expected : out.model);
    std::size_t consumed = 0;
    out.state.shared.params = model.init_shared(0).params;
    read_adam_meta(meta.at("adam").at("shared"), out.state.shared.adam);
    read_store(file, "shared/", out.state.shared.params, out.state.shared.adam, consumed);
    for (std::size_t k = 0; k < subjects; ++k) {
      SubjectState s = model.init_subject();
      read_adam_meta(meta.at("adam").at("subjects").at(k), s.adam);
      read_store(file, "subject" + std::to_string(k) + "/", s.params, s.adam, consumed);
      out.state.subjects.push_back(std::move(s));
    }
    if (consumed != file.sections.size()) {
      throw CheckpointError(Kind::kMalformed, "checkpoint has " + std::to_string(file.sections.size() - consumed) +
                                                  " unrecognized sections");
    }
    if (expected) {
      const nlohmann::json a = to_json(*expected), b = to_json(out.model);
      if (a != b) {
        std::string diff;
        for (auto it = a.begin(); it != a.end(); ++it) {
          if (!b.contains(it.key()) || b.at(it.key()) != it.value()) diff += " " + it.key();
        }
        throw CheckpointError(Kind::kShapeMismatch, "checkpoint model differs from configuration in:" + diff);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("bad checkpoint metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kMalformed, std::string("bad checkpoint metadata: ") + e.what());
  }
  return out;
}

}  // namespace gnv
