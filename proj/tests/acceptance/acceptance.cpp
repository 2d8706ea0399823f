// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion.
//
//   gnv_acceptance [--work DIR] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gnv/checkpoint.hpp"
#include "gnv/deformation.hpp"
#include "gnv/gradient_suite.hpp"
#include "gnv/losses.hpp"
#include "gnv/renderer.hpp"
#include "gnv/skeleton.hpp"
#include "gnv/synthdata.hpp"
#include "gnv/voxel_grid.hpp"
#include "gnv/workflow.hpp"

namespace {

using namespace gnv;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient suite

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::vector<std::uint64_t> seeds(10);
  for (std::uint64_t s = 0; s < 10; ++s) seeds[s] = s;
  const auto reports = run_gradient_suite(seeds);
  const double secs = seconds_since(t0);
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_block;
  for (const auto& r : reports) {
    if (!r.pass) ++failed;
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_block = r.block;
    }
  }
  std::set<std::string> blocks;
  for (const auto& r : reports) blocks.insert(r.block.substr(0, r.block.find('@')));
  Outcome o;
  o.pass = failed == 0 && secs <= 120.0 && blocks.size() == gradient_block_names().size();
  o.detail = std::to_string(reports.size()) + " checks over " + std::to_string(blocks.size()) + " blocks, " +
             std::to_string(failed) + " failed, worst " + fmt(worst, 3) + " (" + worst_block + "), " + fmt(secs, 3) +
             " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Renderer analytics

Outcome renderer_analytics() {
  double worst = 0.0;
  bool background_exact = true, monotone = true;
  const Aabb cube{Vec3::Zero(), Vec3::Ones()};
  // Rays through the unit cube with known chord lengths.
  struct Chord {
    Ray ray;
    double length;
  };
  const std::vector<Chord> chords{
      {{Vec3(0.5, 0.5, -2.0), Vec3::UnitZ()}, 1.0},
      {{Vec3(-1.0, 0.3, 0.7), Vec3::UnitX()}, 1.0},
      {{Vec3(-1.0, -1.0, 0.5), Vec3(1, 1, 0).normalized()}, std::sqrt(2.0)},
      {{Vec3(-1.0, -1.0, -1.0), Vec3(1, 1, 1).normalized()}, std::sqrt(3.0)},
      {{Vec3(0.25, -3.0, 0.5), Vec3(0, 1, 0)}, 1.0},
  };
  const Vec3 c(0.8, 0.3, 0.55), bg(0.1, 0.2, 0.9);
  std::mt19937_64 rng(5);
  for (const auto& ch : chords) {
    const auto hit = ray_aabb(ch.ray, cube);
    if (!hit) return {false, "ray missed the cube"};
    for (double sigma : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
      for (bool stratified : {false, true}) {
        const std::vector<double> t = sample_points(hit->t_near, hit->t_far, 1024, stratified ? &rng : nullptr);
        const std::vector<Vec3> colors(t.size(), c);
        const std::vector<double> sigmas(t.size(), sigma);
        const Composite comp = volume_render(colors, sigmas, t, hit->t_far, bg);
        const Vec3 expected = c * (1.0 - std::exp(-sigma * ch.length));
        worst = std::max(worst, (comp.color - expected).cwiseAbs().maxCoeff());
      }
    }
    const std::vector<double> t = sample_points(hit->t_near, hit->t_far, 64, &rng);
    const std::vector<Vec3> colors(t.size(), c);
    const std::vector<double> zero(t.size(), 0.0);
    const Composite empty = volume_render(colors, zero, t, hit->t_far, bg);
    background_exact = background_exact && empty.pixel == bg && empty.alpha == 0.0 && empty.color == Vec3::Zero();
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t rays = 0;
  for (int r = 0; r < 200; ++r) {
    const std::size_t n = 8 + static_cast<std::size_t>(u(rng) * 256);
    const std::vector<double> t = sample_points(0.5, 0.5 + 3.0 * u(rng) + 0.01, n, &rng);
    std::vector<double> sigmas(n);
    for (double& s : sigmas) s = u(rng) < 0.3 ? 0.0 : 30.0 * u(rng) * u(rng);
    std::vector<double> T(n), w(n);
    volume_render_weights(sigmas, t, t.back() + 0.01, T, w);
    for (std::size_t i = 1; i < n; ++i) monotone = monotone && T[i] <= T[i - 1];
    monotone = monotone && T[0] == 1.0;
    ++rays;
  }
  Outcome o;
  o.pass = worst <= 1e-3 && background_exact && monotone;
  o.detail = "homogeneous max err " + fmt(worst, 3) + " at N=1024; sigma=0 background " +
             (background_exact ? "exact" : "NOT exact") + "; transmittance " + (monotone ? "monotone" : "NOT monotone") +
             " on " + std::to_string(rays) + " rays";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Interpolation exactness

Outcome interpolation() {
  const GridLayout l{2, {17, 13, 11}, Aabb{Vec3(-1.0, 0.0, 0.5), Vec3(1.5, 2.0, 1.5)}};
  const InterpConfig cfg{{1, 2, 4}};
  auto node = [&](std::size_t i, std::size_t j, std::size_t k) {
    const std::array<std::size_t, 3> idx{i, j, k};
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      p[a] = l.aabb.min[a] +
             static_cast<double>(idx[a]) * (l.aabb.max[a] - l.aabb.min[a]) / static_cast<double>(l.dims[a] - 1);
    }
    return p;
  };
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> data(l.value_count());
  for (double& v : data) v = nd(rng);
  std::size_t node_checks = 0, node_misses = 0;
  std::vector<double> out(6);
  for (std::size_t s : {1u, 2u, 4u}) {
    const std::size_t k_scale = s == 1 ? 0 : s == 2 ? 1 : 2;
    for (std::size_t i = 0; i < l.dims[0]; i += s)
      for (std::size_t j = 0; j < l.dims[1]; j += s)
        for (std::size_t k = 0; k < l.dims[2]; k += s) {
          const Vec3 p = node(i, j, k);
          mdi_sample(l, data, p, cfg, out);
          for (std::size_t ch = 0; ch < 2; ++ch) {
            ++node_checks;
            const double expected = data[l.node_offset(i, j, k) + ch];
            if (std::abs(out[k_scale * 2 + ch] - expected) > 1e-12 * std::max(1.0, std::abs(expected))) ++node_misses;
          }
        }
  }
  std::vector<double> tri(2);
  for (std::size_t i = 0; i < l.dims[0]; ++i) {
    for (std::size_t j = 0; j < l.dims[1]; ++j) {
      trilinear_sample(l, data, node(i, j, 5), tri);
      ++node_checks;
      if (std::abs(tri[1] - data[l.node_offset(i, j, 5) + 1]) > 1e-12 * std::max(1.0, std::abs(tri[1]))) ++node_misses;
    }
  }

  const Vec3 a(0.7, -1.3, 2.2);
  for (std::size_t i = 0; i < l.dims[0]; ++i)
    for (std::size_t j = 0; j < l.dims[1]; ++j)
      for (std::size_t k = 0; k < l.dims[2]; ++k) {
        const Vec3 p = node(i, j, k);
        data[l.node_offset(i, j, k)] = a.dot(p) + 3.0;
        data[l.node_offset(i, j, k) + 1] = 0.5 * p.z() - p.y() + 4.0;
      }
  double worst = 0.0;
  std::uniform_real_distribution<double> ux(-1.0, 1.5), uy(0.0, 2.0), uz(0.5, 1.5);
  for (int n = 0; n < 100; ++n) {
    const Vec3 p(ux(rng), uy(rng), uz(rng));
    mdi_sample(l, data, p, cfg, out);
    trilinear_sample(l, data, p, tri);
    const double e0 = a.dot(p) + 3.0, e1 = 0.5 * p.z() - p.y() + 4.0;
    for (int s = 0; s < 3; ++s) {
      worst = std::max(worst, std::abs(out[2 * s] - e0) / std::abs(e0));
      worst = std::max(worst, std::abs(out[2 * s + 1] - e1) / std::abs(e1));
    }
    worst = std::max(worst, std::abs(tri[0] - e0) / std::abs(e0));
  }
  Outcome o;
  o.pass = node_misses == 0 && worst <= 1e-6;
  o.detail = std::to_string(node_checks - node_misses) + "/" + std::to_string(node_checks) +
             " node values exact; linear field max rel err " + fmt(worst, 3) + " at 100 points, scales {1,2,4}";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Deformation

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

Outcome deformation() {
  // T-pose: humanoid skeleton, rest pose, random bone-only weights.
  const Skeleton human = humanoid_skeleton();
  const std::size_t K = human.bone_count();
  const Aabb box = canonical_envelope();
  GridLayout wl{K + 1, {24, 24, 12}, box};
  VoxelGrid w = VoxelGrid::zeros(wl);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u01(0.05, 1.0);
  for (std::size_t n = 0; n < wl.node_count(); ++n) {
    for (std::size_t c = 0; c < K; ++c) w.data[n * (K + 1) + c] = u01(rng);
  }
  const BoneTransforms tpose = obs_to_canonical_transforms(human, rest_pose(human));
  double identity_err = 0.0;
  std::uniform_real_distribution<double> ux(box.min.x(), box.max.x()), uy(box.min.y(), box.max.y()),
      uz(box.min.z(), box.max.z());
  for (int n = 0; n < 500; ++n) {
    const Vec3 x(ux(rng), uy(rng), uz(rng));
    identity_err = std::max(identity_err, (deform_point(w, x, tpose).x_canonical - x).norm());
  }

  // Two-bone chain bent pi/2 at the elbow; oracle weights mark each rest bone.
  Skeleton chain;
  chain.parent = {-1, 0};
  chain.rest_joints = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  chain.rest_tips = {Vec3(1, 0, 0), Vec3(2, 0, 0)};
  chain.names = {"upper", "fore"};
  const double cell = 0.02;
  GridLayout cl{3, {}, Aabb{Vec3(-0.2, -0.2, -0.2), Vec3(2.2, 1.3, 0.2)}};
  for (int a = 0; a < 3; ++a) {
    cl.dims[a] = static_cast<std::size_t>(std::lround((cl.aabb.max[a] - cl.aabb.min[a]) / cell)) + 1;
  }
  VoxelGrid oracle = VoxelGrid::zeros(cl);
  for (std::size_t i = 0; i < cl.dims[0]; ++i)
    for (std::size_t j = 0; j < cl.dims[1]; ++j)
      for (std::size_t k = 0; k < cl.dims[2]; ++k) {
        const Vec3 p = cl.aabb.min + cell * Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
        for (std::size_t b = 0; b < 2; ++b) {
          if (segment_distance(p, chain.rest_joints[b], chain.rest_tips[b]) <= 0.1) {
            oracle.data[cl.node_offset(i, j, k) + b] = 1.0;
          }
        }
      }
  const Pose bent = make_pose(chain, Vec3::Zero(), {Vec3::Zero(), Vec3(0, 0, std::numbers::pi / 2)});
  const BoneTransforms C = obs_to_canonical_transforms(chain, bent);
  const double r = 0.05;
  double chain_err = 0.0;
  std::size_t points = 0;
  for (double s : {0.15, 0.2, 0.25, 0.3, 0.35}) {
    for (int k = 0; k < 12; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / 12.0;
      // Forearm surface after the bend, and its rest position.
      const Vec3 x_obs(1.0 + r * std::cos(phi), s, r * std::sin(phi));
      const Vec3 expected(1.0 + s, -r * std::cos(phi), r * std::sin(phi));
      chain_err = std::max(chain_err, (deform_point(oracle, x_obs, C).x_canonical - expected).norm());
      ++points;
    }
  }
  for (double s : {0.05, 0.15, 0.25}) {
    for (int k = 0; k < 12; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / 12.0;
      const Vec3 x_obs(s, r * std::cos(phi), r * std::sin(phi));
      chain_err = std::max(chain_err, (deform_point(oracle, x_obs, C).x_canonical - x_obs).norm());
      ++points;
    }
  }
  Outcome o;
  o.pass = identity_err <= 1e-8 && chain_err <= 1e-6;
  o.detail = "T-pose max err " + fmt(identity_err, 3) + " over 500 points; bent chain max err " + fmt(chain_err, 3) +
             " over " + std::to_string(points) + " surface points";
  return o;
}

// ---------------------------------------------------------------------------
// Shared desk-scale experiment for criteria 5 and 6.

struct DeskRun {
  std::map<std::size_t, double> scratch;   // iteration -> eval PSNR
  std::map<std::size_t, double> finetune;  // load_mask all
  double no_general = 0.0;                 // 500 steps, general voxels re-initialized
  double no_general_no_radiance = 0.0;     // 500 steps, radiance re-initialized as well
  double minutes = 0.0;
  std::string error;
};

RunConfig desk_config(const fs::path& work) {
  RunConfig rc = load_run_config(fs::path(GNV_SOURCE_DIR) / "configs" / "desk.json");
  rc.dataset = work / "data";
  rc.out = work / "runs";
  return rc;
}

std::map<std::size_t, double> psnr_by_iteration(const PhaseResult& r) {
  std::map<std::size_t, double> m;
  for (const auto& e : r.evals) m[e.iteration] = e.report.mean.psnr;
  return m;
}

PhaseOptions progress(const std::string& label) {
  PhaseOptions o;
  o.on_eval = [label](const EvalPoint& p) {
    std::cerr << "  " << label << " " << p.iteration << ": psnr " << fmt(p.report.mean.psnr, 5) << "\n";
  };
  return o;
}

DeskRun run_desk(const fs::path& work) {
  DeskRun out;
  const auto t0 = Clock::now();
  try {
    const RunConfig rc = desk_config(work);
    fs::remove_all(rc.out);
    std::cerr << "generating dataset in " << rc.dataset << "\n";
    generate_dataset(make_subjects(rc.gen_data.subjects, rc.gen_data.seed), rc.gen_data.spec, rc.dataset);

    RunConfig pre_cfg = rc;
    pre_cfg.eval_every = 0;
    const Experiment pre_ex(pre_cfg);
    std::cerr << "pretrain " << pre_cfg.pretrain_iterations << " steps on " << pre_ex.pretrain_subjects().size()
              << " subjects\n";
    run_phase(pre_ex, Phase::kPretrain, progress("pretrain"));

    const Experiment ex(rc);
    std::cerr << "scratch " << rc.scratch_iterations << " steps\n";
    out.scratch = psnr_by_iteration(run_phase(ex, Phase::kScratch, progress("scratch")));
    std::cerr << "finetune " << rc.finetune_iterations << " steps\n";
    out.finetune = psnr_by_iteration(run_phase(ex, Phase::kFinetune, progress("finetune")));

    auto ablation = [&](const std::string& name, const std::string& mask) {
      RunConfig a = rc;
      a.out = work / ("ablation_" + name);
      a.pretrained = ex.pretrained_path();
      a.load_mask = LoadMask::parse(mask);
      a.finetune_iterations = 500;
      a.eval_every = 0;
      std::cerr << "ablation " << name << " (load " << mask << ")\n";
      const PhaseResult r = run_phase(Experiment(a), Phase::kFinetune, progress(name));
      return r.evals.back().report.mean.psnr;
    };
    out.no_general = ablation("no_general", "radiance,weight_net,pose_refine");
    out.no_general_no_radiance = ablation("no_general_no_radiance", "weight_net,pose_refine");
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.minutes = seconds_since(t0) / 60.0;
  return out;
}

Outcome speedup(const DeskRun& d) {
  if (!d.error.empty()) return {false, "run failed: " + d.error};
  if (d.scratch.empty() || d.finetune.empty()) return {false, "no evaluations recorded"};
  const double p0 = d.scratch.rbegin()->second;
  std::optional<std::size_t> reached;
  for (const auto& [it, p] : d.finetune) {
    if (it <= 1000 && p >= p0) {
      reached = it;
      break;
    }
  }
  bool ahead = true;
  std::size_t compared = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (const auto& [it, p] : d.finetune) {
    if (it > 500) continue;
    const auto s = d.scratch.find(it);
    if (s == d.scratch.end()) continue;
    ++compared;
    min_margin = std::min(min_margin, p - s->second);
    ahead = ahead && p > s->second;
  }
  Outcome o;
  o.pass = reached.has_value() && ahead && compared >= 5 && d.minutes <= 60.0;
  o.detail = "P0 " + fmt(p0, 5) + " dB after " + std::to_string(d.scratch.rbegin()->first) + " scratch steps; " +
             (reached ? "finetune reaches it at step " + std::to_string(*reached) : std::string("finetune never reaches it")) +
             "; finetune - scratch min margin " + fmt(min_margin, 3) + " dB over " + std::to_string(compared) +
             " evals <= 500; " + fmt(d.minutes, 3) + " min total";
  return o;
}

Outcome ablation(const DeskRun& d) {
  if (!d.error.empty()) return {false, "run failed: " + d.error};
  const auto it = d.finetune.find(500);
  if (it == d.finetune.end()) return {false, "no finetune evaluation at step 500"};
  const double all = it->second;
  Outcome o;
  o.pass = all > d.no_general && d.no_general > d.no_general_no_radiance;
  o.detail = "PSNR at 500 steps: all " + fmt(all, 5) + ", without general voxels " + fmt(d.no_general, 5) +
             ", without general voxels and radiance " + fmt(d.no_general_no_radiance, 5);
  return o;
}

// ---------------------------------------------------------------------------
// 7. Persistence

bool bitwise_equal(const ParameterStore& a, const ParameterStore& b) {
  if (a.tensors().size() != b.tensors().size()) return false;
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    const auto& x = a.tensors()[i].values;
    const auto& y = b.tensors()[i].values;
    if (a.tensors()[i].name != b.tensors()[i].name || x.size() != y.size()) return false;
    if (std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

bool moments_equal(const AdamState& a, const AdamState& b) {
  if (a.step != b.step || a.moments.size() != b.moments.size()) return false;
  for (const auto& [name, m] : a.moments) {
    const auto it = b.moments.find(name);
    if (it == b.moments.end() || it->second.m != m.m || it->second.v != m.v) return false;
  }
  return true;
}

Outcome persistence(const fs::path& work) {
  RunConfig rc = desk_config(work / "persistence");
  rc.gen_data.subjects = 2;
  rc.gen_data.spec.frames = 4;
  generate_dataset(make_subjects(rc.gen_data.subjects, rc.gen_data.seed), rc.gen_data.spec, rc.dataset);
  rc.scratch_iterations = 24;
  rc.eval_every = 0;
  rc.checkpoint_every = 0;
  rc.out = work / "persistence" / "full";
  const Experiment full_ex(rc);
  const PhaseResult full = run_phase(full_ex, Phase::kScratch);

  // Round trip of the trained state.
  const LoadedState loaded = load_training_state(full.final_checkpoint, &full_ex.model().config());
  bool round_trip = bitwise_equal(loaded.state.shared.params, full.state.shared.params) &&
                    bitwise_equal(loaded.state.subjects[0].params, full.state.subjects[0].params) &&
                    moments_equal(loaded.state.shared.adam, full.state.shared.adam) &&
                    moments_equal(loaded.state.subjects[0].adam, full.state.subjects[0].adam) &&
                    loaded.state.iteration == full.state.iteration;
  const fs::path again = work / "persistence" / "again.gnvx";
  save_training_state(again, full_ex.model(), loaded.state, loaded.seed, loaded.extra);
  round_trip = round_trip && encode_checkpoint(read_checkpoint_file(again)) ==
                                 encode_checkpoint(read_checkpoint_file(full.final_checkpoint));

  // Interrupted at step 9, then resumed from its checkpoint.
  rc.out = work / "persistence" / "split";
  const Experiment split_ex(rc);
  PhaseOptions first;
  first.stop_at = 9;
  const PhaseResult a = run_phase(split_ex, Phase::kScratch, first);
  PhaseOptions second;
  second.resume = a.final_checkpoint;
  const PhaseResult b = run_phase(split_ex, Phase::kScratch, second);
  std::vector<StepRecord> steps = a.steps;
  steps.insert(steps.end(), b.steps.begin(), b.steps.end());
  bool same = steps.size() == full.steps.size();
  for (std::size_t i = 0; same && i < steps.size(); ++i) {
    same = steps[i].iteration == full.steps[i].iteration && steps[i].image == full.steps[i].image &&
           steps[i].loss == full.steps[i].loss && steps[i].mse == full.steps[i].mse &&
           steps[i].perceptual == full.steps[i].perceptual;
  }
  same = same && bitwise_equal(b.state.shared.params, full.state.shared.params) &&
         bitwise_equal(b.state.subjects[0].params, full.state.subjects[0].params);
  Outcome o;
  o.pass = round_trip && same;
  o.detail = std::string("checkpoint round trip ") + (round_trip ? "bitwise identical" : "DIFFERS") +
             "; resumed loss trajectory over " + std::to_string(steps.size()) + " steps " +
             (same ? "identical" : "DIFFERS");
  return o;
}

// ---------------------------------------------------------------------------
// 8. Metrics

Outcome metrics() {
  const Image a = Image::filled(32, 24, Vec3::Constant(0.5));
  const Image b = Image::filled(32, 24, Vec3::Constant(0.6));
  const double p = psnr(a, b);
  Image noise = Image::filled(32, 24, Vec3::Zero());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (double& v : noise.rgb) v = u(rng);
  const double s = ssim(noise, noise);
  Outcome o;
  o.pass = std::abs(p - 20.0) <= 1e-9 && std::abs(s - 1.0) <= 1e-9;
  o.detail = "psnr(mse 0.01) = " + fmt(p, 15) + " dB; ssim(identical) = " + fmt(s, 15);
  return o;
}

std::set<int> parse_only(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "gnv_acceptance";
  std::set<int> only{1, 2, 3, 4, 5, 6, 7, 8};
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only = parse_only(argv[++i]);
    } else {
      std::cerr << "usage: gnv_acceptance [--work DIR] [--only 1,2,...]\n";
      return 2;
    }
  }
  fs::create_directories(work);

  const std::map<int, std::string> names{
      {1, "gradient suite"},         {2, "renderer analytics"},   {3, "interpolation exactness"},
      {4, "deformation"},            {5, "generalization speedup"}, {6, "ablation ordering"},
      {7, "persistence"},            {8, "metrics"},
  };
  std::map<int, Outcome> results;
  auto guarded = [](const std::function<Outcome()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };
  if (only.count(1)) results[1] = guarded(gradient_suite);
  if (only.count(2)) results[2] = guarded(renderer_analytics);
  if (only.count(3)) results[3] = guarded(interpolation);
  if (only.count(4)) results[4] = guarded(deformation);
  if (only.count(7)) results[7] = guarded([&] { return persistence(work); });
  if (only.count(8)) results[8] = guarded(metrics);
  if (only.count(5) || only.count(6)) {
    try {
      const DeskRun desk = run_desk(work / "desk");
      if (only.count(5)) results[5] = speedup(desk);
      if (only.count(6)) results[6] = ablation(desk);
    } catch (const std::exception& e) {
      for (int id : {5, 6}) {
        if (only.count(id)) results[id] = Outcome{false, std::string("exception: ") + e.what()};
      }
    }
  }

  bool all = true;
  std::ofstream summary(work / "acceptance_results.txt");
  for (const auto& [id, r] : results) {
    std::ostringstream line;
    line << (r.pass ? "PASS" : "FAIL") << " [" << id << "] " << names.at(id) << ": " << r.detail << "\n";
    std::cout << line.str();
    summary << line.str();
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
