// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "gnv/error.hpp"
#include "gnv/pipeline.hpp"
#include "json_util.hpp"

namespace gnv {

using detail::json;
using detail::StrictObject;

namespace {

struct BoneTemplate {
  const char* name;
  int parent;
  Vec3 joint_offset;  // from the parent joint, scaled by the parent's length factor
  Vec3 tip;           // from the own joint, scaled by the own length factor
  double radius;
};

const std::vector<BoneTemplate>& humanoid_template() {
  static const std::vector<BoneTemplate> bones{
      {"pelvis", -1, {0.0, 0.0, 0.0}, {0.0, 0.25, 0.0}, 0.12},
      {"spine", 0, {0.0, 0.25, 0.0}, {0.0, 0.30, 0.0}, 0.11},
      {"head", 1, {0.0, 0.35, 0.0}, {0.0, 0.20, 0.0}, 0.10},
      {"l_upper_arm", 1, {0.15, 0.25, 0.0}, {0.30, 0.0, 0.0}, 0.05},
      {"l_forearm", 3, {0.30, 0.0, 0.0}, {0.27, 0.0, 0.0}, 0.045},
      {"r_upper_arm", 1, {-0.15, 0.25, 0.0}, {-0.30, 0.0, 0.0}, 0.05},
      {"r_forearm", 5, {-0.30, 0.0, 0.0}, {-0.27, 0.0, 0.0}, 0.045},
      {"lower_body", 0, {0.0, -0.05, 0.0}, {0.0, -0.65, 0.0}, 0.10},
  };
  return bones;
}

Skeleton build_skeleton(const std::vector<double>& scale) {
  const auto& tpl = humanoid_template();
  Skeleton s;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    const auto& b = tpl[i];
    s.parent.push_back(b.parent);
    s.names.emplace_back(b.name);
    Vec3 j = b.joint_offset;
    if (b.parent >= 0) {
      const auto p = static_cast<std::size_t>(b.parent);
      j = s.rest_joints[p] + scale[p] * b.joint_offset;
    }
    s.rest_joints.push_back(j);
    s.rest_tips.push_back(j + scale[i] * b.tip);
  }
  return s;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Skeleton humanoid_skeleton() { return build_skeleton(std::vector<double>(humanoid_template().size(), 1.0)); }

std::vector<SyntheticSubject> make_subjects(std::size_t count, std::uint64_t base_seed,
                                            const SubjectVariation& variation) {
  if (count == 0) throw ConfigError("make_subjects needs count >= 1");
  const auto& tpl = humanoid_template();
  std::vector<SyntheticSubject> out;
  for (std::size_t k = 0; k < count; ++k) {
    SyntheticSubject s;
    s.seed = base_seed + k;
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> len(1.0 - variation.length, 1.0 + variation.length);
    std::uniform_real_distribution<double> rad(1.0 - variation.radius, 1.0 + variation.radius);
    std::uniform_real_distribution<double> col(0.15, 0.95);
    std::vector<double> scale(tpl.size());
    for (double& v : scale) v = len(rng);
    // Mirror limbs so subjects stay left/right symmetric.
    scale[5] = scale[3];
    scale[6] = scale[4];
    s.skeleton = build_skeleton(scale);
    for (std::size_t i = 0; i < tpl.size(); ++i) s.radius.push_back(tpl[i].radius * rad(rng));
    s.radius[5] = s.radius[3];
    s.radius[6] = s.radius[4];
    for (std::size_t i = 0; i < tpl.size(); ++i) {
      const Vec3 base(col(rng), col(rng), col(rng));
      const Vec3 tip(col(rng), col(rng), col(rng));
      s.color.push_back(base);
      s.tip_color.push_back(tip);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Aabb canonical_envelope(const SubjectVariation& variation) {
  const auto& tpl = humanoid_template();
  const Skeleton big = build_skeleton(std::vector<double>(tpl.size(), 1.0 + variation.length));
  double max_r = 0.0;
  for (const auto& b : tpl) max_r = std::max(max_r, b.radius * (1.0 + variation.radius));
  Vec3 lo = big.rest_joints[0], hi = lo;
  for (std::size_t i = 0; i < big.bone_count(); ++i) {
    for (const Vec3& p : {big.rest_joints[i], big.rest_tips[i]}) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  const double pad = max_r + SyntheticSubject{}.softness;
  return Aabb{lo - Vec3::Constant(pad), hi + Vec3::Constant(pad)}.padded(0.1);
}

PosedBody pose_body(const SyntheticSubject& subject, const Pose& pose) {
  const BoneTransforms world = forward_kinematics(subject.skeleton, pose.root_translation, pose.omega);
  PosedBody body;
  body.subject = &subject;
  for (std::size_t i = 0; i < world.size(); ++i) {
    body.a.push_back(world[i].apply(subject.skeleton.rest_joints[i]));
    body.b.push_back(world[i].apply(subject.skeleton.tip(i)));
  }
  return body;
}

FieldSample gt_field(const PosedBody& body, const Vec3& x) {
  const SyntheticSubject& s = *body.subject;
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  double along = 0.0;
  for (std::size_t i = 0; i < body.a.size(); ++i) {
    const Vec3 ab = body.b[i] - body.a[i];
    const double len2 = ab.squaredNorm();
    const double h = len2 > 0.0 ? std::clamp((x - body.a[i]).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (x - (body.a[i] + h * ab)).norm() - s.radius[i];
    if (d < best) {
      best = d;
      arg = i;
      along = h;
    }
  }
  FieldSample f;
  if (best >= s.softness) return f;
  f.sigma = s.sigma_max * (1.0 - smoothstep(-s.softness, s.softness, best));
  f.color = (1.0 - along) * s.color[arg] + along * s.tip_color[arg];
  return f;
}

Image render_gt(const SyntheticSubject& subject, const Pose& pose, const Camera& camera, std::size_t n_samples,
                const Vec3& background) {
  if (n_samples < 2) throw ConfigError("render_gt needs at least 2 samples");
  camera.validate();
  const PosedBody body = pose_body(subject, pose);
  double max_r = 0.0;
  for (double r : subject.radius) max_r = std::max(max_r, r);
  const Aabb box = posed_body_box(subject.skeleton, pose, max_r + subject.softness);
  Image img = Image::filled(camera.width, camera.height, background);
  std::vector<Vec3> colors(n_samples);
  std::vector<double> sigmas(n_samples);
  for (std::size_t y = 0; y < camera.height; ++y)
    for (std::size_t x = 0; x < camera.width; ++x) {
      const Ray ray = ray_through(camera, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
      const auto hit = ray_aabb(ray, box);
      if (!hit || hit->t_far <= hit->t_near) continue;
      const std::vector<double> t = sample_points(hit->t_near, hit->t_far, n_samples, nullptr);
      for (std::size_t i = 0; i < n_samples; ++i) {
        const FieldSample f = gt_field(body, ray.origin + t[i] * ray.direction);
        colors[i] = f.color;
        sigmas[i] = f.sigma;
      }
      img.set(x, y, volume_render(colors, sigmas, t, hit->t_far, background).pixel);
    }
  return img;
}

Pose MotionSpec::pose_at(const SyntheticSubject& subject, double time) const {
  const std::size_t K = subject.skeleton.bone_count();
  if (K != humanoid_template().size()) throw ConfigError("motion spec expects the humanoid skeleton");
  std::mt19937_64 rng(subject.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  const double phase_arm = ph(rng), phase_elbow = ph(rng), phase_leg = ph(rng), phase_head = ph(rng);
  const double w = 2.0 * std::numbers::pi * cycles * time;

  std::vector<Vec3> omega(K, Vec3::Zero());
  omega[0] = Vec3(0.0, yaw_range * (2.0 * time - 1.0), 0.0);
  omega[1] = Vec3(0.0, 0.15 * std::sin(w + phase_head), 0.0);
  omega[2] = Vec3(head_amplitude * std::sin(w + phase_head), 0.0, 0.0);
  const double arm = arm_amplitude * std::sin(w + phase_arm);
  const double elbow = elbow_amplitude * (0.5 + 0.5 * std::sin(w + phase_elbow));
  omega[3] = Vec3(0.0, 0.0, -0.5 + arm);
  omega[4] = Vec3(0.0, -elbow, 0.0);
  omega[5] = Vec3(0.0, 0.0, 0.5 - arm);
  omega[6] = Vec3(0.0, elbow, 0.0);
  omega[7] = Vec3(leg_amplitude * std::sin(w + phase_leg), 0.0, 0.0);
  const Vec3 root(0.0, 0.03 * std::sin(2.0 * w), 0.0);
  return make_pose(subject.skeleton, root, std::move(omega));
}

std::vector<Camera> camera_rig(std::size_t count, std::size_t width, std::size_t height, double distance,
                               double height_m, double focal_per_width) {
  const double focal = focal_per_width * static_cast<double>(width);
  std::vector<Camera> cams;
  const Vec3 target(0.0, 0.1, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const double az = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    const Vec3 eye(distance * std::sin(az), height_m, distance * std::cos(az));
    cams.push_back(Camera::look_at(eye, target, Vec3::UnitY(), focal, width, height));
  }
  return cams;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json camera_json(const Camera& c) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) rot.push_back(json::array({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)}));
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"rotation", rot},
          {"position", detail::vec3_json(c.position)}, {"width", c.width}, {"height", c.height}};
}

Camera camera_from(const json& j, const std::string& ctx) {
  StrictObject o(j, ctx);
  Camera c;
  c.fx = o.get<double>("fx");
  c.fy = o.get<double>("fy");
  c.cx = o.get<double>("cx");
  c.cy = o.get<double>("cy");
  const json& rot = o.raw("rotation");
  if (!rot.is_array() || rot.size() != 3) throw ConfigError(ctx + ".rotation: expected 3 rows");
  for (int r = 0; r < 3; ++r) c.rotation.row(r) = detail::vec3_from(rot[r], ctx + ".rotation").transpose();
  c.position = detail::vec3_from(o.raw("position"), ctx + ".position");
  c.width = o.get<std::size_t>("width");
  c.height = o.get<std::size_t>("height");
  o.finish();
  c.validate();
  return c;
}

json skeleton_json(const Skeleton& s) {
  json joints = json::array(), tips = json::array();
  for (const auto& v : s.rest_joints) joints.push_back(detail::vec3_json(v));
  for (const auto& v : s.rest_tips) tips.push_back(detail::vec3_json(v));
  return {{"parent", s.parent}, {"names", s.names}, {"rest_joints", joints}, {"rest_tips", tips}};
}

Skeleton skeleton_from(const json& j, const std::string& ctx) {
  StrictObject o(j, ctx);
  Skeleton s;
  s.parent = o.get<std::vector<int>>("parent");
  s.names = o.get<std::vector<std::string>>("names");
  for (const auto& v : o.raw("rest_joints")) s.rest_joints.push_back(detail::vec3_from(v, ctx + ".rest_joints"));
  for (const auto& v : o.raw("rest_tips")) s.rest_tips.push_back(detail::vec3_from(v, ctx + ".rest_tips"));
  o.finish();
  s.validate();
  return s;
}

json subject_json(const SyntheticSubject& s) {
  json colors = json::array(), tips = json::array();
  for (const auto& c : s.color) colors.push_back(detail::vec3_json(c));
  for (const auto& c : s.tip_color) tips.push_back(detail::vec3_json(c));
  return {{"seed", s.seed}, {"radius", s.radius}, {"color", colors}, {"tip_color", tips},
          {"softness", s.softness}, {"sigma_max", s.sigma_max}};
}

json aabb_json(const Aabb& b) { return {{"min", detail::vec3_json(b.min)}, {"max", detail::vec3_json(b.max)}}; }

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string image_name(std::size_t frame, std::size_t camera) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%03zu_cam_%zu.png", frame, camera);
  return buf;
}

}  // namespace

void generate_dataset(const std::vector<SyntheticSubject>& subjects, const DatasetSpec& spec,
                      const std::filesystem::path& out_dir) {
  if (spec.frames == 0 || spec.cameras < 2) throw ConfigError("dataset needs frames >= 1 and cameras >= 2");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const std::vector<Camera> cams = camera_rig(spec.cameras, spec.width, spec.height);
  json index;
  index["canonical_box"] = aabb_json(canonical_envelope());
  index["background"] = detail::vec3_json(spec.background);
  index["subjects"] = json::array();
  for (std::size_t k = 0; k < subjects.size(); ++k) {
    const SyntheticSubject& s = subjects[k];
    const std::string id = "subject_" + std::to_string(k);
    const std::filesystem::path dir = out_dir / id;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    json m;
    m["id"] = id;
    m["subject"] = subject_json(s);
    m["skeleton"] = skeleton_json(s.skeleton);
    m["cameras"] = json::array();
    for (const auto& c : cams) m["cameras"].push_back(camera_json(c));
    m["frames"] = json::array();
    for (std::size_t f = 0; f < spec.frames; ++f) {
      const double time = spec.frames > 1 ? static_cast<double>(f) / static_cast<double>(spec.frames - 1) : 0.0;
      const Pose pose = spec.motion.pose_at(s, time);
      json omega = json::array();
      for (const auto& w : pose.omega) omega.push_back(detail::vec3_json(w));
      json views = json::array();
      for (std::size_t c = 0; c < cams.size(); ++c) {
        const std::string name = image_name(f, c);
        write_png(render_gt(s, pose, cams[c], spec.gt_samples, spec.background), dir / name);
        views.push_back({{"camera", c}, {"image", name}, {"split", c == 0 ? "train" : "eval"}});
      }
      m["frames"].push_back({{"index", f},
                             {"time", time},
                             {"root_translation", detail::vec3_json(pose.root_translation)},
                             {"omega", omega},
                             {"views", views}});
    }
    write_json(m, dir / "manifest.json");
    index["subjects"].push_back(id);
  }
  write_json(index, out_dir / "dataset.json");
}

SubjectData load_subject(const std::filesystem::path& dir) {
  const json m = read_json(dir / "manifest.json");
  const std::string ctx = (dir / "manifest.json").string();
  StrictObject o(m, ctx);
  SubjectData d;
  d.id = o.get<std::string>("id");
  o.raw("subject");  // generator parameters, informational
  d.skeleton = skeleton_from(o.raw("skeleton"), ctx + ".skeleton");
  for (const auto& c : o.raw("cameras")) d.cameras.push_back(camera_from(c, ctx + ".cameras"));
  for (const auto& fj : o.raw("frames")) {
    StrictObject f(fj, ctx + ".frames");
    FrameRecord rec;
    rec.index = f.get<std::size_t>("index");
    rec.time = f.get<double>("time");
    const Vec3 root = detail::vec3_from(f.raw("root_translation"), ctx + ".root_translation");
    std::vector<Vec3> omega;
    for (const auto& w : f.raw("omega")) omega.push_back(detail::vec3_from(w, ctx + ".omega"));
    if (omega.size() != d.skeleton.bone_count()) throw ConfigError(ctx + ": pose size does not match skeleton");
    rec.pose = make_pose(d.skeleton, root, std::move(omega));
    for (const auto& vj : f.raw("views")) {
      StrictObject v(vj, ctx + ".views");
      LabeledImage li;
      li.frame = d.frames.size();
      li.camera = v.get<std::size_t>("camera");
      if (li.camera >= d.cameras.size()) throw ConfigError(ctx + ": view camera index out of range");
      li.image = read_png(dir / v.get<std::string>("image"));
      const std::string split = v.get<std::string>("split");
      v.finish();
      if (split == "train") {
        d.train.push_back(std::move(li));
      } else if (split == "eval") {
        d.eval.push_back(std::move(li));
      } else {
        throw ConfigError(ctx + ": unknown split '" + split + "'");
      }
    }
    f.finish();
    d.frames.push_back(std::move(rec));
  }
  o.finish();
  if (d.frames.empty()) throw ConfigError(ctx + ": subject has no frames");
  return d;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const json j = read_json(dir / "dataset.json");
  StrictObject o(j, (dir / "dataset.json").string());
  Dataset ds;
  {
    StrictObject b(o.raw("canonical_box"), "dataset.canonical_box");
    ds.canonical_box.min = detail::vec3_from(b.raw("min"), "canonical_box.min");
    ds.canonical_box.max = detail::vec3_from(b.raw("max"), "canonical_box.max");
    b.finish();
  }
  ds.background = detail::vec3_from(o.raw("background"), "dataset.background");
  for (const auto& id : o.get<std::vector<std::string>>("subjects")) ds.subjects.push_back(load_subject(dir / id));
  o.finish();
  return ds;
}

}  // namespace gnv
