// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural capsule bodies with an analytic density/color field, posed over
// time, rendered through the shared compositor and stored as datasets.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gnv/image.hpp"
#include "gnv/math.hpp"
#include "gnv/renderer.hpp"
#include "gnv/skeleton.hpp"

namespace gnv {

/// Eight-bone humanoid in T-pose: pelvis (root), spine, head, two arms of two
/// bones each and a single lower-body bone.
Skeleton humanoid_skeleton();

struct SyntheticSubject {
  Skeleton skeleton;
  std::vector<double> radius;     // per bone, meters
  std::vector<Vec3> color;        // per bone, near the joint
  std::vector<Vec3> tip_color;    // per bone, near the tip
  double softness = 0.03;         // half-width of the density falloff
  double sigma_max = 40.0;
  std::uint64_t seed = 0;
};

struct SubjectVariation {
  double length = 0.2;  // relative limb length spread
  double radius = 0.3;  // relative radius spread
};

/// Deterministic in `base_seed`; subject k uses seed base_seed + k.
std::vector<SyntheticSubject> make_subjects(std::size_t count, std::uint64_t base_seed,
                                            const SubjectVariation& variation = {});

/// Fixed canonical box containing every subject make_subjects can produce.
Aabb canonical_envelope(const SubjectVariation& variation = {});

/// Subject posed for one frame: one capsule per bone.
struct PosedBody {
  std::vector<Vec3> a, b;  // segment end points
  const SyntheticSubject* subject = nullptr;
};

PosedBody pose_body(const SyntheticSubject& subject, const Pose& pose);

struct FieldSample {
  Vec3 color = Vec3::Zero();
  double sigma = 0.0;
};

/// sigma = sigma_max (1 - smoothstep(-softness, softness, min_i s_i)) with s_i
/// the signed capsule distance; color from the nearest capsule, blended from
/// joint to tip color along the bone.
FieldSample gt_field(const PosedBody& body, const Vec3& x);

/// Midpoint-sampled render of the analytic field.
Image render_gt(const SyntheticSubject& subject, const Pose& pose, const Camera& camera, std::size_t n_samples = 256,
                const Vec3& background = Vec3::Zero());

/// Smooth periodic motion: a root yaw sweep plus sinusoidal limb swings whose
/// phases depend on the subject seed.
struct MotionSpec {
  double yaw_range = 0.8 * 3.14159265358979323846;  // total sweep is 2 * yaw_range
  double arm_amplitude = 0.6;
  double elbow_amplitude = 0.7;
  double leg_amplitude = 0.25;
  double head_amplitude = 0.2;
  double cycles = 1.5;

  Pose pose_at(const SyntheticSubject& subject, double time) const;
};

/// Cameras on a circle around the body at equal azimuth steps, camera 0 on +z.
/// The focal length in pixels is focal_per_width * width.
std::vector<Camera> camera_rig(std::size_t count, std::size_t width, std::size_t height, double distance = 3.2,
                               double height_m = 0.3, double focal_per_width = 82.0 / 64.0);

struct DatasetSpec {
  std::size_t frames = 20;
  std::size_t cameras = 4;
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t gt_samples = 256;
  MotionSpec motion;
  Vec3 background = Vec3::Zero();
};

/// One image with the indices that locate its frame and camera.
struct LabeledImage {
  std::size_t frame = 0;
  std::size_t camera = 0;
  Image image;
};

struct FrameRecord {
  std::size_t index = 0;
  double time = 0.0;
  Pose pose;
};

struct SubjectData {
  std::string id;
  Skeleton skeleton;
  std::vector<Camera> cameras;
  std::vector<FrameRecord> frames;
  std::vector<LabeledImage> train;  // camera 0
  std::vector<LabeledImage> eval;   // remaining cameras
};

struct Dataset {
  Aabb canonical_box;
  Vec3 background = Vec3::Zero();
  std::vector<SubjectData> subjects;
};

/// Writes out_dir/dataset.json and out_dir/subject_<k>/{manifest.json, *.png}.
void generate_dataset(const std::vector<SyntheticSubject>& subjects, const DatasetSpec& spec,
                      const std::filesystem::path& out_dir);

/// Loads one subject directory (manifest and images).
SubjectData load_subject(const std::filesystem::path& subject_dir);
/// Loads every subject listed in out_dir/dataset.json.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace gnv
