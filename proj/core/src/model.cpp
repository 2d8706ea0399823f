// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/model.hpp"

#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "gnv/error.hpp"
#include "json_util.hpp"

namespace gnv {

using detail::json;
using detail::StrictObject;

void ModelConfig::validate() const {
  if (bone_count == 0) throw ConfigError("model needs at least one bone");
  voxels.validate();
  interp.validate(voxels);
  if (radiance.feature_dim != interp.output_size(voxels)) {
    throw ConfigError("radiance feature_dim must equal |scales| * voxel channels (" +
                      std::to_string(interp.output_size(voxels)) + ")");
  }
  if (weight_net.channels.empty()) throw ConfigError("weight net needs at least one hidden stage");
  if (weight_prior && (prior_sigma <= 0.0 || prior_background < 0.0)) {
    throw ConfigError("weight prior sigma must be positive and background level non-negative");
  }
}

ModelConfig ModelConfig::full(const Aabb& canonical_box, std::size_t bone_count) {
  ModelConfig c;
  c.bone_count = bone_count;
  c.voxels = GridLayout{6, {160, 160, 160}, canonical_box};
  c.radiance.feature_dim = c.interp.output_size(c.voxels);
  return c;
}

ModelConfig ModelConfig::desk(const Aabb& canonical_box, std::size_t bone_count) {
  ModelConfig c;
  c.bone_count = bone_count;
  // About 4.5 cm cells along the longest axis, at least 12 cells per axis.
  const Vec3 ext = canonical_box.extent();
  const double cell = ext.maxCoeff() / 47.0;
  std::array<std::size_t, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = std::max<std::size_t>(12, static_cast<std::size_t>(std::ceil(ext[a] / cell)) + 1);
  c.voxels = GridLayout{6, dims, canonical_box};
  c.radiance.feature_dim = c.interp.output_size(c.voxels);
  c.radiance.width = 64;
  c.radiance.depth = 3;
  c.radiance.color_width = 32;
  c.pose_refine.hidden = 64;
  c.pose_refine.hidden_layers = 2;
  c.weight_net.embedding_dim = 32;
  c.weight_net.expand = 256;
  c.weight_net.channels = {32, 32, 16};
  return c;
}

namespace {

json encoding_json(EncodingSpec s) { return s.frequencies; }

json aabb_json(const Aabb& b) { return {{"min", detail::vec3_json(b.min)}, {"max", detail::vec3_json(b.max)}}; }

Aabb aabb_from(const json& j, const std::string& ctx) {
  StrictObject o(j, ctx);
  Aabb b{detail::vec3_from(o.raw("min"), ctx + ".min"), detail::vec3_from(o.raw("max"), ctx + ".max")};
  o.finish();
  return b;
}

std::string sampling_name(WeightSampling s) { return s == WeightSampling::kCanonical ? "canonical" : "observed"; }

WeightSampling parse_sampling(const std::string& s) {
  if (s == "canonical") return WeightSampling::kCanonical;
  if (s == "observed") return WeightSampling::kObserved;
  throw ConfigError("unknown weight_sampling '" + s + "'");
}

}  // namespace

json to_json(const ModelConfig& c) {
  json j;
  j["bone_count"] = c.bone_count;
  j["voxels"] = {{"channels", c.voxels.channels},
                 {"dims", c.voxels.dims},
                 {"aabb", aabb_json(c.voxels.aabb)}};
  j["interp_scales"] = c.interp.scales;
  j["radiance"] = {{"feature_encoding", encoding_json(c.radiance.feature_encoding)},
                   {"time_encoding", encoding_json(c.radiance.time_encoding)},
                   {"coord_encoding", encoding_json(c.radiance.coord_encoding)},
                   {"direction_encoding", encoding_json(c.radiance.direction_encoding)},
                   {"width", c.radiance.width},
                   {"depth", c.radiance.depth},
                   {"color_width", c.radiance.color_width},
                   {"density_bias", c.radiance.density_bias}};
  j["pose_refine"] = {{"hidden", c.pose_refine.hidden},
                      {"hidden_layers", c.pose_refine.hidden_layers},
                      {"translation_branch", c.pose_refine.translation_branch}};
  j["weight_net"] = {{"embedding_dim", c.weight_net.embedding_dim},
                     {"expand", c.weight_net.expand},
                     {"channels", c.weight_net.channels}};
  j["weight_sampling"] = sampling_name(c.weight_sampling);
  j["weight_prior"] = c.weight_prior;
  j["prior_sigma"] = c.prior_sigma;
  j["prior_background"] = c.prior_background;
  j["confidence_density"] = c.confidence_density;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  StrictObject o(j, "model");
  ModelConfig c;
  c.bone_count = o.get<std::size_t>("bone_count");
  {
    StrictObject v(o.raw("voxels"), "model.voxels");
    c.voxels.channels = v.get<std::size_t>("channels");
    c.voxels.dims = v.get<std::array<std::size_t, 3>>("dims");
    c.voxels.aabb = aabb_from(v.raw("aabb"), "model.voxels.aabb");
    v.finish();
  }
  c.interp.scales = o.get<std::vector<int>>("interp_scales");
  c.radiance.feature_dim = c.interp.output_size(c.voxels);
  {
    StrictObject r(o.raw("radiance"), "model.radiance");
    c.radiance.feature_encoding.frequencies = r.get<int>("feature_encoding");
    c.radiance.time_encoding.frequencies = r.get<int>("time_encoding");
    c.radiance.coord_encoding.frequencies = r.get<int>("coord_encoding");
    c.radiance.direction_encoding.frequencies = r.get<int>("direction_encoding");
    c.radiance.width = r.get<std::size_t>("width");
    c.radiance.depth = r.get<std::size_t>("depth");
    c.radiance.color_width = r.get<std::size_t>("color_width");
    c.radiance.density_bias = r.get<double>("density_bias");
    r.finish();
  }
  {
    StrictObject p(o.raw("pose_refine"), "model.pose_refine");
    c.pose_refine.hidden = p.get<std::size_t>("hidden");
    c.pose_refine.hidden_layers = p.get<std::size_t>("hidden_layers");
    c.pose_refine.translation_branch = p.get<bool>("translation_branch");
    p.finish();
  }
  {
    StrictObject w(o.raw("weight_net"), "model.weight_net");
    c.weight_net.embedding_dim = w.get<std::size_t>("embedding_dim");
    c.weight_net.expand = w.get<std::size_t>("expand");
    c.weight_net.channels = w.get<std::vector<std::size_t>>("channels");
    w.finish();
  }
  c.weight_sampling = parse_sampling(o.get<std::string>("weight_sampling"));
  c.weight_prior = o.get<bool>("weight_prior");
  c.prior_sigma = o.get<double>("prior_sigma");
  c.prior_background = o.get<double>("prior_background");
  c.confidence_density = o.get<bool>("confidence_density");
  o.finish();
  c.validate();
  return c;
}

std::string_view component_name(Component c) {
  switch (c) {
    case Component::kGeneralVoxels:
      return "general_voxels";
    case Component::kRadiance:
      return "radiance";
    case Component::kWeightNet:
      return "weight_net";
    case Component::kPoseRefine:
      return "pose_refine";
  }
  return "unknown";
}

Component component_of(std::string_view name) {
  if (name == kGeneralVoxels) return Component::kGeneralVoxels;
  if (name.starts_with("radiance.")) return Component::kRadiance;
  if (name.starts_with("weight_net.")) return Component::kWeightNet;
  if (name.starts_with("pose_refine.")) return Component::kPoseRefine;
  throw ConfigError("parameter '" + std::string(name) + "' belongs to no shared component");
}

bool LoadMask::loads(Component c) const {
  switch (c) {
    case Component::kGeneralVoxels:
      return general_voxels;
    case Component::kRadiance:
      return radiance;
    case Component::kWeightNet:
      return weight_net;
    case Component::kPoseRefine:
      return pose_refine;
  }
  return false;
}

LoadMask LoadMask::parse(std::string_view text) {
  if (text == "all") return all();
  if (text == "none" || text.empty()) return none();
  LoadMask m = none();
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "general_voxels") {
      m.general_voxels = true;
    } else if (item == "radiance") {
      m.radiance = true;
    } else if (item == "weight_net") {
      m.weight_net = true;
    } else if (item == "pose_refine") {
      m.pose_refine = true;
    } else {
      throw ConfigError("unknown load_mask component '" + item + "'");
    }
  }
  return m;
}

std::string LoadMask::to_string() const {
  if (general_voxels && radiance && weight_net && pose_refine) return "all";
  std::string out;
  for (Component c : {Component::kGeneralVoxels, Component::kRadiance, Component::kWeightNet, Component::kPoseRefine}) {
    if (!loads(c)) continue;
    if (!out.empty()) out += ",";
    out += component_name(c);
  }
  return out.empty() ? "none" : out;
}

Model::Model(ModelConfig config)
    : config_(std::move(config)),
      radiance_(config_.radiance),
      refiner_(config_.bone_count, config_.pose_refine),
      weight_net_(config_.bone_count, config_.weight_net, config_.voxels.aabb) {
  config_.validate();
}

SharedState Model::init_shared(std::uint64_t seed) const {
  SharedState s;
  std::mt19937_64 rng(seed);
  s.params.add(std::string(kGeneralVoxels), config_.voxels.tensor_shape());
  radiance_.add_params(s.params, rng);
  refiner_.add_params(s.params, rng);
  weight_net_.add_params(s.params, rng);
  return s;
}

SubjectState Model::init_subject() const {
  SubjectState s;
  s.params.add(std::string(kIndividualVoxels), config_.voxels.tensor_shape());
  s.params.add(std::string(kEmbedding), {config_.weight_net.embedding_dim});
  return s;
}

SharedState Model::load_shared(const SharedState& pretrained, const LoadMask& mask, std::uint64_t seed) const {
  check_shared(pretrained.params);
  SharedState s = init_shared(seed);
  for (auto& t : s.params.tensors()) {
    if (mask.loads(component_of(t.name))) t.values = pretrained.params.at(t.name).values;
  }
  return s;
}

std::vector<double> Model::weight_prior(const Skeleton& skeleton) const {
  if (!config_.weight_prior) return {};
  if (skeleton.bone_count() != config_.bone_count) throw ConfigError("skeleton bone count does not match model");
  return bone_weight_prior(weight_net_.output_layout(), skeleton, config_.prior_sigma, config_.prior_background);
}

namespace {

void check_store(const ParameterStore& expected, const ParameterStore& actual, const char* what) {
  std::vector<std::string> problems;
  for (const auto& t : expected.tensors()) {
    if (!actual.contains(t.name)) {
      problems.push_back(t.name + " missing");
    } else if (actual.at(t.name).shape != t.shape) {
      problems.push_back(t.name + " has shape " + shape_to_string(actual.at(t.name).shape) + ", expected " +
                         shape_to_string(t.shape));
    }
  }
  for (const auto& t : actual.tensors()) {
    if (!expected.contains(t.name)) problems.push_back(t.name + " unexpected");
  }
  if (problems.empty()) return;
  std::string msg = std::string("incompatible ") + what + " state:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

}  // namespace

void Model::check_shared(const ParameterStore& params) const {
  check_store(init_shared(0).params, params, "shared");
}

void Model::check_subject(const ParameterStore& params) const {
  check_store(init_subject().params, params, "subject");
}

}  // namespace gnv
