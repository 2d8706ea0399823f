// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/voxel_grid.hpp"

#include <cmath>
#include <string>

#include "gnv/error.hpp"

namespace gnv {

void GridLayout::validate() const {
  if (channels == 0) throw ConfigError("voxel grid needs at least one channel");
  for (std::size_t d : dims) {
    if (d < 2) throw ConfigError("voxel grid dims must be >= 2");
  }
  if (!aabb.valid()) throw ConfigError("voxel grid aabb min must be below max on every axis");
}

VoxelGrid VoxelGrid::zeros(const GridLayout& layout) {
  layout.validate();
  return {layout, std::vector<double>(layout.value_count(), 0.0)};
}

void InterpConfig::validate(const GridLayout& layout) const {
  if (scales.empty()) throw ConfigError("interpolation needs at least one scale");
  const std::size_t min_dim = std::min({layout.dims[0], layout.dims[1], layout.dims[2]});
  int prev = 0;
  for (int s : scales) {
    if (s <= prev) throw ConfigError("interpolation scales must be positive and strictly increasing");
    if (2 * static_cast<std::size_t>(s) >= min_dim) {
      throw ConfigError("interpolation scale " + std::to_string(s) + " too large for grid");
    }
    prev = s;
  }
}

std::optional<Vec3> world_to_grid(const GridLayout& layout, const Vec3& p) {
  if (!layout.aabb.contains(p)) return std::nullopt;
  Vec3 u;
  for (int a = 0; a < 3; ++a) {
    const double n1 = static_cast<double>(layout.dims[a] - 1);
    u[a] = (p[a] - layout.aabb.min[a]) / (layout.aabb.max[a] - layout.aabb.min[a]) * n1;
  }
  return u;
}

namespace {

// Lower corner, span and fractional position of a continuous index on the
// stride-s sub-lattice (multiples of s plus the last node). The last cell on
// an axis is shortened when dims - 1 is not a multiple of s.
struct Cell {
  std::array<std::size_t, 3> base;
  std::array<std::size_t, 3> span;
  std::array<double, 3> frac;
};

Cell locate(const GridLayout& layout, const Vec3& u, std::size_t s) {
  Cell c{};
  for (int a = 0; a < 3; ++a) {
    const std::size_t last = layout.dims[a] - 1;
    const std::size_t top = (last - 1) / s * s;  // lowest corner of the last cell
    const double q = std::floor(u[a] / static_cast<double>(s));
    std::size_t b = q <= 0.0 ? 0 : static_cast<std::size_t>(q) * s;
    if (b > top) b = top;
    c.base[a] = b;
    c.span[a] = std::min(s, last - b);
    c.frac[a] = (u[a] - static_cast<double>(b)) / static_cast<double>(c.span[a]);
  }
  return c;
}

// Calls fn(offset, weight, dweight/du) for the 8 corners.
template <typename Fn>
void for_each_corner(const GridLayout& layout, const Cell& c, Fn&& fn) {
  const double ix = 1.0 / static_cast<double>(c.span[0]), iy = 1.0 / static_cast<double>(c.span[1]),
               iz = 1.0 / static_cast<double>(c.span[2]);
  for (int corner = 0; corner < 8; ++corner) {
    const int bx = corner >> 2 & 1, by = corner >> 1 & 1, bz = corner & 1;
    const double wx = bx ? c.frac[0] : 1.0 - c.frac[0];
    const double wy = by ? c.frac[1] : 1.0 - c.frac[1];
    const double wz = bz ? c.frac[2] : 1.0 - c.frac[2];
    const double sx = (bx ? ix : -ix), sy = (by ? iy : -iy), sz = (bz ? iz : -iz);
    const Vec3 dw(sx * wy * wz, wx * sy * wz, wx * wy * sz);
    const std::size_t off = layout.node_offset(c.base[0] + bx * c.span[0], c.base[1] + by * c.span[1],
                                               c.base[2] + bz * c.span[2]);
    fn(off, wx * wy * wz, dw);
  }
}

Vec3 index_per_world(const GridLayout& layout) {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    g[a] = static_cast<double>(layout.dims[a] - 1) / (layout.aabb.max[a] - layout.aabb.min[a]);
  }
  return g;
}

void check_data(const GridLayout& layout, std::span<const double> data) {
  if (data.size() != layout.value_count()) throw ConfigError("voxel data size does not match layout");
}

}  // namespace

void trilinear_sample(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                      std::span<double> out) {
  mdi_sample(layout, data, p, InterpConfig{{1}}, out);
}

void mdi_sample(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                const InterpConfig& config, std::span<double> out) {
  check_data(layout, data);
  const std::size_t C = layout.channels;
  if (out.size() != config.scales.size() * C) throw ConfigError("mdi output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  const auto u = world_to_grid(layout, p);
  if (!u) return;
  for (std::size_t k = 0; k < config.scales.size(); ++k) {
    const Cell cell = locate(layout, *u, static_cast<std::size_t>(config.scales[k]));
    double* o = out.data() + k * C;
    for_each_corner(layout, cell, [&](std::size_t off, double w, const Vec3&) {
      const double* v = data.data() + off;
      for (std::size_t ch = 0; ch < C; ++ch) o[ch] += w * v[ch];
    });
  }
}

void mdi_sample_backward(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                         const InterpConfig& config, std::span<const double> d_out,
                         std::span<double> d_data, Vec3* d_p) {
  check_data(layout, data);
  const std::size_t C = layout.channels;
  if (d_out.size() != config.scales.size() * C) throw ConfigError("mdi cotangent size mismatch");
  if (d_data.size() != layout.value_count()) throw ConfigError("voxel gradient size mismatch");
  const auto u = world_to_grid(layout, p);
  if (!u) return;
  Vec3 du = Vec3::Zero();
  for (std::size_t k = 0; k < config.scales.size(); ++k) {
    const Cell cell = locate(layout, *u, static_cast<std::size_t>(config.scales[k]));
    const double* g = d_out.data() + k * C;
    for_each_corner(layout, cell, [&](std::size_t off, double w, const Vec3& dw) {
      const double* v = data.data() + off;
      double* dd = d_data.data() + off;
      double proj = 0.0;
      for (std::size_t ch = 0; ch < C; ++ch) {
        dd[ch] += w * g[ch];
        proj += g[ch] * v[ch];
      }
      du += proj * dw;
    });
  }
  if (d_p) *d_p += du.cwiseProduct(index_per_world(layout));
}

double sample_channel(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                      std::size_t channel, Vec3* d_p) {
  if (d_p) d_p->setZero();
  const auto u = world_to_grid(layout, p);
  if (!u) return 0.0;
  const Cell cell = locate(layout, *u, 1);
  double value = 0.0;
  Vec3 du = Vec3::Zero();
  for_each_corner(layout, cell, [&](std::size_t off, double w, const Vec3& dw) {
    const double v = data[off + channel];
    value += w * v;
    du += v * dw;
  });
  if (d_p) *d_p = du.cwiseProduct(index_per_world(layout));
  return value;
}

void sample_channel_backward(const GridLayout& layout, const Vec3& p, std::size_t channel,
                             double d_out, std::span<double> d_data) {
  const auto u = world_to_grid(layout, p);
  if (!u || d_out == 0.0) return;
  const Cell cell = locate(layout, *u, 1);
  for_each_corner(layout, cell,
                  [&](std::size_t off, double w, const Vec3&) { d_data[off + channel] += w * d_out; });
}

}  // namespace gnv
