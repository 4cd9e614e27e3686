#include "shapeinv/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace shapeinv {

namespace {

constexpr double kPi = std::numbers::pi;

struct Part {
  double area;
  std::function<Vec3(Rng&)> sample;
  int tag = 0;
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Each point picks a part with probability proportional to its area.
PointCloud sample_parts(const std::vector<Part>& parts, std::size_t points, Rng& rng,
                        std::vector<int>* tags) {
  std::vector<double> w;
  for (const Part& p : parts) w.push_back(p.area);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  PointCloud out;
  out.reserve(points);
  if (tags != nullptr) tags->clear();
  for (std::size_t i = 0; i < points; ++i) {
    const std::size_t k = pick(rng);
    out.push_back(parts[k].sample(rng));
    if (tags != nullptr) tags->push_back(parts[k].tag);
  }
  return out;
}

Vec3 unit_vector(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    const double r = v.norm();
    if (r > 1e-12) return v / r;
  }
}

/// Lateral surface of a vertical cylinder.
Part tube(const Vec3& base, double radius, double height, int tag = 0) {
  return {2.0 * kPi * radius * height,
          [=](Rng& rng) {
            const double a = uniform(rng, 0.0, 2.0 * kPi);
            return Vec3(base.x() + radius * std::cos(a), base.y() + uniform(rng, 0.0, height),
                        base.z() + radius * std::sin(a));
          },
          tag};
}

/// Horizontal disk.
Part disk(const Vec3& center, double radius, int tag = 0) {
  return {kPi * radius * radius,
          [=](Rng& rng) {
            const double r = radius * std::sqrt(uniform(rng, 0.0, 1.0));
            const double a = uniform(rng, 0.0, 2.0 * kPi);
            return Vec3(center.x() + r * std::cos(a), center.y(), center.z() + r * std::sin(a));
          },
          tag};
}

/// Lateral surface of a vertical conical frustum from radius r0 at y0 to r1
/// at y0 + height. Heights are drawn by rejection against the local radius.
Part frustum(double y0, double r0, double r1, double height, int tag = 0) {
  const double slant = std::hypot(height, r1 - r0);
  const double rmax = std::max(r0, r1);
  return {kPi * (r0 + r1) * slant,
          [=](Rng& rng) {
            double t = 0.0;
            do {
              t = uniform(rng, 0.0, 1.0);
            } while (uniform(rng, 0.0, rmax) > r0 + (r1 - r0) * t);
            const double r = r0 + (r1 - r0) * t;
            const double a = uniform(rng, 0.0, 2.0 * kPi);
            return Vec3(r * std::cos(a), y0 + height * t, r * std::sin(a));
          },
          tag};
}

/// The six faces of an axis-aligned box.
std::vector<Part> box_faces(const Vec3& center, const Vec3& sides, int tag = 0) {
  std::vector<Part> faces;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    for (int sign : {-1, 1}) {
      faces.push_back({sides[u] * sides[v],
                       [=](Rng& rng) {
                         Vec3 p;
                         p[axis] = center[axis] + 0.5 * sign * sides[axis];
                         p[u] = center[u] + uniform(rng, -0.5, 0.5) * sides[u];
                         p[v] = center[v] + uniform(rng, -0.5, 0.5) * sides[v];
                         return p;
                       },
                       tag});
    }
  }
  return faces;
}

PointCloud sample_cylinder(const CylinderFamily& f, std::size_t points, Rng& rng) {
  const double r = uniform(rng, f.r_min, f.r_max);
  const double h = uniform(rng, f.h_min, f.h_max);
  const std::vector<Part> parts = {tube(Vec3(0, -0.5 * h, 0), r, h), disk(Vec3(0, -0.5 * h, 0), r),
                                   disk(Vec3(0, 0.5 * h, 0), r)};
  return sample_parts(parts, points, rng, nullptr);
}

PointCloud sample_lamp(const LampFamily& f, std::size_t points, Rng& rng) {
  const double base_r = uniform(rng, f.base_r_min, f.base_r_max);
  const double top = uniform(rng, f.shade_top_min, f.shade_top_max);
  const double bottom = uniform(rng, f.shade_bottom_min, f.shade_bottom_max);
  const double shade_h = uniform(rng, f.shade_h_min, f.shade_h_max);
  const double y_base = -0.45;
  const double y_shade = 0.45 - shade_h;
  const std::vector<Part> parts = {disk(Vec3(0, y_base, 0), base_r),
                                   tube(Vec3(0, y_base, 0), f.pole_r, y_shade - y_base),
                                   frustum(y_shade, bottom, top, shade_h)};
  return sample_parts(parts, points, rng, nullptr);
}

}  // namespace

std::string family_name(const FamilyKind& kind) {
  struct Name {
    std::string operator()(const SphereFamily&) const { return "sphere"; }
    std::string operator()(const BoxFamily&) const { return "box"; }
    std::string operator()(const CylinderFamily&) const { return "cylinder"; }
    std::string operator()(const LampFamily&) const { return "lamp"; }
  };
  return std::visit(Name{}, kind);
}

FamilyKind family_from_name(const std::string& name) {
  if (name == "sphere") return SphereFamily{};
  if (name == "box") return BoxFamily{};
  if (name == "cylinder") return CylinderFamily{};
  if (name == "lamp") return LampFamily{};
  throw Error(ErrorCode::BadArgument, "unknown shape family '" + name + "'");
}

bool is_thin(const FamilyKind& kind) { return std::holds_alternative<LampFamily>(kind); }

PointCloud sample_sphere_surface(double radius, std::size_t points, Rng& rng) {
  PointCloud out;
  out.reserve(points);
  for (std::size_t i = 0; i < points; ++i) out.push_back(radius * unit_vector(rng));
  return out;
}

PointCloud sample_box_surface(const Vec3& sides, std::size_t points, Rng& rng,
                              std::vector<int>* face_of) {
  std::vector<Part> faces = box_faces(Vec3::Zero(), sides);
  for (std::size_t i = 0; i < faces.size(); ++i) faces[i].tag = static_cast<int>(i);
  return sample_parts(faces, points, rng, face_of);
}

PointCloud sample_shape(const FamilyKind& kind, std::size_t points, Rng& rng) {
  if (points == 0) throw Error(ErrorCode::BadArgument, "shapes need at least one point");
  if (const auto* s = std::get_if<SphereFamily>(&kind)) {
    return sample_sphere_surface(uniform(rng, s->r_min, s->r_max), points, rng);
  }
  if (const auto* b = std::get_if<BoxFamily>(&kind)) {
    const Vec3 sides(uniform(rng, b->side_min, b->side_max), uniform(rng, b->side_min, b->side_max),
                     uniform(rng, b->side_min, b->side_max));
    return sample_box_surface(sides, points, rng);
  }
  if (const auto* c = std::get_if<CylinderFamily>(&kind)) return sample_cylinder(*c, points, rng);
  return sample_lamp(std::get<LampFamily>(kind), points, rng);
}

std::vector<PointCloud> synth_dataset(const ShapeFamily& family, std::size_t count) {
  std::vector<PointCloud> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = derive_rng(family.seed, i);
    out.push_back(sample_shape(family.kind, family.points, rng));
  }
  return out;
}

Vec3 random_direction(Rng& rng) { return unit_vector(rng); }

PointCloud half_space_cut(const PointCloud& cloud, const Vec3& direction, double remove_fraction) {
  require_valid(cloud, "half_space_cut");
  if (!(remove_fraction >= 0.0 && remove_fraction < 1.0)) {
    throw Error(ErrorCode::BadArgument, "remove_fraction must be in [0, 1)");
  }
  std::vector<std::pair<double, std::size_t>> proj;
  proj.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) proj.emplace_back(cloud[i].dot(direction), i);
  std::sort(proj.begin(), proj.end());
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround((1.0 - remove_fraction) * static_cast<double>(cloud.size()))));
  std::vector<unsigned char> flags(cloud.size(), 0);
  for (std::size_t i = 0; i < keep; ++i) flags[proj[i].second] = 1;
  return gather(cloud, index_set_from_flags(flags));
}

PointCloud chair(std::size_t points, double leg_offset, Rng& rng, std::vector<unsigned char>* is_leg,
                 double leg_radius) {
  std::vector<Part> parts = box_faces(Vec3(0, 0, 0), Vec3(0.5, 0.05, 0.5));
  for (Part& p : box_faces(Vec3(0, 0.275, -0.225), Vec3(0.5, 0.5, 0.05))) parts.push_back(p);
  const double c = 0.2 + leg_offset;
  for (double x : {-c, c}) {
    for (double z : {-c, c}) parts.push_back(tube(Vec3(x, -0.425, z), leg_radius, 0.4, 1));
  }
  std::vector<int> tags;
  PointCloud out = sample_parts(parts, points, rng, &tags);
  if (is_leg != nullptr) {
    is_leg->assign(tags.size(), 0);
    for (std::size_t i = 0; i < tags.size(); ++i) (*is_leg)[i] = tags[i] == 1 ? 1 : 0;
  }
  return out;
}

}  // namespace shapeinv
