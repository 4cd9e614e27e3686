#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "shapeinv/cloud.hpp"
#include "shapeinv/random.hpp"

namespace shapeinv {

// Synthetic shape families. Every sample fits in the unit cube centred at
// the origin, y is up, and points are spread over the surface in proportion
// to area.

struct SphereFamily {
  double r_min = 0.3;
  double r_max = 0.45;
};

struct BoxFamily {
  double side_min = 0.3;
  double side_max = 0.9;
};

struct CylinderFamily {
  double r_min = 0.15;
  double r_max = 0.4;
  double h_min = 0.3;
  double h_max = 0.9;
};

/// Base disk, thin pole and a conical shade shell.
struct LampFamily {
  double base_r_min = 0.12;
  double base_r_max = 0.25;
  double shade_top_min = 0.08;
  double shade_top_max = 0.2;
  double shade_bottom_min = 0.2;
  double shade_bottom_max = 0.45;
  double shade_h_min = 0.15;
  double shade_h_max = 0.35;
  double pole_r = 0.02;
};

using FamilyKind = std::variant<SphereFamily, BoxFamily, CylinderFamily, LampFamily>;

struct ShapeFamily {
  FamilyKind kind = SphereFamily{};
  std::size_t points = 256;
  std::uint64_t seed = 0;
};

std::string family_name(const FamilyKind& kind);
/// Accepts sphere, box, cylinder, lamp. Throws BadArgument.
FamilyKind family_from_name(const std::string& name);
/// Thin structures get the longer inversion schedule.
bool is_thin(const FamilyKind& kind);

PointCloud sample_shape(const FamilyKind& kind, std::size_t points, Rng& rng);
/// Sample i is drawn from its own stream, so it does not depend on count.
std::vector<PointCloud> synth_dataset(const ShapeFamily& family, std::size_t count);

/// Uniform surface samples of an axis-aligned box centred at the origin.
/// `face_of`, when given, receives the face index (0..5: -x,+x,-y,+y,-z,+z).
PointCloud sample_box_surface(const Vec3& sides, std::size_t points, Rng& rng,
                              std::vector<int>* face_of = nullptr);
PointCloud sample_sphere_surface(double radius, std::size_t points, Rng& rng);

/// Keeps the points whose projection on `direction` is among the lowest
/// (1 - remove_fraction) share; at least one point always survives.
PointCloud half_space_cut(const PointCloud& cloud, const Vec3& direction, double remove_fraction);
Vec3 random_direction(Rng& rng);

/// Chair built from a seat, a back and four tubular legs. `leg_offset` pushes
/// the legs outwards horizontally. `is_leg`, when given, flags leg points.
PointCloud chair(std::size_t points, double leg_offset, Rng& rng,
                 std::vector<unsigned char>* is_leg = nullptr, double leg_radius = 0.025);

}  // namespace shapeinv
