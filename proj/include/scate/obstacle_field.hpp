#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "scate/dynamics.hpp"

namespace scate {

struct Circle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct Workspace {
  Eigen::Vector2d min = Eigen::Vector2d::Zero();
  Eigen::Vector2d max = Eigen::Vector2d::Constant(4.0);

  double diagonal() const { return (max - min).norm(); }
  bool contains(const Eigen::Vector2d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct SdfSample {
  double distance = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
};

/// Signed distance field sampled on a regular grid (negative inside
/// obstacles). Node (ix, iy) sits at origin + cell * (ix, iy); storage is
/// row-major with iy as the row.
class Sdf {
 public:
  Sdf(Eigen::Vector2d origin, double cell, int nx, int ny, std::vector<double> data,
      std::vector<Circle> source = {});

  const Eigen::Vector2d& origin() const { return origin_; }
  double cell() const { return cell_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const std::vector<double>& data() const { return data_; }
  const std::vector<Circle>& source() const { return source_; }

  double node(int ix, int iy) const { return data_[static_cast<std::size_t>(iy) * nx_ + ix]; }
  Eigen::Vector2d node_position(int ix, int iy) const {
    return origin_ + cell_ * Eigen::Vector2d(ix, iy);
  }
  Eigen::Vector2d upper() const { return node_position(nx_ - 1, ny_ - 1); }

  /// Bilinear interpolation and its exact gradient. Points outside the grid
  /// take the value at the nearest boundary point plus the distance to it.
  SdfSample query(const Eigen::Vector2d& p) const;

 private:
  Eigen::Vector2d origin_;
  double cell_;
  int nx_;
  int ny_;
  std::vector<double> data_;
  std::vector<Circle> source_;
};

using SdfPtr = std::shared_ptr<const Sdf>;

struct SdfOptions {
  double cell = 0.02;
  /// Treat the workspace boundary as an obstacle surface.
  bool wall_band = false;
};

/// Each node stores min over circles of (|node - center| - radius). With no
/// obstacles every node holds 10x the workspace diagonal.
Sdf build_sdf(std::span<const Circle> obstacles, const Workspace& workspace,
              const SdfOptions& options = {});

SdfSample sdf_query(const Sdf& field, const Eigen::Vector2d& point);

struct HingeValue {
  double cost = 0.0;
  double slope = 0.0;  ///< d cost / d distance
};

/// cost = eps - d inside the safety band (d <= eps), else 0. The slope at the
/// kink d == eps is -0.5.
HingeValue hinge_cost(double d, double eps);

struct Sphere {
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();  ///< body frame
  double radius = 0.35;
};

struct SphereModel {
  std::vector<Sphere> spheres{Sphere{}};
};

struct PlacedSphere {
  Eigen::Vector2d center;
  double radius;
  /// d center / d (x, y, psi).
  Eigen::Matrix<double, 2, 3> jacobian;
};

/// center_j = p(x) + R(psi) offset_j.
std::vector<PlacedSphere> robot_spheres(const StateVec& x, const SphereModel& model);

struct SdfSequence {
  std::vector<SdfPtr> fields;  ///< one per support time t_0..t_N
};

/// Obstacle assumed static at its latest observed location.
struct ReactiveField {
  SdfPtr current;
};

/// Known obstacle trajectory, one field per support time.
struct PredictiveFields {
  SdfSequence sequence;
};

using FieldMode = std::variant<ReactiveField, PredictiveFields>;

/// Field the obstacle factor at timestep k should use.
SdfPtr sdf_for_step(const FieldMode& mode, int k, int horizon);

/// Text dump: a header line "origin_x,origin_y,cell,nx,ny" with its values,
/// then ny rows of nx comma-separated distances.
void write_sdf_csv(const Sdf& field, std::ostream& out);
/// Binary dump: int32 nx, ny, float64 origin_x, origin_y, cell, then nx*ny
/// float64 distances row-major; little-endian host layout.
void write_sdf_binary(const Sdf& field, std::ostream& out);
Sdf read_sdf_binary(std::istream& in);

}  // namespace scate
