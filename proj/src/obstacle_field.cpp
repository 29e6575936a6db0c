#include "scate/obstacle_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace scate {

Sdf::Sdf(Eigen::Vector2d origin, double cell, int nx, int ny, std::vector<double> data,
         std::vector<Circle> source)
    : origin_(std::move(origin)),
      cell_(cell),
      nx_(nx),
      ny_(ny),
      data_(std::move(data)),
      source_(std::move(source)) {
  if (!(cell_ > 0.0)) throw std::invalid_argument("sdf cell must be positive");
  if (nx_ < 2 || ny_ < 2) throw std::invalid_argument("sdf grid needs at least 2x2 nodes");
  if (data_.size() != static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_)) {
    throw std::invalid_argument("sdf data size does not match grid");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("sdf data must be finite");
  }
}

SdfSample Sdf::query(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d hi = upper();
  const Eigen::Vector2d pc = p.cwiseMax(origin_).cwiseMin(hi);
  const Eigen::Vector2d outside = p - pc;

  const Eigen::Vector2d g = (pc - origin_) / cell_;
  const int ix = std::clamp(static_cast<int>(std::floor(g.x())), 0, nx_ - 2);
  const int iy = std::clamp(static_cast<int>(std::floor(g.y())), 0, ny_ - 2);
  const double fx = g.x() - ix;
  const double fy = g.y() - iy;

  const double v00 = node(ix, iy);
  const double v10 = node(ix + 1, iy);
  const double v01 = node(ix, iy + 1);
  const double v11 = node(ix + 1, iy + 1);

  SdfSample s;
  s.distance = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
  s.gradient.x() = ((1 - fy) * (v10 - v00) + fy * (v11 - v01)) / cell_;
  s.gradient.y() = ((1 - fx) * (v01 - v00) + fx * (v11 - v10)) / cell_;

  const double out = outside.norm();
  if (out > 0.0) {
    s.distance += out;
    for (int a = 0; a < 2; ++a) {
      if (outside[a] != 0.0) s.gradient[a] = outside[a] / out;
    }
  }
  return s;
}

Sdf build_sdf(std::span<const Circle> obstacles, const Workspace& workspace,
              const SdfOptions& options) {
  if (!(options.cell > 0.0)) throw std::invalid_argument("sdf cell must be positive");
  const Eigen::Vector2d extent = workspace.max - workspace.min;
  if (!(extent.x() > 0.0) || !(extent.y() > 0.0)) {
    throw std::invalid_argument("workspace must have positive extent");
  }
  const int nx = static_cast<int>(std::ceil(extent.x() / options.cell - 1e-9)) + 1;
  const int ny = static_cast<int>(std::ceil(extent.y() / options.cell - 1e-9)) + 1;
  const double sentinel = 10.0 * workspace.diagonal();

  std::vector<double> data(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Eigen::Vector2d p = workspace.min + options.cell * Eigen::Vector2d(ix, iy);
      double d = sentinel;
      for (const Circle& c : obstacles) d = std::min(d, (p - c.center).norm() - c.radius);
      if (options.wall_band) {
        const double wall = std::min({p.x() - workspace.min.x(), workspace.max.x() - p.x(),
                                      p.y() - workspace.min.y(), workspace.max.y() - p.y()});
        d = std::min(d, wall);
      }
      data[static_cast<std::size_t>(iy) * nx + ix] = d;
    }
  }
  return Sdf(workspace.min, options.cell, nx, ny, std::move(data),
             std::vector<Circle>(obstacles.begin(), obstacles.end()));
}

SdfSample sdf_query(const Sdf& field, const Eigen::Vector2d& point) { return field.query(point); }

HingeValue hinge_cost(double d, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("safety distance must be positive");
  if (d < eps) return {eps - d, -1.0};
  if (d > eps) return {0.0, 0.0};
  return {0.0, -0.5};
}

std::vector<PlacedSphere> robot_spheres(const StateVec& x, const SphereModel& model) {
  const double c = std::cos(x[state::kPsi]);
  const double s = std::sin(x[state::kPsi]);
  const Eigen::Vector2d p(x[state::kX], x[state::kY]);
  std::vector<PlacedSphere> out;
  out.reserve(model.spheres.size());
  for (const Sphere& sp : model.spheres) {
    const Eigen::Vector2d& o = sp.offset;
    PlacedSphere placed;
    placed.center = p + Eigen::Vector2d(c * o.x() - s * o.y(), s * o.x() + c * o.y());
    placed.radius = sp.radius;
    placed.jacobian << 1.0, 0.0, -s * o.x() - c * o.y(),
                       0.0, 1.0, c * o.x() - s * o.y();
    out.push_back(placed);
  }
  return out;
}

SdfPtr sdf_for_step(const FieldMode& mode, int k, int horizon) {
  if (k < 0 || k > horizon) {
    throw std::out_of_range("timestep " + std::to_string(k) + " outside [0, " +
                            std::to_string(horizon) + "]");
  }
  if (const auto* reactive = std::get_if<ReactiveField>(&mode)) return reactive->current;
  const auto& fields = std::get<PredictiveFields>(mode).sequence.fields;
  if (static_cast<int>(fields.size()) != horizon + 1) {
    throw std::invalid_argument("predictive field sequence must hold horizon + 1 fields");
  }
  return fields[static_cast<std::size_t>(k)];
}

void write_sdf_csv(const Sdf& field, std::ostream& out) {
  const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "origin_x,origin_y,cell,nx,ny\n";
  out << field.origin().x() << ',' << field.origin().y() << ',' << field.cell() << ','
      << field.nx() << ',' << field.ny() << '\n';
  for (int iy = 0; iy < field.ny(); ++iy) {
    for (int ix = 0; ix < field.nx(); ++ix) {
      if (ix) out << ',';
      out << field.node(ix, iy);
    }
    out << '\n';
  }
  out.precision(precision);
}

void write_sdf_binary(const Sdf& field, std::ostream& out) {
  const std::int32_t dims[2] = {field.nx(), field.ny()};
  const double header[3] = {field.origin().x(), field.origin().y(), field.cell()};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(field.data().data()),
            static_cast<std::streamsize>(field.data().size() * sizeof(double)));
}

Sdf read_sdf_binary(std::istream& in) {
  std::int32_t dims[2] = {0, 0};
  double header[3] = {0, 0, 0};
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || dims[0] < 2 || dims[1] < 2) throw std::runtime_error("malformed sdf header");
  std::vector<double> data(static_cast<std::size_t>(dims[0]) * dims[1]);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated sdf data");
  return Sdf(Eigen::Vector2d(header[0], header[1]), header[2], dims[0], dims[1], std::move(data));
}

}  // namespace scate
