#include <cmath>
#include <numbers>
#include <sstream>

#include <doctest.h>

#include "scate/obstacle_field.hpp"

using namespace scate;

namespace {

Sdf one_circle(double cell = 0.02) {
  const Circle c{Eigen::Vector2d(1.3, 2.2), 0.25};
  SdfOptions opt;
  opt.cell = cell;
  return build_sdf(std::span(&c, 1), Workspace{}, opt);
}

}  // namespace

TEST_CASE("grid nodes hold exact circle distances") {
  const Sdf f = one_circle();
  CHECK(f.nx() == 201);
  CHECK(f.ny() == 201);
  CHECK(f.origin() == Eigen::Vector2d::Zero());
  for (int iy = 0; iy < f.ny(); iy += 17) {
    for (int ix = 0; ix < f.nx(); ix += 13) {
      const Eigen::Vector2d p = f.node_position(ix, iy);
      const double want = (p - Eigen::Vector2d(1.3, 2.2)).norm() - 0.25;
      CHECK(f.node(ix, iy) == doctest::Approx(want).epsilon(1e-12));
      CHECK(f.query(p).distance == doctest::Approx(want).epsilon(1e-12));
    }
  }
  // Negative inside.
  CHECK(f.query(Eigen::Vector2d(1.3, 2.2)).distance == doctest::Approx(-0.25).epsilon(1e-3));
}

TEST_CASE("nearest obstacle wins and an empty field is far") {
  const Circle cs[] = {{Eigen::Vector2d(1.0, 1.0), 0.2}, {Eigen::Vector2d(3.0, 3.0), 0.5}};
  const Sdf f = build_sdf(cs, Workspace{}, {0.05});
  CHECK(f.query(Eigen::Vector2d(1.5, 1.0)).distance == doctest::Approx(0.3));
  CHECK(f.query(Eigen::Vector2d(3.0, 2.0)).distance == doctest::Approx(0.5));
  const Sdf empty = build_sdf({}, Workspace{});
  for (double v : empty.data()) CHECK(v == doctest::Approx(10.0 * std::sqrt(32.0)));
}

TEST_CASE("bilinear interpolation inside a cell") {
  std::vector<double> data{0.0, 1.0, 2.0, 5.0};
  const Sdf f(Eigen::Vector2d(1.0, 1.0), 0.5, 2, 2, data);
  // Cell centre is the mean of the corners.
  CHECK(f.query(Eigen::Vector2d(1.25, 1.25)).distance == doctest::Approx(2.0));
  // Along the bottom edge it is linear in x.
  CHECK(f.query(Eigen::Vector2d(1.1, 1.0)).distance == doctest::Approx(0.2));
  const SdfSample s = f.query(Eigen::Vector2d(1.1, 1.3));
  // d/dx = ((1 - fy)(v10 - v00) + fy (v11 - v01)) / cell with fy = 0.6
  CHECK(s.gradient.x() == doctest::Approx((0.4 * 1.0 + 0.6 * 3.0) / 0.5));
  CHECK(s.gradient.y() == doctest::Approx((0.8 * 2.0 + 0.2 * 4.0) / 0.5));

  CHECK_THROWS_AS(Sdf(Eigen::Vector2d::Zero(), 0.5, 2, 2, {0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Sdf(Eigen::Vector2d::Zero(), -1.0, 2, 2, data), std::invalid_argument);
}

TEST_CASE("query gradient matches finite differences off the grid lines") {
  const Sdf f = one_circle(0.1);
  for (double x = 0.333; x < 3.9; x += 0.41) {
    for (double y = 0.271; y < 3.9; y += 0.37) {
      const Eigen::Vector2d p(x, y);
      const SdfSample s = f.query(p);
      const double h = 1e-6;
      const double gx = (f.query(p + Eigen::Vector2d(h, 0)).distance - f.query(p - Eigen::Vector2d(h, 0)).distance) / (2 * h);
      const double gy = (f.query(p + Eigen::Vector2d(0, h)).distance - f.query(p - Eigen::Vector2d(0, h)).distance) / (2 * h);
      CHECK(s.gradient.x() == doctest::Approx(gx).epsilon(1e-6));
      CHECK(s.gradient.y() == doctest::Approx(gy).epsilon(1e-6));
    }
  }
}

TEST_CASE("points outside the grid add the distance to the boundary") {
  const Sdf f = one_circle();
  const double edge = f.query(Eigen::Vector2d(4.0, 2.2)).distance;
  const SdfSample s = f.query(Eigen::Vector2d(4.5, 2.2));
  CHECK(s.distance == doctest::Approx(edge + 0.5));
  CHECK(s.gradient.x() == doctest::Approx(1.0));
}

TEST_CASE("obstacle hinge") {
  CHECK(hinge_cost(0.1, 0.4).cost == doctest::Approx(0.3));
  CHECK(hinge_cost(0.1, 0.4).slope == -1.0);
  CHECK(hinge_cost(-0.2, 0.4).cost == doctest::Approx(0.6));
  CHECK(hinge_cost(0.5, 0.4).cost == 0.0);
  CHECK(hinge_cost(0.5, 0.4).slope == 0.0);
  CHECK(hinge_cost(0.4, 0.4).cost == 0.0);
  CHECK(hinge_cost(0.4, 0.4).slope == -0.5);
  CHECK_THROWS_AS(hinge_cost(0.1, 0.0), std::invalid_argument);
  // Continuous and non-increasing.
  double prev = hinge_cost(-1.0, 0.4).cost;
  for (double d = -1.0; d < 1.0; d += 1e-3) {
    const double c = hinge_cost(d, 0.4).cost;
    CHECK(c <= prev);
    CHECK(prev - c <= 1e-3 + 1e-12);
    prev = c;
  }
}

TEST_CASE("robot spheres rotate with the heading") {
  SphereModel m;
  m.spheres = {Sphere{Eigen::Vector2d(0.1, 0.0), 0.2}, Sphere{Eigen::Vector2d::Zero(), 0.3}};
  StateVec x = StateVec::Zero();
  x[state::kX] = 1.0;
  x[state::kY] = 2.0;
  x[state::kPsi] = std::numbers::pi / 2.0;
  const std::vector<PlacedSphere> s = robot_spheres(x, m);
  REQUIRE(s.size() == 2);
  CHECK(s[0].center.x() == doctest::Approx(1.0));
  CHECK(s[0].center.y() == doctest::Approx(2.1));
  CHECK(s[0].jacobian(0, 2) == doctest::Approx(-0.1));
  CHECK(s[0].jacobian(1, 2) == doctest::Approx(0.0));
  CHECK(s[1].center == Eigen::Vector2d(1.0, 2.0));
  CHECK(s[1].radius == 0.3);
  CHECK(s[1].jacobian.col(2).isZero(0.0));
}

TEST_CASE("field selection per step") {
  auto a = std::make_shared<const Sdf>(one_circle(0.5));
  auto b = std::make_shared<const Sdf>(build_sdf({}, Workspace{}, {0.5}));
  const FieldMode reactive = ReactiveField{a};
  CHECK(sdf_for_step(reactive, 0, 3) == a);
  CHECK(sdf_for_step(reactive, 3, 3) == a);
  CHECK_THROWS_AS(sdf_for_step(reactive, 4, 3), std::out_of_range);
  const FieldMode predictive = PredictiveFields{SdfSequence{{a, b, b, a}}};
  CHECK(sdf_for_step(predictive, 1, 3) == b);
  CHECK(sdf_for_step(predictive, 3, 3) == a);
  CHECK_THROWS_AS(sdf_for_step(predictive, 1, 4), std::invalid_argument);
}

TEST_CASE("sdf dumps") {
  const Sdf f = one_circle(0.25);
  std::stringstream bin;
  write_sdf_binary(f, bin);
  const Sdf g = read_sdf_binary(bin);
  CHECK(g.nx() == f.nx());
  CHECK(g.ny() == f.ny());
  CHECK(g.cell() == f.cell());
  CHECK(g.origin() == f.origin());
  CHECK(g.data() == f.data());

  std::stringstream again;
  write_sdf_binary(f, again);
  std::string s = again.str();
  s.resize(s.size() - 8);
  std::stringstream cut(s);
  CHECK_THROWS(read_sdf_binary(cut));

  std::ostringstream csv;
  write_sdf_csv(f, csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "origin_x,origin_y,cell,nx,ny");
  int rows = 0;
  std::getline(lines, line);
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == f.ny());
}
