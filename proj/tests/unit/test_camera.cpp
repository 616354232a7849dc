#include <cmath>
#include <vector>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "jointpiv/camera.hpp"
#include "jointpiv/error.hpp"
#include "support/generators.hpp"

namespace jointpiv {
namespace {

using testing::for_all;
using testing::Gen;

PolynomialCamera identity_polynomial() {
  PolynomialCamera::Coefficients a;
  a.fill(Vec2::Zero());
  a[1] = {1.0, 0.0};
  a[2] = {0.0, 1.0};
  return PolynomialCamera(a);
}

// Powers of each monomial in the documented order.
constexpr int kPowers[19][3] = {
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0}, {1, 1, 0}, {0, 2, 0},
    {1, 0, 1}, {0, 1, 1}, {0, 0, 2}, {3, 0, 0}, {2, 1, 0}, {1, 2, 0}, {0, 3, 0},
    {2, 0, 1}, {1, 1, 1}, {0, 2, 1}, {1, 0, 2}, {0, 1, 2}};

Vec2 monomial_table_projection(const PolynomialCamera::Coefficients& a, const Vec3& p) {
  Vec2 out = Vec2::Zero();
  for (int t = 0; t < 19; ++t) {
    const double m = std::pow(p.x(), kPowers[t][0]) * std::pow(p.y(), kPowers[t][1]) *
                     std::pow(p.z(), kPowers[t][2]);
    out += m * a[t];
  }
  return out;
}

// Near-affine camera over a volume of roughly `extent` voxels: every
// monomial moves the image by at most a few pixels across the volume.
double coefficient_scale(int term, double extent) {
  const int degree = kPowers[term][0] + kPowers[term][1] + kPowers[term][2];
  return degree == 0 ? 20.0 : (degree == 1 ? 0.3 : 2.0 / std::pow(extent, degree));
}

PolynomialCamera::Coefficients random_coefficients(Gen& g, double extent) {
  PolynomialCamera::Coefficients a;
  for (int t = 0; t < 19; ++t) {
    const double scale = coefficient_scale(t, extent);
    a[t] = {g.normal(scale), g.normal(scale)};
  }
  a[1].x() += 1.2;
  a[2].y() += 1.2;
  return a;
}

PinholeCamera random_pinhole(Gen& g, const Vec3& target) {
  Eigen::Vector4d q(g.normal(), g.normal(), g.normal(), g.normal());
  q.normalize();
  const Eigen::Matrix3d R = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  const double f = g.uniform(300.0, 900.0);
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = f;
  K(1, 1) = f;
  K(0, 2) = g.uniform(100.0, 200.0);
  K(1, 2) = g.uniform(60.0, 100.0);
  // Place the camera centre a few hundred voxels from the target along the optical axis.
  const Vec3 centre = target - g.uniform(200.0, 400.0) * R.row(2).transpose();
  Mat34 P;
  P.leftCols<3>() = K * R;
  P.col(3) = -K * R * centre;
  return PinholeCamera(P);
}

Mat23 finite_difference_jacobian(const Camera& cam, const Vec3& p, double h) {
  Mat23 J;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = p;
    Vec3 b = p;
    a[i] += h;
    b[i] -= h;
    J.col(i) = (project(cam, a) - project(cam, b)) / (2.0 * h);
  }
  return J;
}

double max_rel(const Mat23& a, const Mat23& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

bool on_boundary(const Box& box, const Vec3& p, double tol) {
  if (!box.contains(p, tol)) return false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(p[i] - box.lo[i]) < tol || std::abs(p[i] - box.hi[i]) < tol) return true;
  }
  return false;
}

TEST(Pinhole, ProjectsByHomogeneousDivision) {
  const PinholeCamera cam(Mat34::Identity());
  const Vec2 px = cam.project({1.0, 2.0, 4.0});
  EXPECT_DOUBLE_EQ(px.x(), 0.25);
  EXPECT_DOUBLE_EQ(px.y(), 0.5);
}

TEST(Pinhole, JacobianAtUnitDepth) {
  const Camera cam = PinholeCamera(Mat34::Identity());
  const Mat23 J = project_jacobian(cam, {0.0, 0.0, 1.0});
  Mat23 expected;
  expected << 1, 0, 0, 0, 1, 0;
  EXPECT_LT((J - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Pinhole, PointBehindCameraIsDegenerate) {
  const Camera cam = PinholeCamera(Mat34::Identity());
  try {
    project(cam, {0.0, 0.0, 0.0});
    FAIL() << "expected degenerate projection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_projection);
  }
}

TEST(Pinhole, BackProjectInvertsProjection) {
  const Camera cam = PinholeCamera(Mat34::Identity());
  const Vec2 xy = back_project(cam, {0.25, 0.5}, 4.0);
  EXPECT_NEAR(xy.x(), 1.0, 1e-12);
  EXPECT_NEAR(xy.y(), 2.0, 1e-12);
}

TEST(Polynomial, IdentityMonomialsPassThrough) {
  const PolynomialCamera cam = identity_polynomial();
  const Vec2 px = cam.project({3.0, 5.0, 7.0});
  EXPECT_DOUBLE_EQ(px.x(), 3.0);
  EXPECT_DOUBLE_EQ(px.y(), 5.0);
  Mat23 expected;
  expected << 1, 0, 0, 0, 1, 0;
  EXPECT_EQ(cam.jacobian({-2.0, 9.0, 1.5}), expected);
}

TEST(Polynomial, IdentityBackProjectionIgnoresDepth) {
  const Camera cam = identity_polynomial();
  for (double z : {-3.0, 0.0, 11.0}) {
    const Vec2 xy = back_project(cam, {3.0, 5.0}, z);
    EXPECT_NEAR(xy.x(), 3.0, 1e-12);
    EXPECT_NEAR(xy.y(), 5.0, 1e-12);
  }
}

TEST(Polynomial, MatchesMonomialTable) {
  for_all(200, 11, [](Gen& g) {
    PolynomialCamera::Coefficients a;
    for (auto& c : a) c = {g.normal(), g.normal()};
    const PolynomialCamera cam(a);
    const Vec3 p = g.vec3(-3.0, 3.0);
    const Vec2 expected = monomial_table_projection(a, p);
    const Vec2 got = cam.project(p);
    EXPECT_LT((got - expected).norm(), 1e-12 * std::max(1.0, expected.norm()));
  });
}

TEST(Camera, JacobiansMatchFiniteDifferences) {
  const Box volume = Box::from_size({200.0, 100.0, 60.0});
  for_all(100, 12, [&](Gen& g) {
    const Vec3 p = g.in_box(volume);
    const Camera pin = random_pinhole(g, volume.center());
    EXPECT_LT(max_rel(project_jacobian(pin, p), finite_difference_jacobian(pin, p, 1e-3)), 1e-6);
    const Camera poly = PolynomialCamera(random_coefficients(g, 200.0));
    EXPECT_LT(max_rel(project_jacobian(poly, p), finite_difference_jacobian(poly, p, 1e-3)), 1e-6);
  });
}

TEST(Camera, BackProjectRoundTrips) {
  const Box volume = Box::from_size({200.0, 100.0, 60.0});
  for_all(100, 13, [&](Gen& g) {
    const Vec3 p = g.in_box(volume);
    const Camera pin = random_pinhole(g, volume.center());
    const Camera poly = PolynomialCamera(random_coefficients(g, 200.0));
    for (const Camera* cam : {&pin, &poly}) {
      const Vec2 px = project(*cam, p);
      const Vec2 xy = back_project(*cam, px, p.z(), volume.center().head<2>());
      EXPECT_LT((project(*cam, {xy.x(), xy.y(), p.z()}) - px).norm(), 1e-6);
    }
  });
}

TEST(RayThrough, OrthographicLikeCameraCrossesDepth) {
  const Camera cam = identity_polynomial();
  const Box volume = Box::from_size({10.0, 10.0, 10.0});
  const Ray ray = ray_through(cam, {3.0, 5.0}, volume);
  EXPECT_LT((ray.entry - Vec3(3, 5, 0)).norm(), 1e-9);
  EXPECT_LT((ray.exit - Vec3(3, 5, 10)).norm(), 1e-9);
}

TEST(RayThrough, SideExitLiesOnBoundary) {
  const Camera cam = PinholeCamera(Mat34::Identity());
  const Box volume{{-5.0, -5.0, 1.0}, {5.0, 5.0, 10.0}};
  const Ray ray = ray_through(cam, {1.0, 0.2}, volume);
  EXPECT_TRUE(on_boundary(volume, ray.entry, 1e-6));
  EXPECT_TRUE(on_boundary(volume, ray.exit, 1e-6));
  EXPECT_NEAR(ray.exit.x(), 5.0, 1e-6);
  EXPECT_NEAR(ray.entry.z(), 1.0, 1e-6);
  EXPECT_LT((project(cam, ray.exit) - Vec2(1.0, 0.2)).norm(), 1e-9);
}

TEST(RayThrough, RandomRaysStayOnBoundaryAndReproject) {
  const Box volume = Box::from_size({200.0, 100.0, 60.0});
  for_all(50, 14, [&](Gen& g) {
    const Camera cam = random_pinhole(g, volume.center());
    const Vec2 px = project(cam, g.in_box(volume));
    const Ray ray = ray_through(cam, px, volume);
    EXPECT_TRUE(on_boundary(volume, ray.entry, 1e-6));
    EXPECT_TRUE(on_boundary(volume, ray.exit, 1e-6));
    EXPECT_LT((project(cam, ray.entry) - px).norm(), 1e-6);
    EXPECT_LT((project(cam, ray.exit) - px).norm(), 1e-6);
  });
}

TEST(RayThrough, MissingRayIsEmpty) {
  const Camera cam = PinholeCamera(Mat34::Identity());
  const Box volume{{-5.0, -5.0, 1.0}, {5.0, 5.0, 10.0}};
  try {
    ray_through(cam, {100.0, 0.0}, volume);
    FAIL() << "expected empty ray";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_ray);
  }
}

std::vector<Correspondence> synthesize(Gen& g, const PolynomialCamera& cam, const Box& volume,
                                       int n, double noise) {
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = g.in_box(volume);
    out.push_back({p, cam.project(p) + Vec2(g.normal(noise), g.normal(noise))});
  }
  return out;
}

double fit_residual(const PolynomialCamera& cam, const std::vector<Correspondence>& data) {
  double sum = 0.0;
  for (const auto& c : data) sum += (cam.project(c.point) - c.pixel).squaredNorm();
  return sum;
}

TEST(FitPolynomial, NoiselessRoundTrip) {
  const Box volume = Box::from_size({200.0, 100.0, 60.0});
  for_all(50, 15, [&](Gen& g) {
    const PolynomialCamera truth(random_coefficients(g, 200.0));
    const PolynomialCamera fit = fit_polynomial(synthesize(g, truth, volume, 30, 0.0));
    // Relative to the coefficient, floored at the generator's scale for its
    // degree so that a coefficient drawn close to zero is not judged alone.
    for (int t = 0; t < 19; ++t) {
      for (int r = 0; r < 2; ++r) {
        EXPECT_LT(testing::rel_err(fit.coefficients()[t][r], truth.coefficients()[t][r],
                                   coefficient_scale(t, 200.0)),
                  1e-9)
            << "term " << t;
      }
    }
  });
}

TEST(FitPolynomial, TooFewCorrespondences) {
  Gen g(16);
  const PolynomialCamera truth(random_coefficients(g, 10.0));
  const auto data = synthesize(g, truth, Box::from_size({10, 10, 10}), 18, 0.0);
  try {
    fit_polynomial(data);
    FAIL() << "expected underdetermined fit";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::underdetermined_fit);
  }
}

TEST(FitPolynomial, PlanarPointsAreRankDeficient) {
  Gen g(17);
  std::vector<Correspondence> data;
  for (int i = 0; i < 40; ++i) data.push_back({{g.uniform(0, 10), g.uniform(0, 10), 2.0}, {0.0, 0.0}});
  EXPECT_THROW(fit_polynomial(data), Error);
}

TEST(FitPolynomial, NoisyFitIsLeastSquaresOptimal) {
  const Box volume = Box::from_size({200.0, 100.0, 60.0});
  for_all(50, 18, [&](Gen& g) {
    const PolynomialCamera truth(random_coefficients(g, 200.0));
    const auto data = synthesize(g, truth, volume, 60, 0.5);
    const PolynomialCamera fit = fit_polynomial(data);
    EXPECT_LE(fit_residual(fit, data), fit_residual(truth, data) * (1.0 + 1e-12));
  });
}

}  // namespace
}  // namespace jointpiv
