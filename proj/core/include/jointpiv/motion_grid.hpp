#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "jointpiv/geometry.hpp"

namespace jointpiv {

/// Vertex counts of a lattice, x varying fastest.
struct GridDims {
  int nx = 2;
  int ny = 2;
  int nz = 2;

  std::size_t vertex_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx - 1) * static_cast<std::size_t>(ny - 1) *
           static_cast<std::size_t>(nz - 1);
  }
  std::size_t vertex_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  std::size_t voxel_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * (ny - 1) + j) * (nx - 1) + i;
  }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Coefficients of a trilinear vector field on a regular vertex lattice.
/// Vertex (i, j, k) sits at spacing * (i, j, k) in volume voxel units and
/// carries a displacement in the same units. Components are interleaved per
/// vertex.
class MotionGrid {
 public:
  MotionGrid() : MotionGrid(GridDims{}, 1.0) {}
  MotionGrid(GridDims dims, double spacing);
  MotionGrid(GridDims dims, double spacing, std::vector<double> coeffs);

  /// Smallest lattice with the given spacing that covers the volume.
  static MotionGrid covering(const Box& volume, double spacing);

  const GridDims& dims() const { return dims_; }
  double spacing() const { return spacing_; }
  Vec3 extent() const {
    return spacing_ * Vec3(dims_.nx - 1, dims_.ny - 1, dims_.nz - 1);
  }
  Vec3 position(int i, int j, int k) const { return spacing_ * Vec3(i, j, k); }

  std::span<double> coeffs() { return coeffs_; }
  std::span<const double> coeffs() const { return coeffs_; }
  std::vector<double>& values() { return coeffs_; }
  const std::vector<double>& values() const { return coeffs_; }

  Vec3 at(int i, int j, int k) const;
  void set(int i, int j, int k, const Vec3& u);

 private:
  GridDims dims_;
  double spacing_;
  std::vector<double> coeffs_;
};

/// One scalar per voxel, the Lagrange multiplier of the divergence constraint.
struct PressureField {
  GridDims dims;  // vertex dims of the owning grid
  std::vector<double> values;

  explicit PressureField(GridDims d = {}) : dims(d), values(d.voxel_count(), 0.0) {}
};

/// Hat function of vertex `vertex` evaluated at grid coordinates `x`.
double basis_eval(const std::array<int, 3>& vertex, const Vec3& x);

/// Interpolation stencil of the cell containing a (clamped) point: the eight
/// corner vertex indices, their basis weights, and the weight derivatives with
/// respect to the point in volume units. Derivatives along clamped axes are 0.
struct TrilinearStencil {
  std::array<std::size_t, 8> vertex;
  std::array<double, 8> weight;
  std::array<Vec3, 8> weight_gradient;
};

TrilinearStencil stencil(const MotionGrid& grid, const Vec3& x);

/// Field value at x (volume units), x clamped to the lattice extent.
Vec3 eval(const MotionGrid& grid, const Vec3& x);

/// Spatial Jacobian du/dx at x, consistent with the clamping of `eval`.
Eigen::Matrix3d eval_jacobian(const MotionGrid& grid, const Vec3& x);

/// Field value at x, continuing the boundary cell polynomial outside the
/// lattice instead of clamping.
Vec3 eval_extrapolated(const MotionGrid& grid, const Vec3& x);

/// Integral of div u over one voxel in grid units: a quarter of the summed
/// component differences along the voxel's edges.
double voxel_divergence(const MotionGrid& grid, const std::array<int, 3>& voxel);

/// Matrix-free divergence operator D mapping the 3NML coefficients to the
/// (N-1)(M-1)(L-1) voxel divergences, and its adjoint.
class DivergenceOperator {
 public:
  explicit DivergenceOperator(GridDims dims);

  const GridDims& dims() const { return dims_; }
  std::size_t rows() const { return dims_.voxel_count(); }
  std::size_t cols() const { return 3 * dims_.vertex_count(); }

  void apply(std::span<const double> u, std::span<double> out) const;
  void apply_transpose(std::span<const double> phi, std::span<double> out) const;

  std::vector<double> apply(std::span<const double> u) const;
  std::vector<double> apply_transpose(std::span<const double> phi) const;

 private:
  GridDims dims_;
};

/// Sum over components of the integral of |grad u_l|^2, computed exactly in
/// grid units with the Q1 element stiffness matrix.
struct QuadraticValue {
  double value = 0.0;
  std::vector<double> gradient;
};

QuadraticValue gradient_energy(const MotionGrid& grid);

/// Point-samples the trilinear field at the vertices of a new lattice. Exact
/// for trilinear fields sampled on nested lattices.
MotionGrid prolongate(const MotionGrid& grid, GridDims new_dims, double new_spacing);

/// Full-weighting restriction: each coarse vertex receives the (1/4, 1/2,
/// 1/4)^3 weighted average of the fine field at half-spacing offsets.
MotionGrid restrict_to(const MotionGrid& grid, GridDims new_dims, double new_spacing);

}  // namespace jointpiv
