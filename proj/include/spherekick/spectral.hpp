#pragma once

// Spherical-harmonic representation of real scalar fields on the unit sphere,
// Gauss grids and the transform pair between them.
//
// Conventions
//   * Y_n^m(lambda, mu) = P_n^m(mu) e^{i m lambda} with orthonormal P so that
//     the integral of |Y_n^m|^2 over the sphere is 1. No Condon-Shortley phase.
//   * A real field is  sum_n [ a_{n,0} Y_n^0 + 2 Re sum_{m>0} a_{n,m} Y_n^m ],
//     so only m >= 0 is stored and a_{n,-m} = conj(a_{n,m}) is implied.
//   * mu = sin(latitude); grid rows run north to south.
//   * Streamfunctions describe velocities u = n x grad(psi); the velocity
//     inner product is <u,v>_H = sum n(n+1) a conj(b) over all m.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "spherekick/error.hpp"

namespace spherekick {

using complex_t = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

/// Eigenvalue of -Laplacian on degree-n harmonics of the unit sphere.
constexpr double degree_eigenvalue(int n) noexcept { return double(n) * double(n + 1); }

//---------------------------------------------------------------------------//
// Real orthonormal basis and its ordering
//---------------------------------------------------------------------------//

enum class Parity : unsigned char { cos, sin };

struct HarmonicIndex {
  int n = 1;
  int m = 0;
  Parity parity = Parity::cos;

  double eigenvalue() const noexcept { return degree_eigenvalue(n); }
  bool valid() const noexcept {
    return n >= 0 && m >= 0 && m <= n && !(m == 0 && parity == Parity::sin);
  }
  friend bool operator==(const HarmonicIndex&, const HarmonicIndex&) = default;
};

/// Number of real modes with 1 <= n <= N.
constexpr int mode_count(int truncation) noexcept { return truncation * (truncation + 2); }

/// Bijection j -> (n, m, parity) for j = 1..N(N+2): degree-major, order-minor,
/// cos before sin. Eigenvalues are non-decreasing in j.
class ModeOrdering {
 public:
  explicit ModeOrdering(int truncation);

  int truncation() const noexcept { return truncation_; }
  int size() const noexcept { return int(table_.size()); }

  /// 1-based lookup.
  const HarmonicIndex& operator[](int j) const;
  double eigenvalue(int j) const { return (*this)[j].eigenvalue(); }

  /// Inverse of operator[]; closed form, valid for any truncation >= n.
  static int index_of(const HarmonicIndex& h);
  /// Closed-form forward map; j >= 1.
  static HarmonicIndex decode(int j);

 private:
  int truncation_;
  std::vector<HarmonicIndex> table_;
};

//---------------------------------------------------------------------------//
// Spectral coefficients
//---------------------------------------------------------------------------//

/// Triangular array a_{n,m}, 0 <= m <= n <= N. Stored order-major so that
/// the Legendre sums run over contiguous memory.
class SpectralScalar {
 public:
  SpectralScalar() = default;
  explicit SpectralScalar(int truncation);

  int truncation() const noexcept { return truncation_; }
  std::size_t size() const noexcept { return coeffs_.size(); }

  static std::size_t coeff_count(int truncation) noexcept {
    return std::size_t(truncation + 1) * std::size_t(truncation + 2) / 2;
  }
  /// Offset of (n = m, m) in storage.
  static std::size_t order_offset(int truncation, int m) noexcept {
    return std::size_t(m) * std::size_t(truncation + 1) - std::size_t(m) * std::size_t(m - 1) / 2;
  }
  std::size_t index(int n, int m) const noexcept {
    return order_offset(truncation_, m) + std::size_t(n - m);
  }

  complex_t& operator()(int n, int m) { return coeffs_[index(n, m)]; }
  const complex_t& operator()(int n, int m) const { return coeffs_[index(n, m)]; }

  std::span<complex_t> coeffs() noexcept { return coeffs_; }
  std::span<const complex_t> coeffs() const noexcept { return coeffs_; }

  SpectralScalar& operator+=(const SpectralScalar& o);
  SpectralScalar& operator-=(const SpectralScalar& o);
  SpectralScalar& operator*=(double s);

  friend SpectralScalar operator+(SpectralScalar a, const SpectralScalar& b) { return a += b; }
  friend SpectralScalar operator-(SpectralScalar a, const SpectralScalar& b) { return a -= b; }
  friend SpectralScalar operator*(SpectralScalar a, double s) { return a *= s; }
  friend SpectralScalar operator*(double s, SpectralScalar a) { return a *= s; }

  /// Exact (bitwise on values) comparison.
  friend bool operator==(const SpectralScalar&, const SpectralScalar&) = default;

 private:
  int truncation_ = 0;
  std::vector<complex_t> coeffs_;
};

/// Coefficient of the real orthonormal harmonic `h` in `s`.
double real_component(const SpectralScalar& s, const HarmonicIndex& h);
/// s += c * (real orthonormal harmonic h).
void add_real_component(SpectralScalar& s, const HarmonicIndex& h, double c);

/// L2(sphere) inner product of the two real fields.
double l2_inner(const SpectralScalar& a, const SpectralScalar& b);
/// <u_a, u_b>_H for the velocities of two streamfunctions.
double h_inner(const SpectralScalar& a, const SpectralScalar& b);

enum class Norm { H, V, H2 };

/// sqrt(sum_{n>=1} (n(n+1))^p |a_{n,m}|^2) with p = 1, 2, 3 for H, V, H2.
double spectral_norm(const SpectralScalar& psi, Norm order);

/// Multiplies coefficient (n,m) by -n(n+1).
SpectralScalar apply_laplacian(const SpectralScalar& s);
/// Divides by -n(n+1) for n >= 1. Throws non_mean_free if |a_00| > 1e-12.
SpectralScalar invert_laplacian(const SpectralScalar& s);
/// Coefficient-wise d/dlambda (multiplication by i m).
SpectralScalar apply_dlambda(const SpectralScalar& s);

enum class ModePart { low, high };

/// P_cutoff (low) or Q_cutoff = I - P_cutoff (high) with respect to the mode
/// ordering. cutoff must lie in [0, N(N+2)].
SpectralScalar project_modes(const SpectralScalar& s, int cutoff, ModePart part);

/// Streamfunction of the H-orthonormal basis velocity e_j.
SpectralScalar mode_field(int j, int truncation);

/// <u_psi, e_j>_H.
double mode_coordinate(const SpectralScalar& psi, int j);

/// Fraction of H energy carried by m != 0 coefficients (0 for the zero field).
double nonzonal_energy_fraction(const SpectralScalar& psi);

bool is_zonal(const SpectralScalar& s, double tol = 0.0);

//---------------------------------------------------------------------------//
// Grids
//---------------------------------------------------------------------------//

struct GaussGrid {
  int nlat = 0;
  int nlon = 0;
  std::vector<double> mu;       ///< sin(latitude), strictly decreasing
  std::vector<double> weights;  ///< Gauss-Legendre weights, sum 2

  double longitude(int k) const noexcept { return 2.0 * pi * k / nlon; }
  std::size_t size() const noexcept { return std::size_t(nlat) * std::size_t(nlon); }
  /// Quadratic-product dealiasing test for truncation N.
  bool dealiases(int truncation) const noexcept;
};

/// Gauss-Legendre nodes/weights on [-1, 1] (descending nodes).
GaussGrid gauss_grid(int nlat, int nlon);

/// Smallest dealiasing grid for N, each dimension scaled by `oversample`;
/// nlon only has prime factors 2, 3, 5.
GaussGrid make_grid(int truncation, double oversample = 1.0);

/// Real values on a Gauss grid, row-major (latitude, longitude).
class GridScalar {
 public:
  GridScalar() = default;
  GridScalar(int nlat, int nlon, double value = 0.0)
      : nlat_(nlat), nlon_(nlon), values_(std::size_t(nlat) * std::size_t(nlon), value) {}
  explicit GridScalar(const GaussGrid& g, double value = 0.0) : GridScalar(g.nlat, g.nlon, value) {}

  int nlat() const noexcept { return nlat_; }
  int nlon() const noexcept { return nlon_; }
  double& operator()(int i, int k) { return values_[std::size_t(i) * nlon_ + k]; }
  double operator()(int i, int k) const { return values_[std::size_t(i) * nlon_ + k]; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const noexcept;

 private:
  int nlat_ = 0;
  int nlon_ = 0;
  std::vector<double> values_;
};

/// Tangent vector field sampled on the grid, in local (east, north) components.
struct GridVector {
  GridScalar east;
  GridScalar north;
};

//---------------------------------------------------------------------------//
// Transform plan
//---------------------------------------------------------------------------//

/// Immutable transform plan for a truncation on a dealiasing Gauss grid.
/// All member functions are const and safe to call concurrently.
class SphericalTransform {
 public:
  SphericalTransform(int truncation, GaussGrid grid);
  explicit SphericalTransform(int truncation, double oversample = 1.0);
  ~SphericalTransform();

  SphericalTransform(const SphericalTransform&) = delete;
  SphericalTransform& operator=(const SphericalTransform&) = delete;

  int truncation() const noexcept { return truncation_; }
  const GaussGrid& grid() const noexcept { return grid_; }

  /// Quadrature of g against conj(Y_n^m); exact for band-limited g.
  SpectralScalar analyze(const GridScalar& g) const;
  GridScalar synthesize(const SpectralScalar& s) const;
  /// Grid values of d s / d lambda.
  GridScalar synthesize_dlambda(const SpectralScalar& s) const;
  /// Grid values of cos(phi) d s / d phi = (1 - mu^2) d s / d mu.
  GridScalar synthesize_coslat_dphi(const SpectralScalar& s) const;

  /// J(a, b) = (1/cos phi)(a_lambda b_phi - b_lambda a_phi) by the transform
  /// method, truncated to degree N.
  SpectralScalar jacobian(const SpectralScalar& a, const SpectralScalar& b) const;
  /// J(a, b) evaluated pointwise on the grid (no truncation).
  GridScalar jacobian_grid(const SpectralScalar& a, const SpectralScalar& b) const;

  /// Velocity u = n x grad(psi) on the grid.
  GridVector velocity(const SpectralScalar& psi) const;

  /// Integral over the sphere by Gauss quadrature in latitude and the
  /// trapezoid rule in longitude.
  double integrate(const GridScalar& g) const;

 private:
  enum class Kind { value, dlambda, coslat_dphi };

  void check_spectral(const SpectralScalar& s) const;
  void check_grid(const GridScalar& g) const;
  GridScalar synthesize_kind(const SpectralScalar& s, Kind kind) const;

  int truncation_;
  GaussGrid grid_;
  int half_;   // number of northern rows (including the equator row if nlat is odd)
  int nfreq_;  // nlon / 2 + 1
  std::vector<double> legendre_;    // [row][m-major (n,m)] normalized P
  std::vector<double> coslat_dmu_;  // [row][m-major (n,m)] (1 - mu^2) dP/dmu
  void* r2c_ = nullptr;
  void* c2r_ = nullptr;
};

}  // namespace spherekick
