#include "spherekick/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

namespace spherekick {

namespace {

constexpr double sqrt2 = 1.41421356237309504880;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void require_truncation(int truncation) {
  if (truncation < 1) {
    throw Error(Errc::invalid_truncation, "truncation must be >= 1, got " + std::to_string(truncation));
  }
}

void require_same_truncation(const SpectralScalar& a, const SpectralScalar& b) {
  if (a.truncation() != b.truncation()) {
    throw Error(Errc::dimension, "truncations differ (" + std::to_string(a.truncation()) + " vs " +
                                     std::to_string(b.truncation()) + ")");
  }
}

bool smooth_235(int n) {
  for (int p : {2, 3, 5}) {
    while (n % p == 0) n /= p;
  }
  return n == 1;
}

// Weight of (n,m) in sums over all orders -n..n.
inline double order_weight(int m) { return m == 0 ? 1.0 : 2.0; }

}  // namespace

//---------------------------------------------------------------------------//
// ModeOrdering
//---------------------------------------------------------------------------//

ModeOrdering::ModeOrdering(int truncation) : truncation_(truncation) {
  require_truncation(truncation);
  table_.reserve(std::size_t(mode_count(truncation)));
  for (int n = 1; n <= truncation; ++n) {
    table_.push_back({n, 0, Parity::cos});
    for (int m = 1; m <= n; ++m) {
      table_.push_back({n, m, Parity::cos});
      table_.push_back({n, m, Parity::sin});
    }
  }
}

const HarmonicIndex& ModeOrdering::operator[](int j) const {
  if (j < 1 || j > size()) {
    throw Error(Errc::index, "mode index " + std::to_string(j) + " outside [1, " +
                                 std::to_string(size()) + "]");
  }
  return table_[std::size_t(j - 1)];
}

int ModeOrdering::index_of(const HarmonicIndex& h) {
  if (!h.valid() || h.n < 1) throw Error(Errc::index, "not a mode of the ordering");
  return h.n * h.n - 1 + (h.m == 0 ? 1 : 2 * h.m + (h.parity == Parity::sin ? 1 : 0));
}

HarmonicIndex ModeOrdering::decode(int j) {
  if (j < 1) throw Error(Errc::index, "mode index must be >= 1");
  int n = int(std::sqrt(double(j)));
  while (n * n > j) --n;
  while ((n + 1) * (n + 1) <= j) ++n;
  const int r = j - n * n + 1;
  if (r == 1) return {n, 0, Parity::cos};
  return {n, r / 2, r % 2 == 0 ? Parity::cos : Parity::sin};
}

//---------------------------------------------------------------------------//
// SpectralScalar
//---------------------------------------------------------------------------//

SpectralScalar::SpectralScalar(int truncation)
    : truncation_(truncation), coeffs_(coeff_count(truncation)) {
  if (truncation < 0) throw Error(Errc::invalid_truncation, "negative truncation");
}

SpectralScalar& SpectralScalar::operator+=(const SpectralScalar& o) {
  require_same_truncation(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}

SpectralScalar& SpectralScalar::operator-=(const SpectralScalar& o) {
  require_same_truncation(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}

SpectralScalar& SpectralScalar::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

double real_component(const SpectralScalar& s, const HarmonicIndex& h) {
  if (!h.valid() || h.n > s.truncation()) throw Error(Errc::index, "harmonic outside truncation");
  const complex_t a = s(h.n, h.m);
  if (h.m == 0) return a.real();
  return h.parity == Parity::cos ? sqrt2 * a.real() : -sqrt2 * a.imag();
}

void add_real_component(SpectralScalar& s, const HarmonicIndex& h, double c) {
  if (!h.valid() || h.n > s.truncation()) throw Error(Errc::index, "harmonic outside truncation");
  complex_t& a = s(h.n, h.m);
  if (h.m == 0) {
    a += c;
  } else if (h.parity == Parity::cos) {
    a += complex_t(c / sqrt2, 0.0);
  } else {
    a += complex_t(0.0, -c / sqrt2);
  }
}

namespace {

template <class Weight>
double weighted_inner(const SpectralScalar& a, const SpectralScalar& b, Weight weight) {
  require_same_truncation(a, b);
  const int N = a.truncation();
  double sum = 0.0;
  for (int n = 0; n <= N; ++n) {
    const double wn = weight(n);
    if (wn == 0.0) continue;
    for (int m = 0; m <= n; ++m) {
      const complex_t x = a(n, m);
      const complex_t y = b(n, m);
      sum += wn * order_weight(m) * (x.real() * y.real() + x.imag() * y.imag());
    }
  }
  return sum;
}

}  // namespace

double l2_inner(const SpectralScalar& a, const SpectralScalar& b) {
  return weighted_inner(a, b, [](int) { return 1.0; });
}

double h_inner(const SpectralScalar& a, const SpectralScalar& b) {
  return weighted_inner(a, b, [](int n) { return degree_eigenvalue(n); });
}

double spectral_norm(const SpectralScalar& psi, Norm order) {
  const int p = order == Norm::H ? 1 : order == Norm::V ? 2 : 3;
  return std::sqrt(weighted_inner(psi, psi, [p](int n) { return std::pow(degree_eigenvalue(n), p); }));
}

SpectralScalar apply_laplacian(const SpectralScalar& s) {
  SpectralScalar out(s.truncation());
  for (int m = 0; m <= s.truncation(); ++m) {
    for (int n = m; n <= s.truncation(); ++n) out(n, m) = -degree_eigenvalue(n) * s(n, m);
  }
  return out;
}

SpectralScalar invert_laplacian(const SpectralScalar& s) {
  if (s.truncation() < 0 || s.size() == 0) return s;
  if (std::abs(s(0, 0)) > 1e-12) {
    throw Error(Errc::non_mean_free, "degree-0 coefficient is " + std::to_string(std::abs(s(0, 0))));
  }
  SpectralScalar out(s.truncation());
  for (int m = 0; m <= s.truncation(); ++m) {
    for (int n = std::max(m, 1); n <= s.truncation(); ++n) out(n, m) = s(n, m) / -degree_eigenvalue(n);
  }
  return out;
}

SpectralScalar apply_dlambda(const SpectralScalar& s) {
  SpectralScalar out(s.truncation());
  for (int m = 1; m <= s.truncation(); ++m) {
    for (int n = m; n <= s.truncation(); ++n) out(n, m) = complex_t(0.0, m) * s(n, m);
  }
  return out;
}

SpectralScalar project_modes(const SpectralScalar& s, int cutoff, ModePart part) {
  const int N = s.truncation();
  if (cutoff < 0 || cutoff > mode_count(N)) {
    throw Error(Errc::index, "cutoff " + std::to_string(cutoff) + " outside [0, " +
                                 std::to_string(mode_count(N)) + "]");
  }
  SpectralScalar low(N);
  for (int n = 1; n <= N; ++n) {
    for (int m = 0; m <= n; ++m) {
      const complex_t a = s(n, m);
      const bool keep_cos = ModeOrdering::index_of({n, m, Parity::cos}) <= cutoff;
      const bool keep_sin = m > 0 && ModeOrdering::index_of({n, m, Parity::sin}) <= cutoff;
      low(n, m) = complex_t(keep_cos ? a.real() : 0.0, keep_sin ? a.imag() : 0.0);
    }
  }
  if (part == ModePart::low) return low;
  return s - low;
}

SpectralScalar mode_field(int j, int truncation) {
  require_truncation(truncation);
  if (j < 1 || j > mode_count(truncation)) {
    throw Error(Errc::index, "mode index " + std::to_string(j) + " outside [1, " +
                                 std::to_string(mode_count(truncation)) + "]");
  }
  const HarmonicIndex h = ModeOrdering::decode(j);
  SpectralScalar psi(truncation);
  add_real_component(psi, h, 1.0 / std::sqrt(h.eigenvalue()));
  return psi;
}

double mode_coordinate(const SpectralScalar& psi, int j) {
  if (j < 1 || j > mode_count(psi.truncation())) throw Error(Errc::index, "mode index " + std::to_string(j));
  const HarmonicIndex h = ModeOrdering::decode(j);
  return std::sqrt(h.eigenvalue()) * real_component(psi, h);
}

double nonzonal_energy_fraction(const SpectralScalar& psi) {
  double total = 0.0;
  double nonzonal = 0.0;
  for (int n = 1; n <= psi.truncation(); ++n) {
    for (int m = 0; m <= n; ++m) {
      const double e = degree_eigenvalue(n) * order_weight(m) * std::norm(psi(n, m));
      total += e;
      if (m != 0) nonzonal += e;
    }
  }
  return total > 0.0 ? nonzonal / total : 0.0;
}

bool is_zonal(const SpectralScalar& s, double tol) {
  for (int m = 1; m <= s.truncation(); ++m) {
    for (int n = m; n <= s.truncation(); ++n) {
      if (std::abs(s(n, m)) > tol) return false;
    }
  }
  return true;
}

//---------------------------------------------------------------------------//
// Grids
//---------------------------------------------------------------------------//

bool GaussGrid::dealiases(int truncation) const noexcept {
  return 2 * nlat >= 3 * truncation + 1 && nlon >= 3 * truncation + 1;
}

GaussGrid gauss_grid(int nlat, int nlon) {
  if (nlat < 1 || nlon < 1) throw Error(Errc::argument, "grid dimensions must be positive");
  GaussGrid g;
  g.nlat = nlat;
  g.nlon = nlon;
  g.mu.assign(std::size_t(nlat), 0.0);
  g.weights.assign(std::size_t(nlat), 0.0);
  const int half = (nlat + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(pi * (i + 0.75) / (nlat + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= nlat; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = nlat * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= nlat; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = nlat == 1 ? 1.0 : nlat * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    g.mu[std::size_t(i)] = x;
    g.mu[std::size_t(nlat - 1 - i)] = -x;
    g.weights[std::size_t(i)] = w;
    g.weights[std::size_t(nlat - 1 - i)] = w;
  }
  if (nlat % 2 == 1) g.mu[std::size_t(nlat / 2)] = 0.0;
  return g;
}

GaussGrid make_grid(int truncation, double oversample) {
  require_truncation(truncation);
  if (!(oversample >= 1.0)) throw Error(Errc::argument, "oversample must be >= 1");
  const int nlat = int(std::ceil(oversample * (3.0 * truncation + 1.0) / 2.0 - 1e-12));
  int nlon = int(std::ceil(oversample * (3.0 * truncation + 1.0) - 1e-12));
  while (!smooth_235(nlon)) ++nlon;
  return gauss_grid(nlat, nlon);
}

bool GridScalar::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

//---------------------------------------------------------------------------//
// SphericalTransform
//---------------------------------------------------------------------------//

SphericalTransform::SphericalTransform(int truncation, double oversample)
    : SphericalTransform(truncation, make_grid(truncation, oversample)) {}

SphericalTransform::SphericalTransform(int truncation, GaussGrid grid)
    : truncation_(truncation), grid_(std::move(grid)) {
  require_truncation(truncation);
  if (!grid_.dealiases(truncation)) {
    throw Error(Errc::dealiasing, "grid " + std::to_string(grid_.nlat) + "x" + std::to_string(grid_.nlon) +
                                      " does not dealias quadratic products at N=" + std::to_string(truncation));
  }
  const int N = truncation;
  half_ = (grid_.nlat + 1) / 2;
  nfreq_ = grid_.nlon / 2 + 1;

  const std::size_t K = SpectralScalar::coeff_count(N);
  legendre_.assign(std::size_t(half_) * K, 0.0);
  coslat_dmu_.assign(std::size_t(half_) * K, 0.0);

  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * pi);
  auto eps = [](int n, int m) {
    return std::sqrt((double(n) * n - double(m) * m) / (4.0 * double(n) * n - 1.0));
  };
  std::vector<double> q(std::size_t(N + 3));
  for (int i = 0; i < half_; ++i) {
    const double mu = grid_.mu[std::size_t(i)];
    const double coslat = std::sqrt((1.0 - mu) * (1.0 + mu));
    double qmm = 1.0 / sqrt2;  // orthonormal on [-1, 1]
    double* P = legendre_.data() + std::size_t(i) * K;
    double* H = coslat_dmu_.data() + std::size_t(i) * K;
    for (int m = 0; m <= N; ++m) {
      if (m > 0) qmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * coslat;
      // q[k] holds degree n = m + k for k = 0..N+1-m
      q[0] = qmm;
      q[1] = std::sqrt(2.0 * m + 3.0) * mu * qmm;
      for (int n = m + 2; n <= N + 1; ++n) {
        q[std::size_t(n - m)] = (mu * q[std::size_t(n - m - 1)] - eps(n - 1, m) * q[std::size_t(n - m - 2)]) / eps(n, m);
      }
      const std::size_t off = SpectralScalar::order_offset(N, m);
      for (int n = m; n <= N; ++n) {
        const double below = n > m ? (n + 1.0) * eps(n, m) * q[std::size_t(n - m - 1)] : 0.0;
        const double above = -double(n) * eps(n + 1, m) * q[std::size_t(n - m + 1)];
        P[off + std::size_t(n - m)] = q[std::size_t(n - m)] * inv_sqrt_2pi;
        H[off + std::size_t(n - m)] = (above + below) * inv_sqrt_2pi;
      }
    }
  }

  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  int n = grid_.nlon;
  double* real_buf = fftw_alloc_real(grid_.size());
  fftw_complex* cplx_buf = fftw_alloc_complex(std::size_t(grid_.nlat) * std::size_t(nfreq_));
  r2c_ = fftw_plan_many_dft_r2c(1, &n, grid_.nlat, real_buf, nullptr, 1, grid_.nlon, cplx_buf, nullptr, 1,
                                nfreq_, FFTW_ESTIMATE | FFTW_UNALIGNED);
  c2r_ = fftw_plan_many_dft_c2r(1, &n, grid_.nlat, cplx_buf, nullptr, 1, nfreq_, real_buf, nullptr, 1,
                                grid_.nlon, FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  fftw_free(real_buf);
  fftw_free(cplx_buf);
  if (!r2c_ || !c2r_) throw Error(Errc::argument, "FFTW planning failed");
}

SphericalTransform::~SphericalTransform() {
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  if (r2c_) fftw_destroy_plan(static_cast<fftw_plan>(r2c_));
  if (c2r_) fftw_destroy_plan(static_cast<fftw_plan>(c2r_));
}

void SphericalTransform::check_spectral(const SpectralScalar& s) const {
  if (s.truncation() != truncation_) {
    throw Error(Errc::dimension, "field truncation " + std::to_string(s.truncation()) +
                                     " does not match transform truncation " + std::to_string(truncation_));
  }
}

void SphericalTransform::check_grid(const GridScalar& g) const {
  if (g.nlat() != grid_.nlat || g.nlon() != grid_.nlon) {
    throw Error(Errc::dimension, "grid field is " + std::to_string(g.nlat()) + "x" + std::to_string(g.nlon()) +
                                     ", transform grid is " + std::to_string(grid_.nlat) + "x" +
                                     std::to_string(grid_.nlon));
  }
}

GridScalar SphericalTransform::synthesize_kind(const SpectralScalar& s, Kind kind) const {
  check_spectral(s);
  const int N = truncation_;
  const int nlat = grid_.nlat;
  const std::size_t K = SpectralScalar::coeff_count(N);
  std::vector<complex_t> fourier(std::size_t(nlat) * std::size_t(nfreq_), complex_t{});
  const std::vector<double>& table = kind == Kind::coslat_dphi ? coslat_dmu_ : legendre_;
  const complex_t* a = s.coeffs().data();

  for (int i = 0; i < half_; ++i) {
    const int mirror = nlat - 1 - i;
    const double* T = table.data() + std::size_t(i) * K;
    complex_t* north = fourier.data() + std::size_t(i) * nfreq_;
    complex_t* south = fourier.data() + std::size_t(mirror) * nfreq_;
    for (int m = 0; m <= N; ++m) {
      const std::size_t off = SpectralScalar::order_offset(N, m);
      double er = 0.0, ei = 0.0, orr = 0.0, oi = 0.0;
      const int count = N - m + 1;
      int k = 0;
      for (; k + 1 < count; k += 2) {
        er += a[off + k].real() * T[off + k];
        ei += a[off + k].imag() * T[off + k];
        orr += a[off + k + 1].real() * T[off + k + 1];
        oi += a[off + k + 1].imag() * T[off + k + 1];
      }
      if (k < count) {
        er += a[off + k].real() * T[off + k];
        ei += a[off + k].imag() * T[off + k];
      }
      complex_t even(er, ei);
      complex_t odd(orr, oi);
      if (kind == Kind::dlambda) {
        even *= complex_t(0.0, m);
        odd *= complex_t(0.0, m);
      }
      north[m] = even + odd;
      if (mirror != i) south[m] = kind == Kind::coslat_dphi ? odd - even : even - odd;
    }
    north[0].imag(0.0);
    south[0].imag(0.0);
  }

  GridScalar out(grid_);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(c2r_), reinterpret_cast<fftw_complex*>(fourier.data()),
                       out.values().data());
  return out;
}

GridScalar SphericalTransform::synthesize(const SpectralScalar& s) const {
  return synthesize_kind(s, Kind::value);
}

GridScalar SphericalTransform::synthesize_dlambda(const SpectralScalar& s) const {
  return synthesize_kind(s, Kind::dlambda);
}

GridScalar SphericalTransform::synthesize_coslat_dphi(const SpectralScalar& s) const {
  return synthesize_kind(s, Kind::coslat_dphi);
}

SpectralScalar SphericalTransform::analyze(const GridScalar& g) const {
  check_grid(g);
  const int N = truncation_;
  const int nlat = grid_.nlat;
  const std::size_t K = SpectralScalar::coeff_count(N);
  std::vector<complex_t> fourier(std::size_t(nlat) * std::size_t(nfreq_));
  // FFTW r2c leaves its input intact.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(r2c_), const_cast<double*>(g.values().data()),
                       reinterpret_cast<fftw_complex*>(fourier.data()));

  SpectralScalar s(N);
  complex_t* a = s.coeffs().data();
  const double dlon = 2.0 * pi / grid_.nlon;
  for (int i = 0; i < half_; ++i) {
    const int mirror = nlat - 1 - i;
    const double w = grid_.weights[std::size_t(i)] * dlon;
    const double* P = legendre_.data() + std::size_t(i) * K;
    const complex_t* north = fourier.data() + std::size_t(i) * nfreq_;
    const complex_t* south = fourier.data() + std::size_t(mirror) * nfreq_;
    for (int m = 0; m <= N; ++m) {
      const complex_t sum = mirror != i ? (north[m] + south[m]) * w : north[m] * w;
      const complex_t diff = mirror != i ? (north[m] - south[m]) * w : north[m] * w;
      const std::size_t off = SpectralScalar::order_offset(N, m);
      const int count = N - m + 1;
      for (int k = 0; k < count; ++k) {
        a[off + k] += P[off + k] * ((k % 2 == 0) ? sum : diff);
      }
    }
  }
  for (int n = 0; n <= N; ++n) s(n, 0).imag(0.0);
  return s;
}

GridScalar SphericalTransform::jacobian_grid(const SpectralScalar& a, const SpectralScalar& b) const {
  check_spectral(a);
  check_spectral(b);
  const GridScalar a_lam = synthesize_dlambda(a);
  const GridScalar a_phi = synthesize_coslat_dphi(a);
  const GridScalar b_lam = synthesize_dlambda(b);
  const GridScalar b_phi = synthesize_coslat_dphi(b);
  GridScalar j(grid_);
  for (int i = 0; i < grid_.nlat; ++i) {
    const double mu = grid_.mu[std::size_t(i)];
    const double inv_cos2 = 1.0 / ((1.0 - mu) * (1.0 + mu));
    for (int k = 0; k < grid_.nlon; ++k) {
      j(i, k) = (a_lam(i, k) * b_phi(i, k) - b_lam(i, k) * a_phi(i, k)) * inv_cos2;
    }
  }
  return j;
}

SpectralScalar SphericalTransform::jacobian(const SpectralScalar& a, const SpectralScalar& b) const {
  return analyze(jacobian_grid(a, b));
}

GridVector SphericalTransform::velocity(const SpectralScalar& psi) const {
  GridScalar east = synthesize_coslat_dphi(psi);
  GridScalar north = synthesize_dlambda(psi);
  for (int i = 0; i < grid_.nlat; ++i) {
    const double mu = grid_.mu[std::size_t(i)];
    const double inv_cos = 1.0 / std::sqrt((1.0 - mu) * (1.0 + mu));
    for (int k = 0; k < grid_.nlon; ++k) {
      east(i, k) *= -inv_cos;
      north(i, k) *= inv_cos;
    }
  }
  return {std::move(east), std::move(north)};
}

double SphericalTransform::integrate(const GridScalar& g) const {
  check_grid(g);
  double total = 0.0;
  for (int i = 0; i < grid_.nlat; ++i) {
    double row = 0.0;
    for (int k = 0; k < grid_.nlon; ++k) row += g(i, k);
    total += grid_.weights[std::size_t(i)] * row;
  }
  return total * 2.0 * pi / grid_.nlon;
}

}  // namespace spherekick
