#pragma once

// Channel decomposition, water-filling and rate evaluation for MiLAC-aided
// and fully digital point-to-point MIMO links.
//
// Both links carry the Thevenin factor of 1/2 at each matched port pair, so
// every rate expression here contains P_T / (4 sigma^2) rather than P_T / sigma^2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "milac/channel_model.hpp"
#include "milac/core.hpp"
#include "milac/microwave_network.hpp"

namespace milac {

struct SystemConfig {
  std::size_t n_streams = 1;
  std::size_t n_tx = 1;
  std::size_t n_rx = 1;
  double tx_power = 1.0;             ///< P_T, watts
  double noise_power = 1.0;          ///< sigma^2, watts
  double ref_admittance = 1.0 / 50;  ///< Y0 = 1/Z0, siemens

  void validate() const {
    if (n_streams == 0 || n_tx == 0 || n_rx == 0) {
      throw error(errc::invalid_argument, "stream and antenna counts must be positive");
    }
    if (n_streams > std::min(n_tx, n_rx)) {
      throw error(errc::invalid_argument, "n_streams must not exceed min(n_tx, n_rx)");
    }
    if (!(tx_power > 0.0) || !std::isfinite(tx_power)) {
      throw error(errc::invalid_argument, "tx_power must be positive");
    }
    if (!(noise_power > 0.0) || !std::isfinite(noise_power)) {
      throw error(errc::invalid_argument, "noise_power must be positive");
    }
    if (!(ref_admittance > 0.0) || !std::isfinite(ref_admittance)) {
      throw error(errc::invalid_argument, "ref_admittance must be positive");
    }
  }

  double snr_linear() const noexcept { return tx_power / noise_power; }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Full SVD H = U diag(sigma) V^H with sigma descending.
struct SvdFactors {
  ComplexMatrix u;   ///< N_R x N_R
  RealVector sigma;  ///< min(N_T, N_R), descending
  ComplexMatrix v;   ///< N_T x N_T

  Eigen::Index rank_bound() const noexcept { return sigma.size(); }

  ComplexMatrix v_bar(std::size_t n_s) const { return v.leftCols(static_cast<Eigen::Index>(n_s)); }
  ComplexMatrix v_tilde(std::size_t n_s) const {
    return v.rightCols(v.cols() - static_cast<Eigen::Index>(n_s));
  }
  ComplexMatrix u_bar(std::size_t n_s) const { return u.leftCols(static_cast<Eigen::Index>(n_s)); }
  ComplexMatrix u_tilde(std::size_t n_s) const {
    return u.rightCols(u.cols() - static_cast<Eigen::Index>(n_s));
  }

  /// lambda_s = sigma_s^2 for the strongest n_s modes.
  RealVector eigenvalues(std::size_t n_s) const {
    return sigma.head(static_cast<Eigen::Index>(n_s)).array().square();
  }

  ComplexMatrix reconstruct() const {
    const auto k = sigma.size();
    return u.leftCols(k) * sigma.cast<complex>().asDiagonal() * v.leftCols(k).adjoint();
  }
};

namespace detail {

/// Index of the first largest-modulus entry of a column.
inline Eigen::Index argmax_abs(const Eigen::Ref<const Eigen::VectorXcd>& col) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    const double a = std::abs(col(i));
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  return best;
}

inline complex unit_phase_of(complex z) {
  const double a = std::abs(z);
  return a > 0.0 ? z / a : complex(1.0, 0.0);
}

inline bool imag_part_invertible(const ComplexMatrix& m, double rel_threshold) {
  const RealMatrix im = m.imag();
  const Eigen::BDCSVD<RealMatrix> svd(im);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) {
    return false;
  }
  return sv(sv.size() - 1) >= rel_threshold * sv(0);
}

}  // namespace detail

/// Full SVD with descending singular values. Each singular pair is rotated so
/// the largest-modulus entry of its V column is real and positive; trailing
/// null-space columns of U and V are normalized the same way on their own.
inline SvdFactors svd_ordered(const ComplexMatrix& h) {
  if (h.size() == 0) {
    throw error(errc::dimension_mismatch, "channel matrix is empty");
  }
  if (!h.allFinite()) {
    throw error(errc::non_finite_input, "channel matrix has non-finite entries");
  }
  const Eigen::BDCSVD<ComplexMatrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV()};

  const Eigen::Index k = f.sigma.size();
  for (Eigen::Index s = 0; s < f.v.cols(); ++s) {
    const Eigen::Index i = detail::argmax_abs(f.v.col(s));
    const double mag = std::abs(f.v(i, s));
    const complex ph = std::conj(detail::unit_phase_of(f.v(i, s)));
    f.v.col(s) *= ph;
    f.v(i, s) = mag;  // exactly real, not just up to rounding
    if (s < k) {
      f.u.col(s) *= ph;
    }
  }
  for (Eigen::Index s = k; s < f.u.cols(); ++s) {
    const Eigen::Index i = detail::argmax_abs(f.u.col(s));
    const double mag = std::abs(f.u(i, s));
    f.u.col(s) *= std::conj(detail::unit_phase_of(f.u(i, s)));
    f.u(i, s) = mag;
  }
  return f;
}

struct PhaseRotated {
  SvdFactors factors;
  std::size_t attempts = 0;  ///< random draws consumed; 0 means returned unchanged
};

/// Applies unit-modulus column rotations until Im{U} and Im{V} are both
/// invertible. The first min(N_T, N_R) columns of U and V share their phase so
/// U diag(sigma) V^H is preserved; trailing columns rotate independently.
/// Phases come from a counter-based stream keyed on `seed`.
inline PhaseRotated ensure_invertible_imag(const SvdFactors& factors, std::size_t n_s,
                                           std::uint64_t seed, const NetworkTolerances& tol = {},
                                           std::size_t max_attempts = 64) {
  const Eigen::Index k = factors.sigma.size();
  if (n_s == 0 || static_cast<Eigen::Index>(n_s) > k) {
    throw error(errc::invalid_argument, "n_s must lie in [1, min(N_T, N_R)]");
  }
  const double thr = tol.imag_invertibility;
  if (detail::imag_part_invertible(factors.v, thr) && detail::imag_part_invertible(factors.u, thr)) {
    return {factors, 0};
  }
  constexpr std::uint64_t phase_domain = 0x70686173ULL;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    CounterRng rng(derive_stream_key(seed, attempt, phase_domain));
    SvdFactors out = factors;
    auto draw = [&rng] { return std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform()); };
    for (Eigen::Index s = 0; s < k; ++s) {
      const complex ph = draw();
      out.v.col(s) *= ph;
      out.u.col(s) *= ph;
    }
    for (Eigen::Index s = k; s < out.v.cols(); ++s) {
      out.v.col(s) *= draw();
    }
    for (Eigen::Index s = k; s < out.u.cols(); ++s) {
      out.u.col(s) *= draw();
    }
    if (detail::imag_part_invertible(out.v, thr) && detail::imag_part_invertible(out.u, thr)) {
      return {std::move(out), attempt};
    }
  }
  throw error(errc::phase_search_exhausted,
              "no phase rotation with invertible imaginary parts after " +
                  std::to_string(max_attempts) + " attempts");
}

struct PowerAllocation {
  RealVector p;              ///< per-stream fractions, sum 1
  double water_level = 0.0;  ///< mu
};

/// Water-filling p_s = max{0, mu - factor sigma^2 / (P_T lambda_s)} with sum p_s = 1.
///
/// Exact active-set search: thresholds are sorted ascending and the water
/// level is taken from the first prefix whose level does not reach the next
/// threshold. Streams with lambda_s = 0 never activate.
inline PowerAllocation water_filling(const RealVector& eigenvalues, double tx_power,
                                     double noise_power, double quarter_factor = 4.0) {
  const auto n = eigenvalues.size();
  if (n == 0) {
    throw error(errc::invalid_argument, "no eigenvalues given");
  }
  if (!(tx_power > 0.0) || !(noise_power > 0.0) || !(quarter_factor > 0.0)) {
    throw error(errc::invalid_argument, "powers and factor must be positive");
  }
  if (!eigenvalues.allFinite() || (eigenvalues.array() < 0.0).any()) {
    throw error(errc::invalid_argument, "eigenvalues must be finite and nonnegative");
  }
  if (!(eigenvalues.array() > 0.0).any()) {
    throw error(errc::all_zero_eigenvalues, "every eigenvalue is zero");
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> thr(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    const double lam = eigenvalues(s);
    thr[static_cast<std::size_t>(s)] = lam > 0.0 ? quarter_factor * noise_power / (tx_power * lam) : inf;
  }
  std::vector<std::size_t> order(thr.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return thr[a] < thr[b]; });

  double cum = 0.0;
  double mu = 0.0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    cum += thr[order[k - 1]];
    mu = (1.0 + cum) / static_cast<double>(k);
    if (k == order.size() || thr[order[k]] >= mu) {
      break;
    }
  }

  PowerAllocation out{RealVector::Zero(n), mu};
  for (Eigen::Index s = 0; s < n; ++s) {
    out.p(s) = std::max(0.0, mu - thr[static_cast<std::size_t>(s)]);
  }
  return out;
}

/// C = sum_s log2(1 + P_T p_s lambda_s / (4 sigma^2)).
inline double capacity_closed_form(const RealVector& eigenvalues, const PowerAllocation& alloc,
                                   double tx_power, double noise_power) {
  if (eigenvalues.size() != alloc.p.size()) {
    throw error(errc::dimension_mismatch, "allocation and eigenvalue lengths differ");
  }
  const double c = tx_power / (4.0 * noise_power);
  double total = 0.0;
  for (Eigen::Index s = 0; s < eigenvalues.size(); ++s) {
    total += std::log1p(c * alloc.p(s) * eigenvalues(s));
  }
  return total / std::numbers::ln2;
}

struct MilacRate {
  double rate = 0.0;             ///< bits/s/Hz, SINR form with explicit combiner norms
  double normalized_rate = 0.0;  ///< same rate with unit-norm combiner rows
  RealVector per_stream_sinr;
};

/// Per-stream SINR rate of z = sqrt(P_T) G H F P^1/2 s + G n, interference
/// treated as noise. Both the raw and the row-normalized forms are returned;
/// they agree up to rounding.
inline MilacRate milac_rate(const ComplexMatrix& g, const ComplexMatrix& h, const ComplexMatrix& f,
                            const PowerAllocation& alloc, double tx_power, double noise_power) {
  const auto ns = g.rows();
  if (g.cols() != h.rows() || h.cols() != f.rows() || f.cols() != ns || alloc.p.size() != ns) {
    throw error(errc::dimension_mismatch, "G, H, F and allocation shapes do not conform");
  }
  const ComplexMatrix eff = g * h * f;
  const RealVector row_norm2 = g.rowwise().squaredNorm();
  constexpr double tiny = 1e-300;

  MilacRate out;
  out.per_stream_sinr.resize(ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    if (!(row_norm2(s) > 0.0)) {
      throw error(errc::zero_combiner_row, "row " + std::to_string(s) + " of G is zero");
    }
    double interference = 0.0;
    for (Eigen::Index t = 0; t < ns; ++t) {
      if (t != s) {
        interference += alloc.p(t) * std::norm(eff(s, t));
      }
    }
    interference *= tx_power;
    if (interference < tiny) {
      interference = 0.0;
    }
    const double signal = tx_power * alloc.p(s) * std::norm(eff(s, s));
    const double sinr = signal / (interference + row_norm2(s) * noise_power);
    const double sinr_normalized =
        (signal / row_norm2(s)) / (interference / row_norm2(s) + noise_power);
    out.per_stream_sinr(s) = sinr;
    out.rate += std::log1p(sinr);
    out.normalized_rate += std::log1p(sinr_normalized);
  }
  out.rate /= std::numbers::ln2;
  out.normalized_rate /= std::numbers::ln2;
  return out;
}

struct MilacDesign {
  SusceptanceMatrix b_f;  ///< (N_S + N_T) ports, symbols first
  SusceptanceMatrix b_g;  ///< (N_R + N_S) ports, antennas first
  PowerAllocation allocation;
  SvdFactors factors;  ///< phase-rotated factors the design was built from
};

inline void require_channel_shape(const ComplexMatrix& h, const SystemConfig& cfg) {
  if (h.rows() != static_cast<Eigen::Index>(cfg.n_rx) ||
      h.cols() != static_cast<Eigen::Index>(cfg.n_tx)) {
    throw error(errc::dimension_mismatch, "channel is " + std::to_string(h.rows()) + "x" +
                                              std::to_string(h.cols()) + ", config expects " +
                                              std::to_string(cfg.n_rx) + "x" +
                                              std::to_string(cfg.n_tx));
  }
}

/// Closed-form lossless reciprocal transmitter/receiver networks and
/// water-filling allocation for channel h.
inline MilacDesign design_milac(const ComplexMatrix& h, const SystemConfig& cfg,
                                std::uint64_t rng_seed, const NetworkTolerances& tol = {}) {
  cfg.validate();
  require_channel_shape(h, cfg);
  PhaseRotated rotated = ensure_invertible_imag(svd_ordered(h), cfg.n_streams, rng_seed, tol);
  SvdFactors& f = rotated.factors;
  PowerAllocation alloc =
      water_filling(f.eigenvalues(cfg.n_streams), cfg.tx_power, cfg.noise_power);
  SusceptanceMatrix b_f = susceptance_tx(f.v, cfg.n_streams, cfg.ref_admittance, tol);
  SusceptanceMatrix b_g = susceptance_rx(f.u, cfg.n_streams, cfg.ref_admittance, tol);
  return {std::move(b_f), std::move(b_g), std::move(alloc), std::move(f)};
}

inline PortPartition tx_partition(const SystemConfig& cfg) { return {cfg.n_streams, cfg.n_tx}; }
inline PortPartition rx_partition(const SystemConfig& cfg) { return {cfg.n_rx, cfg.n_streams}; }

/// F realized by the transmitter network, from its admittance.
inline ComplexMatrix precoder_of(const MilacDesign& d, const SystemConfig& cfg,
                                 const NetworkTolerances& tol = {}) {
  return transfer_block_from_admittance(d.b_f.admittance(), tx_partition(cfg), cfg.ref_admittance,
                                        tol);
}

/// G realized by the receiver network, from its admittance.
inline ComplexMatrix combiner_of(const MilacDesign& d, const SystemConfig& cfg,
                                 const NetworkTolerances& tol = {}) {
  return transfer_block_from_admittance(d.b_g.admittance(), rx_partition(cfg), cfg.ref_admittance,
                                        tol);
}

struct DigitalDesign {
  ComplexMatrix w;  ///< N_T x N_S, ||W||_F = 1
  double rate = 0.0;
  PowerAllocation allocation;
};

/// log2 det(I + c A A^H) through the Cholesky factor of the smaller Gram
/// matrix I + c A^H A.
inline double log2det_identity_plus_gram(const ComplexMatrix& a, double c) {
  const auto n = a.cols();
  ComplexMatrix gram = ComplexMatrix::Identity(n, n);
  gram.noalias() += c * (a.adjoint() * a);
  const Eigen::LLT<ComplexMatrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw error(errc::singular_matrix, "I + c A^H A is not positive definite");
  }
  const auto diag = llt.matrixLLT().diagonal();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += std::log(diag(i).real());
  }
  return 2.0 * acc / std::numbers::ln2;
}

/// Digital baseline: W = V_bar P^1/2 with water-filling P, rate
/// log2 det(I + P_T/(4 sigma^2) H W W^H H^H). Reuses an existing
/// decomposition of h and its allocation.
inline DigitalDesign digital_design_from(const ComplexMatrix& h, const SvdFactors& f,
                                         const PowerAllocation& alloc, const SystemConfig& cfg) {
  ComplexMatrix w = f.v_bar(cfg.n_streams) * alloc.p.cwiseSqrt().cast<complex>().asDiagonal();
  const double rate =
      log2det_identity_plus_gram(h * w, cfg.tx_power / (4.0 * cfg.noise_power));
  return {std::move(w), rate, alloc};
}

inline DigitalDesign digital_design_and_rate(const ComplexMatrix& h, const SystemConfig& cfg) {
  cfg.validate();
  require_channel_shape(h, cfg);
  const SvdFactors f = svd_ordered(h);
  const PowerAllocation alloc =
      water_filling(f.eigenvalues(cfg.n_streams), cfg.tx_power, cfg.noise_power);
  return digital_design_from(h, f, alloc, cfg);
}

struct RateReport {
  double milac_rate = 0.0;
  double digital_rate = 0.0;
  double capacity_c = 0.0;
  PowerAllocation allocation;
  RealVector per_stream_sinr;

  double milac_gap() const { return std::abs(milac_rate - capacity_c) / capacity_c; }
  double digital_gap() const { return std::abs(digital_rate - capacity_c) / capacity_c; }
};

/// Designs both links for h and evaluates them. The MiLAC rate is computed
/// from F and G recovered through the network admittances.
inline RateReport evaluate_link(const ComplexMatrix& h, const SystemConfig& cfg,
                                std::uint64_t rng_seed, const NetworkTolerances& tol = {}) {
  const MilacDesign d = design_milac(h, cfg, rng_seed, tol);
  const ComplexMatrix f = precoder_of(d, cfg, tol);
  const ComplexMatrix g = combiner_of(d, cfg, tol);
  const MilacRate mr = milac_rate(g, h, f, d.allocation, cfg.tx_power, cfg.noise_power);
  const DigitalDesign dd = digital_design_from(h, d.factors, d.allocation, cfg);

  RateReport r;
  r.milac_rate = mr.rate;
  r.digital_rate = dd.rate;
  r.capacity_c = capacity_closed_form(d.factors.eigenvalues(cfg.n_streams), d.allocation,
                                      cfg.tx_power, cfg.noise_power);
  r.allocation = d.allocation;
  r.per_stream_sinr = mr.per_stream_sinr;
  return r;
}

}  // namespace milac
