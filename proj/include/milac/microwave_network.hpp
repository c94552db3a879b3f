#pragma once

// Multiport microwave network algebra: admittance/scattering conversion,
// transfer-block extraction, symmetric unitary completion and closed-form
// susceptance synthesis for lossless reciprocal networks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "milac/core.hpp"

namespace milac {

struct NetworkTolerances {
  /// A square solve is rejected when its estimated condition number exceeds this.
  double max_condition = 1e12;
  /// Relative floor on sigma_min of an imaginary part before it counts as singular.
  double imag_invertibility = 1e-8;
  /// Max-entry residual allowed for inputs that must be unitary.
  double unitary_input = 1e-8;
  /// Default pass threshold of check_lossless_reciprocal.
  double lossless = 1e-10;
};

class AdmittanceMatrix {
 public:
  explicit AdmittanceMatrix(ComplexMatrix y) : y_(std::move(y)) {
    if (y_.rows() != y_.cols() || y_.rows() == 0) {
      throw error(errc::dimension_mismatch, "admittance matrix must be square and non-empty");
    }
  }

  const ComplexMatrix& y() const noexcept { return y_; }
  std::size_t n_ports() const noexcept { return static_cast<std::size_t>(y_.rows()); }

 private:
  ComplexMatrix y_;
};

/// Real symmetric B of a lossless reciprocal network, Y = jB.
///
/// Symmetry is structural: the constructor keeps the upper triangle and
/// mirrors it, so b() == b().transpose() holds bit-exactly. A lower triangle
/// that disagrees with the upper one by more than `symmetry_tol` (relative to
/// the largest entry) is rejected.
class SusceptanceMatrix {
 public:
  explicit SusceptanceMatrix(const RealMatrix& b, double symmetry_tol = 1e-9) {
    if (b.rows() != b.cols() || b.rows() == 0) {
      throw error(errc::dimension_mismatch, "susceptance matrix must be square and non-empty");
    }
    if (!b.allFinite()) {
      throw error(errc::non_finite_input, "susceptance matrix has non-finite entries");
    }
    const double scale = std::max(max_abs(b), 1.0e-300);
    if (max_abs(b - b.transpose()) > symmetry_tol * scale) {
      throw error(errc::invalid_argument, "susceptance matrix is not symmetric");
    }
    b_ = b.triangularView<Eigen::Upper>();
    b_.triangularView<Eigen::StrictlyLower>() = b_.transpose();
  }

  const RealMatrix& b() const noexcept { return b_; }
  std::size_t n_ports() const noexcept { return static_cast<std::size_t>(b_.rows()); }

  AdmittanceMatrix admittance() const { return AdmittanceMatrix(j * b_.cast<complex>()); }

 private:
  RealMatrix b_;
};

class ScatteringMatrix {
 public:
  explicit ScatteringMatrix(ComplexMatrix theta) : theta_(std::move(theta)) {
    if (theta_.rows() != theta_.cols() || theta_.rows() == 0) {
      throw error(errc::dimension_mismatch, "scattering matrix must be square and non-empty");
    }
  }

  const ComplexMatrix& theta() const noexcept { return theta_; }
  std::size_t n_ports() const noexcept { return static_cast<std::size_t>(theta_.rows()); }

 private:
  ComplexMatrix theta_;
};

/// Input ports occupy indices [0, n_inputs), output ports the following
/// n_outputs indices. Transmitter: symbols in, antennas out. Receiver:
/// antennas in, symbols out.
struct PortPartition {
  std::size_t n_inputs = 0;
  std::size_t n_outputs = 0;

  std::size_t n_ports() const noexcept { return n_inputs + n_outputs; }
};

struct LosslessReport {
  double unitarity = 0.0;  ///< max |Theta^H Theta - I|
  double asymmetry = 0.0;  ///< max |Theta - Theta^T|
  double tol = 0.0;

  bool passed() const noexcept { return unitarity <= tol && asymmetry <= tol; }
};

namespace detail {

inline void require_positive(double y0, const char* what) {
  if (!(y0 > 0.0) || !std::isfinite(y0)) {
    throw error(errc::invalid_argument, std::string(what) + " must be positive and finite");
  }
}

/// Solves a * x = rhs by partial-pivot LU; the reciprocal condition estimate
/// doubles as the singularity test.
template <typename MatA, typename MatB>
auto checked_solve(const MatA& a, const MatB& rhs, double max_condition, const char* what) {
  using Plain = typename MatA::PlainObject;
  Eigen::PartialPivLU<Plain> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond * max_condition >= 1.0)) {
    throw error(errc::singular_matrix,
                std::string(what) + " is numerically singular (rcond=" + std::to_string(rcond) + ")");
  }
  typename MatB::PlainObject x = lu.solve(rhs);
  if (!x.allFinite()) {
    throw error(errc::singular_matrix, std::string(what) + " produced a non-finite solve");
  }
  return x;
}

inline void require_partition(const PortPartition& part, std::size_t n_ports) {
  if (part.n_inputs == 0 || part.n_outputs == 0 || part.n_ports() != n_ports) {
    throw error(errc::dimension_mismatch,
                "port partition " + std::to_string(part.n_inputs) + "+" +
                    std::to_string(part.n_outputs) + " does not cover " +
                    std::to_string(n_ports) + " ports");
  }
}

/// Columns of [a, b] orthonormal to within tol (max entry of the Gram residual).
inline double unitarity_residual(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix full(a.rows(), a.cols() + b.cols());
  full << a, b;
  const auto n = full.cols();
  return max_abs(full.adjoint() * full - ComplexMatrix::Identity(n, n));
}

/// Keeps the upper triangle and writes its transpose below the diagonal.
template <typename Mat>
void mirror_upper(Mat& m) {
  m.template triangularView<Eigen::StrictlyLower>() = m.transpose();
}

/// Rejects an imaginary part whose smallest singular value is below
/// `rel_threshold` times its largest.
inline void require_invertible_imag(const RealMatrix& imag, double rel_threshold, const char* what) {
  const Eigen::BDCSVD<RealMatrix> svd(imag);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  if (!(smax > 0.0) || smin < rel_threshold * smax) {
    throw error(errc::singular_imaginary_part,
                std::string("imaginary part of ") + what + " is not invertible (sigma_min=" +
                    std::to_string(smin) + ", sigma_max=" + std::to_string(smax) +
                    "); phase-rotate the singular vectors first");
  }
}

/// Transmitter susceptance blocks before structural symmetrization.
inline RealMatrix susceptance_tx_unsymmetrized(const ComplexMatrix& v, std::size_t n_s, double y0,
                                               const NetworkTolerances& tol) {
  require_positive(y0, "reference admittance");
  if (v.rows() != v.cols() || v.rows() == 0) {
    throw error(errc::dimension_mismatch, "V must be square");
  }
  const auto nt = static_cast<Eigen::Index>(v.rows());
  const auto ns = static_cast<Eigen::Index>(n_s);
  if (ns < 1 || ns > nt) {
    throw error(errc::dimension_mismatch, "n_s must lie in [1, N_T]");
  }
  const RealMatrix re = v.real();
  const RealMatrix im = v.imag();
  require_invertible_imag(im, tol.imag_invertibility, "V");
  const RealMatrix inv_im =
      checked_solve(im, RealMatrix::Identity(nt, nt), tol.max_condition, "Im{V}");

  RealMatrix b(ns + nt, ns + nt);
  b.topLeftCorner(ns, ns) = inv_im.topRows(ns) * re.leftCols(ns);
  b.topRightCorner(ns, nt) = -inv_im.topRows(ns);
  b.bottomLeftCorner(nt, ns) = -inv_im.topRows(ns).transpose();
  b.bottomRightCorner(nt, nt) = re * inv_im;
  return y0 * b;
}

/// Receiver susceptance blocks before structural symmetrization.
inline RealMatrix susceptance_rx_unsymmetrized(const ComplexMatrix& u, std::size_t n_s, double y0,
                                               const NetworkTolerances& tol) {
  require_positive(y0, "reference admittance");
  if (u.rows() != u.cols() || u.rows() == 0) {
    throw error(errc::dimension_mismatch, "U must be square");
  }
  const auto nr = static_cast<Eigen::Index>(u.rows());
  const auto ns = static_cast<Eigen::Index>(n_s);
  if (ns < 1 || ns > nr) {
    throw error(errc::dimension_mismatch, "n_s must lie in [1, N_R]");
  }
  const RealMatrix re = u.real();
  const RealMatrix im = u.imag();
  require_invertible_imag(im, tol.imag_invertibility, "U");
  const RealMatrix inv_im =
      checked_solve(im, RealMatrix::Identity(nr, nr), tol.max_condition, "Im{U}");

  RealMatrix b(nr + ns, nr + ns);
  b.topLeftCorner(nr, nr) = -re * inv_im;
  b.topRightCorner(nr, ns) = inv_im.topRows(ns).transpose();
  b.bottomLeftCorner(ns, nr) = inv_im.topRows(ns);
  b.bottomRightCorner(ns, ns) = -inv_im.topRows(ns) * re.leftCols(ns);
  return y0 * b;
}

}  // namespace detail

/// Theta = (y0 I + Y)^-1 (y0 I - Y).
inline ScatteringMatrix admittance_to_scattering(const AdmittanceMatrix& y, double y0,
                                                 const NetworkTolerances& tol = {}) {
  detail::require_positive(y0, "reference admittance");
  const auto n = static_cast<Eigen::Index>(y.n_ports());
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  ComplexMatrix lhs = y0 * id + y.y();
  ComplexMatrix rhs = y0 * id - y.y();
  return ScatteringMatrix(detail::checked_solve(lhs, rhs, tol.max_condition, "y0*I + Y"));
}

/// Y = y0 (2 (Theta + I)^-1 - I).
inline AdmittanceMatrix scattering_to_admittance(const ScatteringMatrix& theta, double y0,
                                                 const NetworkTolerances& tol = {}) {
  detail::require_positive(y0, "reference admittance");
  const auto n = static_cast<Eigen::Index>(theta.n_ports());
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  ComplexMatrix lhs = theta.theta() + id;
  const ComplexMatrix inv = detail::checked_solve(lhs, id, tol.max_condition, "Theta + I");
  return AdmittanceMatrix(y0 * (2.0 * inv - id));
}

/// Output-rows x input-columns block of (Y/y0 + I)^-1. Only the input columns
/// of the inverse are solved for.
inline ComplexMatrix transfer_block_from_admittance(const AdmittanceMatrix& y,
                                                    const PortPartition& part, double y0,
                                                    const NetworkTolerances& tol = {}) {
  detail::require_positive(y0, "reference admittance");
  detail::require_partition(part, y.n_ports());
  const auto n = static_cast<Eigen::Index>(y.n_ports());
  const auto n_in = static_cast<Eigen::Index>(part.n_inputs);
  const auto n_out = static_cast<Eigen::Index>(part.n_outputs);
  ComplexMatrix lhs = y.y() / y0 + ComplexMatrix::Identity(n, n);
  ComplexMatrix rhs = ComplexMatrix::Identity(n, n_in);
  const ComplexMatrix cols = detail::checked_solve(lhs, rhs, tol.max_condition, "Y/y0 + I");
  return cols.bottomRows(n_out);
}

/// Half of the output-rows x input-columns block of Theta.
inline ComplexMatrix transfer_block_from_scattering(const ScatteringMatrix& theta,
                                                    const PortPartition& part) {
  detail::require_partition(part, theta.n_ports());
  const auto n_in = static_cast<Eigen::Index>(part.n_inputs);
  const auto n_out = static_cast<Eigen::Index>(part.n_outputs);
  return 0.5 * theta.theta().block(n_in, 0, n_out, n_in);
}

inline LosslessReport check_lossless_reciprocal(const ScatteringMatrix& theta, double tol) {
  const ComplexMatrix& t = theta.theta();
  const auto n = t.rows();
  LosslessReport report;
  report.unitarity = max_abs(t.adjoint() * t - ComplexMatrix::Identity(n, n));
  report.asymmetry = max_abs(t - t.transpose());
  report.tol = tol;
  return report;
}

/// Symmetric unitary completion of the transmitter network:
///
///   Theta_F = [ 0      V_bar^T            ]
///             [ V_bar  -V_tilde V_tilde^T ]
///
/// with V = [V_bar, V_tilde] unitary (N_T x N_T), V_bar holding N_S columns.
inline ScatteringMatrix complete_scattering_tx(const ComplexMatrix& v_bar,
                                               const ComplexMatrix& v_tilde,
                                               const NetworkTolerances& tol = {}) {
  const auto nt = v_bar.rows();
  const auto ns = v_bar.cols();
  if (ns == 0 || nt == 0 || (v_tilde.size() != 0 && v_tilde.rows() != nt) ||
      ns + v_tilde.cols() != nt) {
    throw error(errc::dimension_mismatch, "[V_bar, V_tilde] must be square with N_S >= 1");
  }
  if (detail::unitarity_residual(v_bar, v_tilde) > tol.unitary_input) {
    throw error(errc::not_unitary_input, "[V_bar, V_tilde] is not unitary");
  }
  ComplexMatrix t = ComplexMatrix::Zero(ns + nt, ns + nt);
  t.topRightCorner(ns, nt) = v_bar.transpose();
  t.bottomLeftCorner(nt, ns) = v_bar;
  if (v_tilde.cols() > 0) {
    t.bottomRightCorner(nt, nt).noalias() = -v_tilde * v_tilde.transpose();
  }
  detail::mirror_upper(t);
  return ScatteringMatrix(std::move(t));
}

/// Symmetric unitary completion of the receiver network (antenna ports first):
///
///   Theta_G = [ -U_tilde^* U_tilde^H   U_bar^* ]
///             [ U_bar^H                0       ]
inline ScatteringMatrix complete_scattering_rx(const ComplexMatrix& u_bar,
                                               const ComplexMatrix& u_tilde,
                                               const NetworkTolerances& tol = {}) {
  const auto nr = u_bar.rows();
  const auto ns = u_bar.cols();
  if (ns == 0 || nr == 0 || (u_tilde.size() != 0 && u_tilde.rows() != nr) ||
      ns + u_tilde.cols() != nr) {
    throw error(errc::dimension_mismatch, "[U_bar, U_tilde] must be square with N_S >= 1");
  }
  if (detail::unitarity_residual(u_bar, u_tilde) > tol.unitary_input) {
    throw error(errc::not_unitary_input, "[U_bar, U_tilde] is not unitary");
  }
  ComplexMatrix t = ComplexMatrix::Zero(nr + ns, nr + ns);
  if (u_tilde.cols() > 0) {
    t.topLeftCorner(nr, nr).noalias() = -u_tilde.conjugate() * u_tilde.adjoint();
  }
  t.topRightCorner(nr, ns) = u_bar.conjugate();
  t.bottomLeftCorner(ns, nr) = u_bar.adjoint();
  detail::mirror_upper(t);
  return ScatteringMatrix(std::move(t));
}

/// Closed-form susceptance of the transmitter network realizing
/// complete_scattering_tx(V_bar, V_tilde), with M = Im{V}^-1:
///
///   B_F = y0 [ [M Re{V}]_{S,S}   -M_{S,:}      ]
///            [ -M_{S,:}^T         Re{V} M      ]
///
/// Throws SingularImaginaryPart when Im{V} is too close to singular.
inline SusceptanceMatrix susceptance_tx(const ComplexMatrix& v, std::size_t n_s, double y0,
                                        const NetworkTolerances& tol = {}) {
  RealMatrix b = detail::susceptance_tx_unsymmetrized(v, n_s, y0, tol);
  detail::mirror_upper(b);
  return SusceptanceMatrix(b);
}

/// Receiver counterpart, with M = Im{U}^-1:
///
///   B_G = y0 [ -Re{U} M     M_{S,:}^T          ]
///            [ M_{S,:}      -[M Re{U}]_{S,S}   ]
inline SusceptanceMatrix susceptance_rx(const ComplexMatrix& u, std::size_t n_s, double y0,
                                        const NetworkTolerances& tol = {}) {
  RealMatrix b = detail::susceptance_rx_unsymmetrized(u, n_s, y0, tol);
  detail::mirror_upper(b);
  return SusceptanceMatrix(b);
}

}  // namespace milac
