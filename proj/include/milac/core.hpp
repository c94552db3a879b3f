#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace milac {

using complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr complex j{0.0, 1.0};

enum class errc {
  invalid_argument,
  dimension_mismatch,
  singular_matrix,
  not_unitary_input,
  singular_imaginary_part,
  non_finite_input,
  phase_search_exhausted,
  all_zero_eigenvalues,
  zero_combiner_row,
  index_out_of_range,
  io_failure,
};

inline const char* to_string(errc code) {
  switch (code) {
    case errc::invalid_argument: return "InvalidArgument";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::singular_matrix: return "SingularMatrix";
    case errc::not_unitary_input: return "NotUnitaryInput";
    case errc::singular_imaginary_part: return "SingularImaginaryPart";
    case errc::non_finite_input: return "NonFiniteInput";
    case errc::phase_search_exhausted: return "PhaseSearchExhausted";
    case errc::all_zero_eigenvalues: return "AllZeroEigenvalues";
    case errc::zero_combiner_row: return "ZeroCombinerRow";
    case errc::index_out_of_range: return "IndexOutOfRange";
    case errc::io_failure: return "IoFailure";
  }
  return "Unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

/// Largest absolute entry, 0 for an empty matrix.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace milac
