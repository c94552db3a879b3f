#pragma once

// Debug dump of matrices as CSV. Each row of the matrix is one line; each
// entry contributes a "re,im" pair, so a rows x cols matrix has 2*cols fields.

#include <fstream>
#include <ostream>
#include <string>

#include "milac/core.hpp"
#include "milac/sim_harness.hpp"

namespace milac {

template <typename Derived>
void write_matrix_csv(const Eigen::MatrixBase<Derived>& m, std::ostream& os) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const complex z(m(r, c));
      if (c) os << ',';
      os << format_double(z.real()) << ',' << format_double(z.imag());
    }
    os << '\n';
  }
}

template <typename Derived>
void write_matrix_csv(const Eigen::MatrixBase<Derived>& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw error(errc::io_failure, "cannot open " + path + " for writing");
  }
  write_matrix_csv(m, os);
  if (!os) {
    throw error(errc::io_failure, "write to " + path + " failed");
  }
}

}  // namespace milac
