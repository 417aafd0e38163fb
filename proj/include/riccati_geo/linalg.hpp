#pragma once

#include <Eigen/Dense>

#include <string>

namespace riccati_geo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);

/// Throws DimensionMismatch unless `m` is rows x cols.
void require_shape(const Matrix& m, Index rows, Index cols, const char* what);
void require_square(const Matrix& m, const char* what);

std::string shape_string(const Matrix& m);

/// Orthonormal factor of a thin QR with the R diagonal made non-negative,
/// so the result is a deterministic function of the input.
Matrix qf(const Matrix& m);

}  // namespace riccati_geo
