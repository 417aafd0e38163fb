#include "riccati_geo/linalg.hpp"

#include "riccati_geo/error.hpp"

#include <sstream>

namespace riccati_geo {

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_shape(const Matrix& m, Index rows, Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << shape_string(m);
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected a non-empty square matrix, got " + shape_string(m));
  }
}

Matrix qf(const Matrix& m) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix& packed = qr.matrixQR();
  for (Index j = 0; j < cols; ++j) {
    if (packed(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace riccati_geo
