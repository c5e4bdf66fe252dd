#pragma once

#include <complex>
#include <Eigen/Dense>

namespace jacd {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Inner product convention used throughout the reverse-mode code:
// for adjoint G of a complex matrix Z (G(i,j) = dL/dRe(Z_ij) + i dL/dIm(Z_ij)),
// the directional derivative is Re(sum conj(G) .* dZ).
inline double re_dot(const CMat& g, const CMat& m) {
  return g.cwiseProduct(m.conjugate()).sum().real();
}

}  // namespace jacd
