#pragma once

#include <Eigen/Dense>
#include <complex>

namespace sdmd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline CMat hermitize(const CMat& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace sdmd
