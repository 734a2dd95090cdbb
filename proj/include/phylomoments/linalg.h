#pragma once

#include <Eigen/Dense>

namespace phylomoments {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// exp(a) by scaling and squaring with a degree-13 Pade approximant.
auto expm(const Matrix& a) -> Matrix;

}  // namespace phylomoments
