#include "phylomoments/linalg.h"

#include <cmath>
#include <stdexcept>

namespace phylomoments {

namespace {

// Largest 1-norm for which the [13/13] approximant is accurate to unit roundoff
// without scaling.
constexpr auto k_theta13 = 5.371920351148152;

constexpr double k_pade13[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};

}  // namespace

auto expm(const Matrix& a) -> Matrix {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("expm needs a square matrix");
  }
  const auto n = a.rows();
  if (n == 0) {
    return a;
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("expm input has non-finite entries");
  }

  const auto norm = a.cwiseAbs().colwise().sum().maxCoeff();
  auto squarings = 0;
  if (norm > k_theta13) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / k_theta13))));
  }
  const Matrix scaled = a / std::ldexp(1.0, squarings);

  const auto& b = k_pade13;
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = scaled * scaled;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;

  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 +
                         b[1] * ident;
  const Matrix u = scaled * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
                   b[0] * ident;

  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (auto k = 0; k < squarings; ++k) {
    result = result * result;
  }
  return result;
}

}  // namespace phylomoments
