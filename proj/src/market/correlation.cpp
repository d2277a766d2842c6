#include "liqport/market/correlation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace liqport::market {

namespace {

constexpr double kPsdTolerance = -1e-12;

Matrix5 psd_part(const Matrix5& a) {
  Eigen::SelfAdjointEigenSolver<Matrix5> es(a);
  const Eigen::Matrix<double, 5, 1> lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Matrix5 factorize(const Matrix5& c) {
  Eigen::LLT<Matrix5> llt(c);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Singular but PSD: symmetric square-root factor.
  Eigen::SelfAdjointEigenSolver<Matrix5> es(c);
  const Eigen::Matrix<double, 5, 1> root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

}  // namespace

Matrix5 assemble_correlation(const ModelParams& p) {
  Matrix5 c = Matrix5::Identity();
  auto put = [&c](int i, int j, double v) { c(i, j) = c(j, i) = v; };
  put(kStock, kVariance, p.rho1());
  put(kStock, kVarianceLevel, p.rho2());
  put(kVariance, kVarianceLevel, p.rho3());
  put(kStock, kLiquidityPrice, p.rho4());
  put(kStock, kIlliquidity, p.rho5());
  put(kLiquidityPrice, kIlliquidity, p.rho6());
  return c;
}

Matrix5 nearest_correlation(const Matrix5& a, int max_iter, double tol) {
  Matrix5 y = a, x = a;
  Matrix5 correction = Matrix5::Zero();
  for (int k = 0; k < max_iter; ++k) {
    const Matrix5 r = y - correction;
    x = psd_part(r);
    correction = x - r;
    Matrix5 y_next = x;
    y_next.diagonal().setOnes();
    const double change = (y_next - y).norm();
    y = y_next;
    if (change < tol) break;
  }
  return y;
}

CorrelationSpec build_correlation(const ModelParams& p, bool allow_projection) {
  CorrelationSpec spec;
  spec.matrix = assemble_correlation(p);
  Eigen::SelfAdjointEigenSolver<Matrix5> es(spec.matrix);
  if (es.eigenvalues().minCoeff() < kPsdTolerance) {
    if (!allow_projection) {
      throw NotPositiveSemidefinite(
          "completed correlation matrix is not positive semidefinite (smallest eigenvalue " +
          std::to_string(es.eigenvalues().minCoeff()) +
          "); enable projection to use the nearest correlation matrix");
    }
    spec.matrix = nearest_correlation(spec.matrix);
    spec.projected = true;
  }
  spec.factor = factorize(spec.matrix);
  return spec;
}

}  // namespace liqport::market
