#pragma once

#include "spectradiff/errors.hpp"
#include "spectradiff/spectra_io.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace spectradiff::metrics {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Sample mean and unbiased covariance (plus jitter * I) of a set of vectors.
template <typename Scalar = double>
struct GaussianFit {
  VectorX<Scalar> mean;
  MatrixX<Scalar> covariance;
  Eigen::Index sample_count = 0;

  Eigen::Index dim() const { return mean.size(); }
};

inline constexpr double kCovarianceJitter = 1e-6;

/// Mean over all |A| x |B| row pairs of the cosine similarity; pairs with a
/// zero vector contribute 0.
template <typename DA, typename DB>
typename DA::Scalar cosine_similarity_mean(const Eigen::MatrixBase<DA>& a,
                                           const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.rows() == 0 || b.rows() == 0) throw ArgumentError("cosine: empty set");
  if (a.cols() != b.cols()) throw ArgumentError("cosine: vector lengths differ");
  const VectorX<Scalar> na = a.rowwise().norm();
  const VectorX<Scalar> nb = b.rowwise().norm();
  const MatrixX<Scalar> dots = a * b.transpose();
  Scalar total = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const Scalar denom = na[i] * nb[j];
      if (denom > 0) total += dots(i, j) / denom;
    }
  }
  return total / Scalar(a.rows() * b.rows());
}

/// Rows are samples.
template <typename Derived>
GaussianFit<typename Derived::Scalar> fit_gaussian(const Eigen::MatrixBase<Derived>& samples,
                                                   double jitter = kCovarianceJitter) {
  using Scalar = typename Derived::Scalar;
  if (samples.rows() < 2) throw ArgumentError("fit_gaussian: need at least 2 samples");
  GaussianFit<Scalar> g;
  g.sample_count = samples.rows();
  g.mean = samples.colwise().mean().transpose();
  const MatrixX<Scalar> centered = samples.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / Scalar(samples.rows() - 1);
  g.covariance = Scalar(0.5) * (g.covariance + g.covariance.transpose());
  g.covariance.diagonal().array() += Scalar(jitter);
  return g;
}

namespace detail {

template <typename Scalar>
void check_dims(const GaussianFit<Scalar>& a, const GaussianFit<Scalar>& b, const char* what) {
  if (a.dim() != b.dim() || a.covariance.rows() != a.dim() || b.covariance.rows() != b.dim()) {
    throw ArgumentError(std::string(what) + ": dimension mismatch");
  }
}

/// Symmetric PSD square root by eigendecomposition, negative eigenvalues
/// clamped to 0.
template <typename Scalar>
MatrixX<Scalar> sqrt_psd(const MatrixX<Scalar>& m) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(m);
  const VectorX<Scalar> root = eig.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

/// KL(N(mu_p, S_p) || N(mu_q, S_q)).
template <typename Scalar>
Scalar gaussian_kl(const VectorX<Scalar>& mu_p, const MatrixX<Scalar>& cov_p,
                   const VectorX<Scalar>& mu_q, const Eigen::LLT<MatrixX<Scalar>>& chol_q,
                   Scalar logdet_q) {
  Eigen::LLT<MatrixX<Scalar>> chol_p(cov_p);
  if (chol_p.info() != Eigen::Success) throw ArgumentError("jsd: covariance not positive definite");
  const Scalar logdet_p = Scalar(2) * chol_p.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const VectorX<Scalar> diff = mu_q - mu_p;
  const Scalar trace_term = chol_q.solve(cov_p).trace();
  const Scalar quad = diff.dot(chol_q.solve(diff));
  return Scalar(0.5) * (trace_term + quad - Scalar(mu_p.size()) + logdet_q - logdet_p);
}

}  // namespace detail

/// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)), the squared 2-Wasserstein
/// distance between the two Gaussians. The trace of the cross term is taken
/// as tr((S1^(1/2) S2 S1^(1/2))^(1/2)).
template <typename Scalar>
Scalar frechet_distance(const GaussianFit<Scalar>& a, const GaussianFit<Scalar>& b) {
  detail::check_dims(a, b, "frechet_distance");
  const MatrixX<Scalar> root_a = detail::sqrt_psd(a.covariance);
  const MatrixX<Scalar> inner = root_a * b.covariance * root_a;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(Scalar(0.5) * (inner + inner.transpose()),
                                                     Eigen::EigenvaluesOnly);
  const Scalar cross = eig.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().sum();
  const Scalar value = (a.mean - b.mean).squaredNorm() + a.covariance.trace() +
                       b.covariance.trace() - Scalar(2) * cross;
  return std::max(value, Scalar(0));
}

/// Squared MMD under a linear kernel, which for Gaussian moments reduces to
/// the squared distance between the means.
template <typename Scalar>
Scalar mmd_gaussian(const GaussianFit<Scalar>& a, const GaussianFit<Scalar>& b) {
  detail::check_dims(a, b, "mmd_gaussian");
  return (a.mean - b.mean).squaredNorm();
}

/// Jensen-Shannon divergence with the mixture midpoint replaced by the
/// Gaussian matching its first two moments:
/// 0.5 KL(a || m) + 0.5 KL(b || m), m = N((mu_a + mu_b) / 2,
/// (S_a + S_b) / 2 + (mu_a - mu_b)(mu_a - mu_b)^T / 4).
template <typename Scalar>
Scalar jsd_gaussian(const GaussianFit<Scalar>& a, const GaussianFit<Scalar>& b) {
  detail::check_dims(a, b, "jsd_gaussian");
  const VectorX<Scalar> mu_m = Scalar(0.5) * (a.mean + b.mean);
  const VectorX<Scalar> gap = a.mean - b.mean;
  const MatrixX<Scalar> cov_m = Scalar(0.5) * (a.covariance + b.covariance) +
                                Scalar(0.25) * gap * gap.transpose();
  Eigen::LLT<MatrixX<Scalar>> chol_m(cov_m);
  if (chol_m.info() != Eigen::Success) throw ArgumentError("jsd: midpoint covariance not positive definite");
  const Scalar logdet_m = Scalar(2) * chol_m.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Scalar kl_a = detail::gaussian_kl(a.mean, a.covariance, mu_m, chol_m, logdet_m);
  const Scalar kl_b = detail::gaussian_kl(b.mean, b.covariance, mu_m, chol_m, logdet_m);
  return std::max(Scalar(0.5) * (kl_a + kl_b), Scalar(0));
}

// Spectra-level helpers ---------------------------------------------------------

/// Length used for all metric vectors.
inline constexpr Eigen::Index kMetricLength = 1024;

/// Row-per-spectrum matrix after resampling each spectrum to `length`.
Eigen::MatrixXd resampled_matrix(const LabeledDataset& dataset, Eigen::Index length = kMetricLength);

struct MetricsRow {
  std::string method;
  double cos = 0;
  double mmd = 0;
  double jsd = 0;
  double fd = 0;
};

/// All four similarity metrics between a real and a generated set.
MetricsRow compare_sets(const std::string& method, const Eigen::MatrixXd& real,
                        const Eigen::MatrixXd& generated);
MetricsRow compare_datasets(const std::string& method, const LabeledDataset& real,
                            const LabeledDataset& generated);

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

// PCA export ----------------------------------------------------------------------

struct PcaRow {
  std::string set_id;
  std::string label;
  double pc1 = 0;
  double pc2 = 0;
};

struct PcaResult {
  std::vector<PcaRow> rows;
  bool degenerate = false;  // all input vectors identical
};

struct LabeledVectors {
  std::string set_id;
  std::vector<std::string> labels;  // one per row
  Eigen::MatrixXd vectors;          // rows are samples
};

/// Two-component PCA fitted on the union of all sets. Component signs are
/// fixed so each component's largest-magnitude loading is positive.
PcaResult export_pca(const std::vector<LabeledVectors>& sets);
std::string format_pca_csv(const PcaResult& result);

}  // namespace spectradiff::metrics
