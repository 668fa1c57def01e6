#include "spectradiff/metrics.hpp"

#include "spectradiff/figure.hpp"

#include <Eigen/SVD>

#include <fstream>

namespace spectradiff::metrics {

Eigen::MatrixXd resampled_matrix(const LabeledDataset& dataset, Eigen::Index length) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dataset.size()), length);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = interpolate_spectrum(dataset[i], length).transpose();
  }
  return out;
}

MetricsRow compare_sets(const std::string& method, const Eigen::MatrixXd& real,
                        const Eigen::MatrixXd& generated) {
  MetricsRow row;
  row.method = method;
  row.cos = cosine_similarity_mean(generated, real);
  const auto fit_real = fit_gaussian(real);
  const auto fit_gen = fit_gaussian(generated);
  row.mmd = mmd_gaussian(fit_gen, fit_real);
  row.jsd = jsd_gaussian(fit_gen, fit_real);
  row.fd = frechet_distance(fit_gen, fit_real);
  return row;
}

MetricsRow compare_datasets(const std::string& method, const LabeledDataset& real,
                            const LabeledDataset& generated) {
  return compare_sets(method, resampled_matrix(real), resampled_matrix(generated));
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "method,cos,mmd,jsd,fd\n";
  for (const auto& r : rows) {
    out += r.method + "," + format_real(r.cos) + "," + format_real(r.mmd) + "," +
           format_real(r.jsd) + "," + format_real(r.fd) + "\n";
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_metrics_csv(rows);
}

PcaResult export_pca(const std::vector<LabeledVectors>& sets) {
  Eigen::Index total = 0, dim = -1;
  for (const auto& s : sets) {
    if (static_cast<Eigen::Index>(s.labels.size()) != s.vectors.rows()) {
      throw ArgumentError("pca: set '" + s.set_id + "' has a label count that differs from its rows");
    }
    if (s.vectors.rows() == 0) continue;
    if (dim >= 0 && s.vectors.cols() != dim) throw ArgumentError("pca: vector lengths differ");
    dim = s.vectors.cols();
    total += s.vectors.rows();
  }
  if (total < 2) throw ArgumentError("pca: need at least 2 vectors");

  Eigen::MatrixXd all(total, dim);
  Eigen::Index r = 0;
  for (const auto& s : sets) {
    if (s.vectors.rows() == 0) continue;
    all.middleRows(r, s.vectors.rows()) = s.vectors;
    r += s.vectors.rows();
  }
  const Eigen::RowVectorXd mean = all.colwise().mean();
  const Eigen::MatrixXd centered = all.rowwise() - mean;

  PcaResult result;
  Eigen::MatrixXd projection = Eigen::MatrixXd::Zero(total, 2);
  if (centered.cwiseAbs().maxCoeff() == 0.0) {
    result.degenerate = true;
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::Index comps = std::min<Eigen::Index>(2, svd.matrixV().cols());
    for (Eigen::Index c = 0; c < comps; ++c) {
      if (svd.singularValues()[c] <= 0) continue;
      Eigen::VectorXd axis = svd.matrixV().col(c);
      Eigen::Index arg = 0;
      axis.cwiseAbs().maxCoeff(&arg);
      if (axis[arg] < 0) axis = -axis;
      projection.col(c) = centered * axis;
    }
  }

  r = 0;
  for (const auto& s : sets) {
    for (Eigen::Index i = 0; i < s.vectors.rows(); ++i, ++r) {
      result.rows.push_back({s.set_id, s.labels[static_cast<std::size_t>(i)], projection(r, 0),
                             projection(r, 1)});
    }
  }
  return result;
}

std::string format_pca_csv(const PcaResult& result) {
  std::string out = "set_id,label,pc1,pc2\n";
  for (const auto& row : result.rows) {
    out += row.set_id + "," + row.label + "," + format_real(row.pc1) + "," + format_real(row.pc2) + "\n";
  }
  return out;
}

}  // namespace spectradiff::metrics
