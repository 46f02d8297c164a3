#include "gist/fid.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gist/error.hpp"

namespace gist::fid {

namespace {

constexpr double kSymmetryTol = 1e-8;
constexpr double kConditionLimit = 1e12;
constexpr double kRegularizer = 1e-6;

bool ill_conditioned(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (hi <= 0.0) return true;
  return lo <= 0.0 || hi / lo > kConditionLimit;
}

}  // namespace

FeatureExtractor desk_extractor(int resolution_in) {
  FeatureExtractor fx;
  fx.name = "desk-thumb16-hist16";
  fx.dim = kDeskGrid * kDeskGrid + kDeskBins;
  fx.extract = [resolution_in](const Image& img) {
    if (resolution_in > 0 && (img.height != resolution_in || img.width != resolution_in))
      throw Error(Errc::ShapeMismatch, "extractor expects " + std::to_string(resolution_in) + "^2 images");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kDeskGrid * kDeskGrid + kDeskBins);
    const Image thumb = resize_bilinear(img, kDeskGrid, kDeskGrid);
    for (int i = 0; i < kDeskGrid * kDeskGrid; ++i) v[i] = thumb.pixels[i];
    const double w = 1.0 / static_cast<double>(img.pixels.size());
    for (float p : img.pixels) {
      const double c = std::clamp(static_cast<double>(p), 0.0, 1.0);
      const int bin = std::min(kDeskBins - 1, static_cast<int>(c * kDeskBins));
      v[kDeskGrid * kDeskGrid + bin] += w;
    }
    return v;
  };
  return fx;
}

GaussianMoments fit_gaussian(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw Error(Errc::TooFewSamples, "moment fitting needs at least 2 samples");
  GaussianMoments m;
  m.mu = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - m.mu.transpose();
  const Eigen::MatrixXd s = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  m.sigma = 0.5 * (s + s.transpose());
  return m;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols()) throw Error(Errc::NotSymmetric, "matrix is not square");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
    throw Error(Errc::NotSymmetric, "matrix is not symmetric within 1e-8");
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& q = eig.eigenvectors();
  Eigen::MatrixXd out = q * root.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

double frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows() || a.sigma.rows() != a.mu.size())
    throw Error(Errc::DimMismatch, "moment dimensions differ");
  const double mean_term = (a.mu - b.mu).squaredNorm();
  Eigen::MatrixXd s1 = a.sigma;
  Eigen::MatrixXd s2 = b.sigma;
  if (ill_conditioned(s1) || ill_conditioned(s2)) {
    s1.diagonal().array() += kRegularizer;
    s2.diagonal().array() += kRegularizer;
  }
  const Eigen::MatrixXd root1 = matrix_sqrt_psd(s1);
  Eigen::MatrixXd product = root1 * s2 * root1;
  product = 0.5 * (product + product.transpose());
  const double cross = matrix_sqrt_psd(product).trace();
  const double value = mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

Eigen::MatrixXd extract_features(const std::vector<Image>& images, const FeatureExtractor& extractor) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), extractor.dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    Eigen::VectorXd v = extractor.extract(images[i]);
    if (v.size() != extractor.dim) throw Error(Errc::DimMismatch, "extractor returned a vector of the wrong length");
    out.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return out;
}

FIDReport compute_fid(const std::vector<Image>& real, const std::vector<Image>& gen, const FeatureExtractor& extractor) {
  if (real.size() < 2 || gen.size() < 2) throw Error(Errc::TooFewSamples, "FID needs at least 2 images per set");
  FIDReport report;
  report.n_real = static_cast<int>(real.size());
  report.n_gen = static_cast<int>(gen.size());
  report.extractor_name = extractor.name;
  const auto dim = static_cast<std::size_t>(extractor.dim);
  if (real.size() < dim + 1)
    report.warnings.push_back("real set has fewer samples than feature dim + 1; covariance is rank deficient");
  if (gen.size() < dim + 1)
    report.warnings.push_back("generated set has fewer samples than feature dim + 1; covariance is rank deficient");
  report.moments_real = fit_gaussian(extract_features(real, extractor));
  report.moments_gen = fit_gaussian(extract_features(gen, extractor));
  report.fid = frechet_distance(report.moments_real, report.moments_gen);
  return report;
}

std::vector<Image> images_of(const std::vector<ImageRecord>& records) {
  std::vector<Image> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.image);
  return out;
}

FIDReport compute_fid(const std::vector<ImageRecord>& real, const std::vector<ImageRecord>& gen,
                      const FeatureExtractor& extractor) {
  return compute_fid(images_of(real), images_of(gen), extractor);
}

std::string to_record(const FIDReport& report) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", report.fid);
  return std::string("fid=") + buf + "\nn_real=" + std::to_string(report.n_real) +
         "\nn_gen=" + std::to_string(report.n_gen) + "\nextractor_name=" + report.extractor_name + "\n";
}

}  // namespace gist::fid
