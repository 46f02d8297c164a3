#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "gist/image.hpp"

namespace gist::fid {

// Maps an image to a fixed-length real vector. Must be pure.
struct FeatureExtractor {
  std::string name;
  int dim = 0;
  std::function<Eigen::VectorXd(const Image&)> extract;
};

struct GaussianMoments {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

struct FIDReport {
  double fid = 0.0;
  int n_real = 0;
  int n_gen = 0;
  std::string extractor_name;
  GaussianMoments moments_real;
  GaussianMoments moments_gen;
  std::vector<std::string> warnings;
};

inline constexpr int kDeskGrid = 16;
inline constexpr int kDeskBins = 16;

// 16x16 bilinear thumbnail (256 dims) followed by a 16-bin intensity
// histogram normalised to sum 1. resolution_in > 0 pins the accepted input
// size; 0 accepts any size.
FeatureExtractor desk_extractor(int resolution_in = 0);

// Rows of `features` are samples. Unbiased covariance, symmetrised.
GaussianMoments fit_gaussian(const Eigen::MatrixXd& features);

// Q max(L, 0)^(1/2) Q^T for symmetric S. Throws NotSymmetric.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& s);

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1^(1/2) S2 S1^(1/2))^(1/2)), clamped at 0.
double frechet_distance(const GaussianMoments& a, const GaussianMoments& b);

Eigen::MatrixXd extract_features(const std::vector<Image>& images, const FeatureExtractor& extractor);

FIDReport compute_fid(const std::vector<Image>& real, const std::vector<Image>& gen, const FeatureExtractor& extractor);
FIDReport compute_fid(const std::vector<ImageRecord>& real, const std::vector<ImageRecord>& gen,
                      const FeatureExtractor& extractor);

std::vector<Image> images_of(const std::vector<ImageRecord>& records);

// Flat key=value record: fid, n_real, n_gen, extractor_name.
std::string to_record(const FIDReport& report);

}  // namespace gist::fid
