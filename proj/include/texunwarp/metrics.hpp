#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "texunwarp/image.hpp"

namespace texunwarp {

struct SsimOptions {
  int window = 8;
  double dynamic_range = 1.0;  ///< L
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every uniform window position of the grayscale images.
double ssim(const Image& a, const Image& b, const SsimOptions& opts = {});

/// Frechet distance between N(mu_a, cov_a) and N(mu_b, cov_b). The matrix
/// square root goes through eigendecompositions of symmetrized products with
/// negative eigenvalues clipped to zero.
double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                        const Eigen::MatrixXd& cov_b);

/// Fixed, seeded random-projection embedding used in place of a pretrained
/// perceptual network: 32x32 resize -> 256 tanh units -> 64 features.
class FeatureEmbedder {
 public:
  static constexpr int kInputSide = 32;
  static constexpr int kHidden = 256;
  static constexpr int kFeatures = 64;
  static constexpr std::uint64_t kSeed = 0x5eed5eedULL;

  FeatureEmbedder();
  Eigen::VectorXd embed(const Image& img) const;

 private:
  Eigen::MatrixXd w1_;
  Eigen::MatrixXd w2_;
};

const FeatureEmbedder& default_embedder();

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  bool regularized = false;
};

/// Sample mean and (N-1)-normalized covariance of row vectors. A covariance
/// with an eigenvalue below 1e-10 gets 1e-6 I added and is flagged.
GaussianFit fit_gaussian(const std::vector<Eigen::VectorXd>& features);

struct FidResult {
  double value = 0.0;
  bool regularized = false;
};

FidResult fid_lite(std::span<const Image> set_a, std::span<const Image> set_b);

}  // namespace texunwarp
