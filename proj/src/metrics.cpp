#include "texunwarp/metrics.hpp"

#include <cmath>
#include <random>

#include "texunwarp/error.hpp"
#include "texunwarp/rng.hpp"

namespace texunwarp {

double ssim(const Image& a, const Image& b, const SsimOptions& opts) {
  if (!a.same_shape(b)) throw ShapeError("ssim needs images of identical shape");
  const Image ga = to_gray(a), gb = to_gray(b);
  const int win = opts.window;
  if (win < 1 || ga.width < win || ga.height < win) throw SizeError("image smaller than the ssim window");
  const double c1 = std::pow(opts.k1 * opts.dynamic_range, 2);
  const double c2 = std::pow(opts.k2 * opts.dynamic_range, 2);
  const double n = static_cast<double>(win) * win;

  double total = 0.0;
  long windows = 0;
  for (int y0 = 0; y0 + win <= ga.height; ++y0)
    for (int x0 = 0; x0 + win <= ga.width; ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = y0; y < y0 + win; ++y)
        for (int x = x0; x < x0 + win; ++x) {
          const double va = ga.at(x, y), vb = gb.at(x, y);
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      const double ma = sa / n, mb = sb / n;
      const double var_a = saa / n - ma * ma;
      const double var_b = sbb / n - mb * mb;
      const double cov = sab / n - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

namespace {
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}
}  // namespace

double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                        const Eigen::MatrixXd& cov_b) {
  const Eigen::Index d = mu_a.size();
  if (mu_b.size() != d || cov_a.rows() != d || cov_a.cols() != d || cov_b.rows() != d || cov_b.cols() != d)
    throw ShapeError("frechet_distance dimension mismatch");
  const Eigen::MatrixXd root_a = psd_sqrt(cov_a);
  const Eigen::MatrixXd inner = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev > 0.0) trace_root += std::sqrt(ev);
  }
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_root;
}

FeatureEmbedder::FeatureEmbedder() {
  constexpr int in = kInputSide * kInputSide * 3;
  Rng rng(kSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  w1_.resize(kHidden, in);
  for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = normal(rng) / std::sqrt(static_cast<double>(in)) * 4.0;
  w2_.resize(kFeatures, kHidden);
  for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = normal(rng) / std::sqrt(static_cast<double>(kHidden));
}

Eigen::VectorXd FeatureEmbedder::embed(const Image& img) const {
  if (img.channels != 3) throw ShapeError("embedder expects RGB images");
  const Image small = resize_bilinear(img, kInputSide, kInputSide);
  Eigen::VectorXd x(static_cast<Eigen::Index>(small.data.size()));
  for (std::size_t i = 0; i < small.data.size(); ++i) x[static_cast<Eigen::Index>(i)] = small.data[i] - 0.5;
  const Eigen::VectorXd hidden = (w1_ * x).array().tanh().matrix();
  return w2_ * hidden;
}

const FeatureEmbedder& default_embedder() {
  static const FeatureEmbedder embedder;
  return embedder;
}

GaussianFit fit_gaussian(const std::vector<Eigen::VectorXd>& features) {
  if (features.size() < 2) throw SizeError("a Gaussian fit needs at least two feature vectors");
  const Eigen::Index d = features.front().size();
  GaussianFit fit;
  fit.mean = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) fit.mean += f;
  fit.mean /= static_cast<double>(features.size());
  fit.cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& f : features) {
    const Eigen::VectorXd c = f - fit.mean;
    fit.cov += c * c.transpose();
  }
  fit.cov /= static_cast<double>(features.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < 1e-10) {
    fit.cov += 1e-6 * Eigen::MatrixXd::Identity(d, d);
    fit.regularized = true;
  }
  return fit;
}

FidResult fid_lite(std::span<const Image> set_a, std::span<const Image> set_b) {
  if (set_a.size() < 2 || set_b.size() < 2) throw SizeError("fid_lite needs at least two images per set");
  const FeatureEmbedder& emb = default_embedder();
  auto embed_all = [&](std::span<const Image> set) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(set.size());
    for (const auto& img : set) out.push_back(emb.embed(img));
    return out;
  };
  const GaussianFit a = fit_gaussian(embed_all(set_a));
  const GaussianFit b = fit_gaussian(embed_all(set_b));
  return {frechet_distance(a.mean, a.cov, b.mean, b.cov), a.regularized || b.regularized};
}

}  // namespace texunwarp
