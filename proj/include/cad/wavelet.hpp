#pragma once

// Haar analysis/synthesis with the detail coefficients arranged as two
// binary splitting trees, and coefficient thresholding driven by
// conquer-and-divide testing.
//
// Layout for n = 2^(J+1) samples:
//   coarse(0)  scaling coefficient      (always kept)
//   coarse(1)  level-0 detail           (always kept)
//   level j = 1..J holds 2^j details w(j,k), k = 0..2^j-1,
//   w(j,k) splits into w(j+1,2k) and w(j+1,2k+1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cad/procedures.hpp"
#include "cad/stat_kernels.hpp"
#include "cad/tree_core.hpp"

namespace cad {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct WaveletTree {
  using Vector = VectorX<Scalar>;

  std::size_t J = 0;
  Eigen::Matrix<Scalar, 2, 1> coarse = Eigen::Matrix<Scalar, 2, 1>::Zero();
  /// levels[j - 1] holds level j.
  std::vector<Vector> levels;

  std::size_t signal_length() const { return std::size_t{2} << J; }

  Vector& level(std::size_t j) { return levels.at(j - 1); }
  const Vector& level(std::size_t j) const { return levels.at(j - 1); }

  Scalar energy() const {
    Scalar e = coarse.squaredNorm();
    for (const auto& l : levels) e += l.squaredNorm();
    return e;
  }

  /// Throws std::invalid_argument unless every level has 2^j entries.
  void validate() const {
    if (J < 1 || levels.size() != J) throw std::invalid_argument("wavelet tree needs J >= 1 levels");
    for (std::size_t j = 1; j <= J; ++j) {
      if (static_cast<std::size_t>(level(j).size()) != (std::size_t{1} << j)) {
        throw std::invalid_argument("level " + std::to_string(j) + " must hold 2^j coefficients");
      }
    }
  }
};

using WaveletTreed = WaveletTree<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Orthonormal Haar analysis: s = (a + b)/sqrt2, d = (a - b)/sqrt2, recursed on s.
template <typename Derived>
WaveletTree<typename Derived::Scalar> haar_forward(const Eigen::MatrixBase<Derived>& signal) {
  using Scalar = typename Derived::Scalar;
  using Vector = VectorX<Scalar>;
  const auto n = static_cast<std::size_t>(signal.size());
  if (n < 4 || !is_power_of_two(n)) {
    throw std::invalid_argument("signal length must be a power of two >= 4, got " +
                                std::to_string(n));
  }
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));

  WaveletTree<Scalar> tree;
  while ((std::size_t{2} << tree.J) < n) ++tree.J;
  tree.levels.resize(tree.J);

  Vector smooth = signal;
  for (std::size_t j = tree.J + 1; j-- > 0;) {
    const Eigen::Index half = smooth.size() / 2;
    const auto even = Eigen::Map<const Vector, 0, Eigen::InnerStride<2>>(smooth.data(), half);
    const auto odd = Eigen::Map<const Vector, 0, Eigen::InnerStride<2>>(smooth.data() + 1, half);
    Vector detail = (even - odd) * inv_sqrt2;
    Vector next = (even + odd) * inv_sqrt2;
    if (j == 0) {
      tree.coarse << next(0), detail(0);
    } else {
      tree.level(j) = std::move(detail);
    }
    smooth = std::move(next);
  }
  return tree;
}

template <typename Scalar>
VectorX<Scalar> haar_inverse(const WaveletTree<Scalar>& tree) {
  using Vector = VectorX<Scalar>;
  tree.validate();
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  Vector smooth(1);
  smooth(0) = tree.coarse(0);
  for (std::size_t j = 0; j <= tree.J; ++j) {
    Vector detail = j == 0 ? Vector::Constant(1, tree.coarse(1)) : tree.level(j);
    Vector next(2 * smooth.size());
    Eigen::Map<Vector, 0, Eigen::InnerStride<2>>(next.data(), smooth.size()) =
        (smooth + detail) * inv_sqrt2;
    Eigen::Map<Vector, 0, Eigen::InnerStride<2>>(next.data() + 1, smooth.size()) =
        (smooth - detail) * inv_sqrt2;
    smooth = std::move(next);
  }
  return smooth;
}

/// Coefficient (j, k) addressed by a vertex of the coefficient forest.
struct CoefficientIndex {
  std::size_t level = 0;
  std::size_t k = 0;
};

/// The two binary coefficient trees rooted at w(1,0) and w(1,1), each of depth J - 1.
struct CoefficientForest {
  std::size_t J = 0;
  Forest forest;
  std::vector<AlphaAllocation> allocations;

  CoefficientIndex index(std::size_t tree, VertexId v) const {
    const auto& t = forest.trees.at(tree);
    const std::size_t d = t.vertex(v).depth;
    const std::size_t layer_start = (std::size_t{1} << d) - 1;
    return {d + 1, tree * (std::size_t{1} << d) + (v - layer_start)};
  }
};

/// Two roots at alpha/2 each, uniform halving below, so level j tests at alpha / 2^j.
inline CoefficientForest coefficient_forest(std::size_t J, double alpha) {
  if (J < 1) throw std::invalid_argument("coefficient forest needs J >= 1");
  std::vector<std::size_t> branching(J - 1, 2);
  std::vector<TestTree> trees{build_complete_tree(branching, J - 1),
                              build_complete_tree(branching, J - 1)};
  CoefficientForest cf;
  cf.J = J;
  cf.forest = make_forest(std::move(trees), alpha);
  for (std::size_t i = 0; i < 2; ++i) {
    cf.allocations.push_back(allocate_alpha_uniform(cf.forest.trees[i], cf.forest.root_levels[i]));
  }
  return cf;
}

struct LevelThreshold {
  std::size_t level = 0;
  double alpha = 0.0;
  double z = 0.0;
  double threshold = 0.0;  // z * sigma
};

/// Per-level test levels and the implied |w| thresholds.
inline std::vector<LevelThreshold> level_thresholds(std::size_t J, double alpha, double sigma) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
  const auto cf = coefficient_forest(J, alpha);
  std::vector<LevelThreshold> out;
  for (std::size_t j = 1; j <= J; ++j) {
    const VertexId first_at_depth = (std::size_t{1} << (j - 1)) - 1;
    const double a = cf.allocations[0][first_at_depth];
    const double z = critical_z(a);
    out.push_back({j, a, z, z * sigma});
  }
  return out;
}

/// Two-sided z-test p-values of w/sigma, one map per coefficient tree.
template <typename Scalar>
std::vector<PValueMap> coefficient_pvalues(const WaveletTree<Scalar>& tree,
                                           const CoefficientForest& cf, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
  tree.validate();
  if (cf.J != tree.J) throw std::invalid_argument("coefficient forest does not match the tree");
  std::vector<PValueMap> out(2);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto& t = cf.forest.trees[r];
    out[r].p.resize(t.size());
    for (VertexId v = 0; v < t.size(); ++v) {
      const auto idx = cf.index(r, v);
      const double w = static_cast<double>(tree.level(idx.level)(static_cast<Eigen::Index>(idx.k)));
      out[r].p[v] = z_score_pvalue(w / sigma);
    }
  }
  return out;
}

template <typename Scalar>
std::vector<PValueMap> coefficient_pvalues(const WaveletTree<Scalar>& tree, double sigma) {
  return coefficient_pvalues(tree, coefficient_forest(tree.J, 0.5), sigma);
}

struct ThresholdOptions {
  /// Coefficients at levels j <= this are tested even when their parent was
  /// accepted. 0 disables the override. Nonzero values leave the familywise
  /// guarantee unproven.
  std::size_t force_test_through_level = 0;
};

/// Keep flags per level (index j - 1) after conquer-and-divide testing.
template <typename Scalar>
std::vector<std::vector<bool>> cad_keep_mask(const WaveletTree<Scalar>& tree, double alpha,
                                             double sigma, const ThresholdOptions& opts = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const auto cf = coefficient_forest(tree.J, alpha);
  const auto pvals = coefficient_pvalues(tree, cf, sigma);

  std::vector<std::vector<bool>> keep(tree.J);
  for (std::size_t j = 1; j <= tree.J; ++j) keep[j - 1].assign(std::size_t{1} << j, false);

  for (std::size_t r = 0; r < 2; ++r) {
    const auto& t = cf.forest.trees[r];
    std::vector<VertexId> rejected;
    if (opts.force_test_through_level == 0) {
      rejected = cad_run(t, cf.allocations[r], pvals[r]).rejected;
    } else {
      std::vector<bool> tested(t.size(), false);
      tested[t.root()] = true;
      for (VertexId v = 0; v < t.size(); ++v) {
        const bool forced = t.vertex(v).depth + 1 <= opts.force_test_through_level;
        if (!tested[v] && !forced) continue;
        const bool reject = pvals[r].p[v] <= cf.allocations[r][v];
        if (reject) rejected.push_back(v);
        if (reject || forced) {
          for (VertexId c : t.children(v)) tested[c] = true;
        }
      }
    }
    for (VertexId v : rejected) {
      const auto idx = cf.index(r, v);
      keep[idx.level - 1][idx.k] = true;
    }
  }
  return keep;
}

/// Zeroes every detail coefficient whose null was not rejected; the coarse
/// block is always kept.
template <typename Scalar>
WaveletTree<Scalar> cad_threshold(const WaveletTree<Scalar>& tree, double alpha, double sigma,
                                  const ThresholdOptions& opts = {}) {
  const auto keep = cad_keep_mask(tree, alpha, sigma, opts);
  WaveletTree<Scalar> out = tree;
  for (std::size_t j = 1; j <= tree.J; ++j) {
    for (std::size_t k = 0; k < keep[j - 1].size(); ++k) {
      if (!keep[j - 1][k]) out.level(j)(static_cast<Eigen::Index>(k)) = Scalar(0);
    }
  }
  return out;
}

/// Gaussian scale from the median absolute deviation of the finest level.
template <typename Scalar>
double estimate_sigma(const WaveletTree<Scalar>& tree) {
  tree.validate();
  const auto& finest = tree.level(tree.J);
  if (finest.size() < 16) {
    throw std::invalid_argument("sigma estimation needs at least 16 finest-level coefficients");
  }
  auto median = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
  };
  std::vector<double> w(finest.data(), finest.data() + finest.size());
  const double center = median(w);
  for (double& x : w) x = std::fabs(x - center);
  static const double mad_scale = std_normal_quantile(0.75);
  return median(std::move(w)) / mad_scale;
}

enum class SigmaMode { known, estimate };

struct DenoiseResult {
  Eigen::VectorXd signal;
  std::size_t kept = 0;
  double sigma = 0.0;
  std::vector<LevelThreshold> thresholds;
};

/// haar_inverse . cad_threshold . haar_forward. With SigmaMode::estimate the
/// sigma argument is ignored and the MAD estimate is used instead.
inline DenoiseResult denoise(const Eigen::VectorXd& signal, double alpha, SigmaMode mode,
                             double sigma = 1.0, const ThresholdOptions& opts = {}) {
  const auto coeffs = haar_forward(signal);
  if (mode == SigmaMode::estimate) sigma = estimate_sigma(coeffs);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise scale must be positive (estimate was " +
                                std::to_string(sigma) + ")");
  }
  const auto keep = cad_keep_mask(coeffs, alpha, sigma, opts);
  WaveletTreed kept_tree = coeffs;
  DenoiseResult out;
  for (std::size_t j = 1; j <= coeffs.J; ++j) {
    for (std::size_t k = 0; k < keep[j - 1].size(); ++k) {
      if (keep[j - 1][k]) {
        ++out.kept;
      } else {
        kept_tree.level(j)(static_cast<Eigen::Index>(k)) = 0.0;
      }
    }
  }
  out.signal = haar_inverse(kept_tree);
  out.sigma = sigma;
  out.thresholds = level_thresholds(coeffs.J, alpha, sigma);
  return out;
}

}  // namespace cad
