// Core numeric types: parameter vectors, feasible domains, and per-round losses.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace oilbench {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw std::domain_error(std::string(what) + ": non-finite entries");
}

// Feasible set W: unconstrained, Euclidean ball, or coordinate box.
struct Domain {
  enum class Kind { Unconstrained, Ball, Box };

  Kind kind = Kind::Unconstrained;
  Vec center;  // ball
  double radius = 0.0;
  Vec lo, hi;  // box

  static Domain unconstrained() { return Domain{}; }

  static Domain ball(Vec c, double r) {
    if (r < 0) throw std::invalid_argument("ball radius must be >= 0");
    Domain d;
    d.kind = Kind::Ball;
    d.center = std::move(c);
    d.radius = r;
    return d;
  }

  static Domain box(Vec lo, Vec hi) {
    if (lo.size() != hi.size() || (hi - lo).minCoeff() < 0)
      throw std::invalid_argument("box bounds must satisfy lo <= hi");
    Domain d;
    d.kind = Kind::Box;
    d.lo = std::move(lo);
    d.hi = std::move(hi);
    return d;
  }

  bool bounded() const { return kind != Kind::Unconstrained; }

  double diameter() const {
    switch (kind) {
      case Kind::Unconstrained: return kInf;
      case Kind::Ball: return 2.0 * radius;
      case Kind::Box: return (hi - lo).norm();
    }
    return kInf;
  }

  Vec project(const Vec& w) const {
    switch (kind) {
      case Kind::Unconstrained: return w;
      case Kind::Ball: {
        Vec d = w - center;
        double n = d.norm();
        if (n <= radius) return w;
        return center + d * (radius / n);
      }
      case Kind::Box: return w.cwiseMax(lo).cwiseMin(hi);
    }
    return w;
  }

  bool contains(const Vec& w, double tol = 1e-12) const {
    return (w - project(w)).norm() <= tol;
  }
};

inline Vec project(const Domain& dom, const Vec& w) { return dom.project(w); }

// Problem-level constants attached to a loss class.
struct LossMeta {
  std::optional<double> smoothness_L;
  double strong_convexity_mu = 0.0;
  std::optional<double> lipschitz_G;
};

enum class LossKind { Squared, Absolute, Logistic, Huber, Linear };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::Squared: return "squared";
    case LossKind::Absolute: return "absolute";
    case LossKind::Logistic: return "logistic";
    case LossKind::Huber: return "huber";
    case LossKind::Linear: return "linear";
  }
  return "?";
}

// One round's loss l_t: a batch of (feature, target) pairs under a fixed penalty.
// The parameter w of dimension d_feature*d_output is read as a column-major
// (d_output x d_feature) linear map; predictions are W*x.
//
// The Linear kind represents <slope, w> and is only produced by linearize();
// it violates the nonnegativity invariant of the other kinds, tracked by
// nonnegative().
class RoundLoss {
 public:
  RoundLoss() = default;

  RoundLoss(Mat features, Mat targets, LossKind kind, double weight = 1.0,
            double huber_delta = 1.0)
      : features_(std::move(features)),
        targets_(std::move(targets)),
        kind_(kind),
        weight_(weight),
        delta_(huber_delta) {
    if (kind_ == LossKind::Linear)
      throw std::invalid_argument("use RoundLoss::linear for the linear kind");
    if (features_.rows() == 0) throw std::invalid_argument("empty sample batch");
    if (features_.rows() != targets_.rows())
      throw std::invalid_argument("feature/target row mismatch");
    if (weight_ <= 0) throw std::invalid_argument("weight must be > 0");
    if (kind_ == LossKind::Huber && delta_ <= 0)
      throw std::invalid_argument("huber delta must be > 0");
    if (!features_.allFinite() || !targets_.allFinite())
      throw std::domain_error("non-finite sample data");
    sample_weights_ = Vec::Constant(features_.rows(), 1.0 / double(features_.rows()));
  }

  static RoundLoss linear(Vec slope, double weight = 1.0) {
    RoundLoss l;
    l.kind_ = LossKind::Linear;
    l.slope_ = std::move(slope);
    l.weight_ = weight;
    return l;
  }

  LossKind kind() const { return kind_; }
  double weight() const { return weight_; }
  double huber_delta() const { return delta_; }
  const Mat& features() const { return features_; }
  const Mat& targets() const { return targets_; }
  const Vec& slope() const { return slope_; }
  Eigen::Index n_samples() const { return features_.rows(); }
  Eigen::Index d_feature() const {
    return kind_ == LossKind::Linear ? slope_.size() : features_.cols();
  }
  Eigen::Index d_output() const {
    return kind_ == LossKind::Linear ? 1 : targets_.cols();
  }
  Eigen::Index dim() const {
    return kind_ == LossKind::Linear ? slope_.size()
                                     : features_.cols() * targets_.cols();
  }
  bool nonnegative() const { return kind_ != LossKind::Linear; }

  // Per-sample probability weights; default uniform 1/n. Must sum to 1.
  void set_sample_weights(Vec p) {
    if (p.size() != features_.rows() || p.minCoeff() < 0)
      throw std::invalid_argument("bad sample weights");
    double s = p.sum();
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("sample weights must sum to 1");
    sample_weights_ = std::move(p);
  }
  const Vec& sample_weights() const { return sample_weights_; }

  double value(const Vec& w) const {
    check_input(w);
    if (kind_ == LossKind::Linear) return weight_ * slope_.dot(w);
    auto W = as_map(w);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n_samples(); ++i) {
      Vec pred = W * features_.row(i).transpose();
      acc += sample_weights_[i] * sample_value(pred, targets_.row(i).transpose());
    }
    return weight_ * acc;
  }

  Vec gradient(const Vec& w) const {
    check_input(w);
    if (kind_ == LossKind::Linear) return weight_ * slope_;
    auto W = as_map(w);
    Mat G = Mat::Zero(d_output(), features_.cols());
    for (Eigen::Index i = 0; i < n_samples(); ++i) {
      Vec x = features_.row(i).transpose();
      Vec pred = W * x;
      G.noalias() += sample_weights_[i] * sample_residual(pred, targets_.row(i).transpose()) * x.transpose();
    }
    G *= weight_;
    return Eigen::Map<const Vec>(G.data(), G.size());
  }

  // Closed-form least-squares minimizer; Squared kind only. Minimum-norm
  // solution when the feature matrix is rank-deficient.
  Vec least_squares_min() const {
    if (kind_ != LossKind::Squared)
      throw std::logic_error("closed form only for squared losses");
    // Weighted rows: scaling row i by sqrt(p_i) reproduces the weighted sum.
    Mat Xs = features_;
    Mat Ys = targets_;
    for (Eigen::Index i = 0; i < n_samples(); ++i) {
      double s = std::sqrt(sample_weights_[i]);
      Xs.row(i) *= s;
      Ys.row(i) *= s;
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(Xs);
    Mat A = cod.solve(Ys);           // d_feature x d_output
    Mat W = A.transpose();           // d_output x d_feature
    return Eigen::Map<const Vec>(W.data(), W.size());
  }

  // Largest curvature of the quadratic part: lambda_max of the weighted
  // feature second-moment matrix (exact L for Squared, an upper bound for
  // Huber; for Logistic the softmax Hessian contributes at most a factor 1).
  double measured_smoothness() const {
    if (kind_ == LossKind::Linear || kind_ == LossKind::Absolute) return 0.0;
    Mat M = second_moment();
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    double lam = es.eigenvalues().maxCoeff();
    if (kind_ == LossKind::Logistic) lam *= 0.5;
    return weight_ * lam;
  }

  // Smallest curvature; a valid strong-convexity constant for Squared losses.
  double measured_strong_convexity() const {
    if (kind_ != LossKind::Squared) return 0.0;
    Mat M = second_moment();
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    return weight_ * std::max(0.0, es.eigenvalues().minCoeff());
  }

  // Analytic gradient-norm bound, valid everywhere; kinds whose residual is
  // globally bounded (absolute: 1 per coordinate, huber: delta, linear: exact).
  double lipschitz_bound() const {
    if (kind_ == LossKind::Linear) return weight_ * slope_.norm();
    if (kind_ != LossKind::Absolute && kind_ != LossKind::Huber)
      throw std::logic_error("global Lipschitz bound only for absolute/huber/linear kinds");
    double r = kind_ == LossKind::Huber ? delta_ : 1.0;
    double g = 0.0;
    for (Eigen::Index i = 0; i < n_samples(); ++i)
      g += sample_weights_[i] * features_.row(i).norm() * r * std::sqrt(double(d_output()));
    return weight_ * g;
  }

 private:
  Eigen::Map<const Mat> as_map(const Vec& w) const {
    return Eigen::Map<const Mat>(w.data(), d_output(), features_.cols());
  }

  void check_input(const Vec& w) const {
    if (w.size() != dim())
      throw std::invalid_argument("parameter dim " + std::to_string(w.size()) +
                                  " != expected " + std::to_string(dim()));
    require_finite(w, "loss input");
  }

  Mat second_moment() const {
    Mat M = Mat::Zero(features_.cols(), features_.cols());
    for (Eigen::Index i = 0; i < n_samples(); ++i)
      M.noalias() += sample_weights_[i] * features_.row(i).transpose() * features_.row(i);
    return M;
  }

  double sample_value(const Vec& pred, const Vec& y) const {
    switch (kind_) {
      case LossKind::Squared: return 0.5 * (pred - y).squaredNorm();
      case LossKind::Absolute: return (pred - y).lpNorm<1>();
      case LossKind::Huber: {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < pred.size(); ++c) {
          double r = std::abs(pred[c] - y[c]);
          acc += r <= delta_ ? 0.5 * r * r : delta_ * (r - 0.5 * delta_);
        }
        return acc;
      }
      case LossKind::Logistic: {
        double zmax = pred.maxCoeff();
        double lse = zmax + std::log((pred.array() - zmax).exp().sum());
        return lse - y.dot(pred);
      }
      case LossKind::Linear: break;
    }
    return 0.0;
  }

  // d(sample_value)/d(pred)
  Vec sample_residual(const Vec& pred, const Vec& y) const {
    switch (kind_) {
      case LossKind::Squared: return pred - y;
      case LossKind::Absolute: {
        Vec r = pred - y;
        for (Eigen::Index c = 0; c < r.size(); ++c)
          r[c] = r[c] > 0 ? 1.0 : (r[c] < 0 ? -1.0 : 0.0);  // sign(0) = 0
        return r;
      }
      case LossKind::Huber: {
        Vec r = pred - y;
        for (Eigen::Index c = 0; c < r.size(); ++c)
          r[c] = std::clamp(r[c], -delta_, delta_);
        return r;
      }
      case LossKind::Logistic: {
        Vec z = pred.array() - pred.maxCoeff();
        Vec p = z.array().exp();
        p /= p.sum();
        return p - y;
      }
      case LossKind::Linear: break;
    }
    return Vec::Zero(pred.size());
  }

  Mat features_, targets_;
  LossKind kind_ = LossKind::Squared;
  double weight_ = 1.0;
  double delta_ = 1.0;
  Vec slope_;
  Vec sample_weights_;
};

inline double loss_value(const RoundLoss& l, const Vec& w) { return l.value(w); }
inline Vec loss_gradient(const RoundLoss& l, const Vec& w) { return l.gradient(w); }

}  // namespace oilbench
