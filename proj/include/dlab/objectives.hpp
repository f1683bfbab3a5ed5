#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dlab/rng.hpp"

namespace dlab {

// A batch of per-sample vectors (noise directions for the quadratic,
// feature vectors for the MLP), flattened row-major.
struct Batch {
  std::size_t count = 0;
  std::size_t sample_dim = 0;
  std::vector<double> features;  // count * sample_dim
  std::vector<int> labels;       // classification objectives only

  const double* sample(std::size_t i) const {
    return features.data() + i * sample_dim;
  }
};

// Differentiable objective with an exact gradient and seeded sampling.
// Immutable after construction; sample() depends only on the stream key.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual double loss(const std::vector<double>& theta, const Batch& b) const = 0;
  virtual std::vector<double> grad(const std::vector<double>& theta,
                                   const Batch& b) const = 0;
  virtual Batch sample(std::uint64_t stream_key, std::size_t count) const = 0;
  virtual Batch heldout(std::uint64_t stream_key, std::size_t count) const = 0;
};

// f(theta) = 1/2 (theta - theta*)' diag(a) (theta - theta*), with per-sample
// additive noise nu_i' (theta - theta*) so that a batch gradient of B samples
// carries zero-mean noise of scale sigma / sqrt(B).
class NoisyQuadratic final : public Objective {
 public:
  NoisyQuadratic(std::vector<double> curvature, std::vector<double> theta_star,
                 double sigma)
      : curvature_(std::move(curvature)),
        theta_star_(std::move(theta_star)),
        sigma_(sigma) {
    if (curvature_.size() != theta_star_.size() || curvature_.empty()) {
      throw std::invalid_argument("NoisyQuadratic: dimension mismatch");
    }
    for (double a : curvature_) {
      if (a <= 0) throw std::invalid_argument("NoisyQuadratic: curvature <= 0");
    }
  }

  static NoisyQuadratic standard(std::size_t dim, double sigma,
                                 std::uint64_t seed = 17) {
    auto rng = make_rng(stream_key(seed, "quadratic-shape"));
    std::uniform_real_distribution<double> curv(0.5, 3.0);
    std::normal_distribution<double> pos(0.0, 1.0);
    std::vector<double> a(dim), star(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      a[i] = curv(rng);
      star[i] = pos(rng);
    }
    return NoisyQuadratic(std::move(a), std::move(star), sigma);
  }

  std::size_t dim() const override { return curvature_.size(); }

  double exact_loss(const std::vector<double>& theta) const {
    double f = 0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double d = theta[i] - theta_star_[i];
      f += 0.5 * curvature_[i] * d * d;
    }
    return f;
  }

  double loss(const std::vector<double>& theta, const Batch& b) const override {
    check(theta, b);
    double f = exact_loss(theta);
    if (b.count == 0) return f;
    double noise = 0;
    for (std::size_t i = 0; i < b.count; ++i) {
      const double* nu = b.sample(i);
      for (std::size_t j = 0; j < dim(); ++j) {
        noise += nu[j] * (theta[j] - theta_star_[j]);
      }
    }
    return f + noise / static_cast<double>(b.count);
  }

  std::vector<double> grad(const std::vector<double>& theta,
                           const Batch& b) const override {
    check(theta, b);
    std::vector<double> g(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      g[j] = curvature_[j] * (theta[j] - theta_star_[j]);
    }
    if (b.count == 0) return g;
    for (std::size_t i = 0; i < b.count; ++i) {
      const double* nu = b.sample(i);
      for (std::size_t j = 0; j < dim(); ++j) {
        g[j] += nu[j] / static_cast<double>(b.count);
      }
    }
    return g;
  }

  Batch sample(std::uint64_t key, std::size_t count) const override {
    Batch b;
    b.count = count;
    b.sample_dim = dim();
    b.features.resize(count * dim());
    auto rng = make_rng(key);
    std::normal_distribution<double> noise(0.0, sigma_);
    for (double& v : b.features) v = noise(rng);
    return b;
  }

  // Held-out evaluation is noise-free: the eval loss is the exact objective.
  Batch heldout(std::uint64_t, std::size_t count) const override {
    Batch b;
    b.count = count;
    b.sample_dim = dim();
    b.features.assign(count * dim(), 0.0);
    return b;
  }

  const std::vector<double>& optimum() const { return theta_star_; }
  double optimum_value() const { return 0.0; }

 private:
  void check(const std::vector<double>& theta, const Batch& b) const {
    if (theta.size() != dim()) {
      throw std::invalid_argument("NoisyQuadratic: theta dimension mismatch");
    }
    if (b.count > 0 && b.sample_dim != dim()) {
      throw std::invalid_argument("NoisyQuadratic: batch dimension mismatch");
    }
  }

  std::vector<double> curvature_;
  std::vector<double> theta_star_;
  double sigma_;
};

// Two-layer perceptron with tanh hidden units and softmax cross-entropy on a
// synthetic Gaussian-mixture classification stream. Backprop is written out
// by hand; finite_diff_check() is the oracle for it.
class TinyMLP final : public Objective {
 public:
  TinyMLP(std::size_t input_dim, std::size_t hidden, std::size_t classes,
          std::uint64_t mixture_seed = 29)
      : in_(input_dim), hid_(hidden), cls_(classes) {
    auto rng = make_rng(stream_key(mixture_seed, "mixture-means"));
    std::normal_distribution<double> n01(0.0, 1.0);
    means_.resize(cls_ * in_);
    for (double& v : means_) v = 2.0 * n01(rng);
  }

  std::size_t dim() const override {
    return hid_ * in_ + hid_ + cls_ * hid_ + cls_;
  }

  double loss(const std::vector<double>& theta, const Batch& b) const override {
    return forward(theta, b, nullptr);
  }

  std::vector<double> grad(const std::vector<double>& theta,
                           const Batch& b) const override {
    std::vector<double> g(dim(), 0.0);
    forward(theta, b, &g);
    return g;
  }

  Batch sample(std::uint64_t key, std::size_t count) const override {
    Batch b;
    b.count = count;
    b.sample_dim = in_;
    b.features.resize(count * in_);
    b.labels.resize(count);
    auto rng = make_rng(key);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(cls_) - 1);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (std::size_t i = 0; i < count; ++i) {
      int k = pick(rng);
      b.labels[i] = k;
      for (std::size_t j = 0; j < in_; ++j) {
        b.features[i * in_ + j] = means_[k * in_ + j] + jitter(rng);
      }
    }
    return b;
  }

  Batch heldout(std::uint64_t key, std::size_t count) const override {
    return sample(mix(key, 0xe7a1u), count);
  }

 private:
  // Parameter layout: [W1 (hid x in) | b1 (hid) | W2 (cls x hid) | b2 (cls)]
  double forward(const std::vector<double>& theta, const Batch& b,
                 std::vector<double>* g) const {
    if (theta.size() != dim()) {
      throw std::invalid_argument("TinyMLP: theta dimension mismatch");
    }
    if (b.count == 0) return 0.0;
    if (b.sample_dim != in_ || b.labels.size() != b.count) {
      throw std::invalid_argument("TinyMLP: malformed batch");
    }
    const double* w1 = theta.data();
    const double* b1 = w1 + hid_ * in_;
    const double* w2 = b1 + hid_;
    const double* b2 = w2 + cls_ * hid_;
    double* gw1 = g ? g->data() : nullptr;
    double* gb1 = g ? gw1 + hid_ * in_ : nullptr;
    double* gw2 = g ? gb1 + hid_ : nullptr;
    double* gb2 = g ? gw2 + cls_ * hid_ : nullptr;

    const double inv_n = 1.0 / static_cast<double>(b.count);
    std::vector<double> h(hid_), logits(cls_), p(cls_), dh(hid_);
    double total = 0;
    for (std::size_t i = 0; i < b.count; ++i) {
      const double* x = b.sample(i);
      for (std::size_t u = 0; u < hid_; ++u) {
        double z = b1[u];
        for (std::size_t j = 0; j < in_; ++j) z += w1[u * in_ + j] * x[j];
        h[u] = std::tanh(z);
      }
      double zmax = -1e300;
      for (std::size_t c = 0; c < cls_; ++c) {
        double z = b2[c];
        for (std::size_t u = 0; u < hid_; ++u) z += w2[c * hid_ + u] * h[u];
        logits[c] = z;
        zmax = std::max(zmax, z);
      }
      double denom = 0;
      for (std::size_t c = 0; c < cls_; ++c) {
        p[c] = std::exp(logits[c] - zmax);
        denom += p[c];
      }
      for (std::size_t c = 0; c < cls_; ++c) p[c] /= denom;
      int y = b.labels[i];
      total += -std::log(std::max(p[y], 1e-300));
      if (!g) continue;
      // dL/dlogits = p - onehot(y); averaged over the batch.
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t c = 0; c < cls_; ++c) {
        double dz = (p[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_n;
        gb2[c] += dz;
        for (std::size_t u = 0; u < hid_; ++u) {
          gw2[c * hid_ + u] += dz * h[u];
          dh[u] += dz * w2[c * hid_ + u];
        }
      }
      for (std::size_t u = 0; u < hid_; ++u) {
        double dz = dh[u] * (1.0 - h[u] * h[u]);
        gb1[u] += dz;
        for (std::size_t j = 0; j < in_; ++j) gw1[u * in_ + j] += dz * x[j];
      }
    }
    return total * inv_n;
  }

  std::size_t in_, hid_, cls_;
  std::vector<double> means_;
};

// Central-difference check of the analytic gradient; returns the max
// per-coordinate relative error.
inline double finite_diff_check(const Objective& obj,
                                const std::vector<double>& theta,
                                const Batch& batch, double h) {
  if (h <= 0) throw std::invalid_argument("finite_diff_check: h must be > 0");
  const auto analytic = obj.grad(theta, batch);
  std::vector<double> probe = theta;
  double worst = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    double fp = obj.loss(probe, batch);
    probe[i] = theta[i] - h;
    double fm = obj.loss(probe, batch);
    probe[i] = theta[i];
    double fd = (fp - fm) / (2.0 * h);
    double denom = std::max({1e-6, std::abs(fd), std::abs(analytic[i])});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace dlab
