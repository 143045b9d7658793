/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#pragma once

// Multinomial logistic regression on feature matrices.
//
// The probe minimizes mean cross-entropy plus (l2/2) |W|_F^2 (bias
// unregularized) with a full-batch limited-memory quasi-Newton method and a
// strong-Wolfe line search.  Everything runs in double precision over a fixed
// example order with fused ascending-index reductions, so identical inputs
// and settings give bit-identical models.  With l2 > 0 the objective is
// strictly convex, so the optimum itself does not depend on the start point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nrf/errors.hpp"
#include "nrf/features.hpp"
#include "nrf/gemm.hpp"

namespace nrf {

/// Row-major float matrix view, the input shape every probe call accepts.
/// Converts from FeatureMatrix; raw pixel matrices can be wrapped directly.
struct FeatureView {
  const float* data = nullptr;
  std::int64_t num_examples = 0;
  std::int64_t num_features = 0;

  FeatureView() = default;
  FeatureView(const float* d, std::int64_t rows, std::int64_t cols)
      : data(d), num_examples(rows), num_features(cols) {}
  FeatureView(const FeatureMatrix& fm)  // NOLINT: implicit by design
      : data(fm.values.data()), num_examples(fm.num_examples), num_features(fm.num_features) {}

  const float* row(std::int64_t i) const { return data + i * num_features; }
};

struct OptSettings {
  int max_iterations = 500;
  /// Stop when the max-abs gradient component falls at or below this.
  double tolerance = 1e-6;
  /// Quasi-Newton memory (stored curvature pairs).
  int history = 10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 40;
  /// Standardize features to zero mean / unit variance before training.
  /// Off by default so results reflect the features as extracted.
  bool standardize = false;
};

struct ProbeModel {
  int k_classes = 0;
  std::int64_t n_features = 0;
  double l2 = 0.0;
  std::vector<double> w;  // k_classes x n_features, row-major
  std::vector<double> b;  // k_classes
  /// Per-feature affine transform applied before the linear map; empty when
  /// the model was trained without standardization.
  std::vector<double> feat_mean;
  std::vector<double> feat_inv_std;
  // Training diagnostics.
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  int iterations = 0;
};

namespace detail {

/// Dot of a double row with a float vector, ascending index, fused.
inline double dot_wd(const double* w, const float* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc = std::fma(w[i], static_cast<double>(x[i]), acc);
  }
  return acc;
}

/// Regularized mean cross-entropy and its gradient at theta = [W | b].
struct ProbeObjective {
  const float* x;
  const int* labels;
  std::int64_t num;
  std::int64_t n;
  int k;
  double l2;

  std::size_t dim() const {
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(k);
  }

  double operator()(const std::vector<double>& theta, std::vector<double>& grad) const {
    const double* w = theta.data();
    const double* b = theta.data() + static_cast<std::size_t>(k) * n;
    std::fill(grad.begin(), grad.end(), 0.0);
    double* gw = grad.data();
    double* gb = grad.data() + static_cast<std::size_t>(k) * n;

    std::vector<double> z(static_cast<std::size_t>(k));
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(num);
    for (std::int64_t i = 0; i < num; ++i) {
      const float* xi = x + i * n;
      double zmax = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        z[static_cast<std::size_t>(c)] =
            dot_wd(w + static_cast<std::size_t>(c) * n, xi, static_cast<std::size_t>(n)) +
            b[c];
        zmax = std::max(zmax, z[static_cast<std::size_t>(c)]);
      }
      double sum_exp = 0.0;
      for (int c = 0; c < k; ++c) {
        z[static_cast<std::size_t>(c)] = std::exp(z[static_cast<std::size_t>(c)] - zmax);
        sum_exp += z[static_cast<std::size_t>(c)];
      }
      const int y = labels[i];
      loss -= std::log(z[static_cast<std::size_t>(y)] / sum_exp);
      const double inv_sum = 1.0 / sum_exp;
      for (int c = 0; c < k; ++c) {
        const double p = z[static_cast<std::size_t>(c)] * inv_sum;
        const double g = (p - (c == y ? 1.0 : 0.0)) * inv_n;
        gb[c] += g;
        axpy_f64(gw + static_cast<std::size_t>(c) * n, g, xi, static_cast<std::size_t>(n));
      }
    }
    loss *= inv_n;

    const std::size_t wlen = static_cast<std::size_t>(k) * static_cast<std::size_t>(n);
    double reg = 0.0;
    for (std::size_t j = 0; j < wlen; ++j) {
      reg = std::fma(w[j], w[j], reg);
      gw[j] = std::fma(l2, w[j], gw[j]);
    }
    loss += 0.5 * l2 * reg;
    if (!std::isfinite(loss)) throw numeric_error("probe loss is not finite");
    return loss;
  }
};

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

/// Strong-Wolfe line search (bracket then bisection zoom).  Returns the
/// accepted step, or 0 when no acceptable step exists at this precision.
template <typename F>
double strong_wolfe(const F& eval, const std::vector<double>& theta0,
                    const std::vector<double>& dir, double f0, double dphi0, double alpha_init,
                    const OptSettings& opt, std::vector<double>& theta_out,
                    std::vector<double>& grad_out, double& f_out) {
  const std::size_t dim = theta0.size();
  auto phi_at = [&](double alpha, double& dphi) {
    for (std::size_t i = 0; i < dim; ++i) {
      theta_out[i] = std::fma(alpha, dir[i], theta0[i]);
    }
    const double f = eval(theta_out, grad_out);
    dphi = dot_d(grad_out.data(), dir.data(), dim);
    return f;
  };

  auto zoom = [&](double lo, double f_lo, double hi) {
    for (int it = 0; it < opt.max_line_search; ++it) {
      const double alpha = 0.5 * (lo + hi);
      double dphi;
      const double f = phi_at(alpha, dphi);
      if (f > f0 + opt.wolfe_c1 * alpha * dphi0 || f >= f_lo) {
        hi = alpha;
      } else {
        if (std::fabs(dphi) <= -opt.wolfe_c2 * dphi0) {
          f_out = f;
          return alpha;
        }
        if (dphi * (hi - lo) >= 0.0) hi = lo;
        lo = alpha;
        f_lo = f;
      }
      if (std::fabs(hi - lo) < 1e-16 * std::max(1.0, std::fabs(lo))) break;
    }
    // Precision floor: settle for the best sufficient-decrease point.
    double dphi;
    f_out = phi_at(lo, dphi);
    return lo > 0.0 && f_out < f0 ? lo : 0.0;
  };

  double alpha_prev = 0.0;
  double f_prev = f0;
  double alpha = alpha_init;
  for (int it = 0; it < opt.max_line_search; ++it) {
    double dphi;
    const double f = phi_at(alpha, dphi);
    if (f > f0 + opt.wolfe_c1 * alpha * dphi0 || (it > 0 && f >= f_prev)) {
      return zoom(alpha_prev, f_prev, alpha);
    }
    if (std::fabs(dphi) <= -opt.wolfe_c2 * dphi0) {
      f_out = f;
      return alpha;
    }
    if (dphi >= 0.0) {
      return zoom(alpha, f, alpha_prev);
    }
    alpha_prev = alpha;
    f_prev = f;
    alpha *= 2.0;
  }
  return 0.0;
}

/// Limited-memory BFGS driver; returns iterations used.
template <typename F>
int lbfgs_minimize(const F& eval, std::vector<double>& theta, const OptSettings& opt,
                   double& final_loss, double& final_grad_norm) {
  const std::size_t dim = theta.size();
  std::vector<double> grad(dim), theta_new(dim), grad_new(dim), dir(dim);
  double f = eval(theta, grad);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  int iters = 0;
  while (iters < opt.max_iterations && inf_norm(grad) > opt.tolerance) {
    // Two-loop recursion for dir = -(H g).
    dir = grad;
    std::vector<double> alpha_coef(s_hist.size());
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      const double a = rho_hist[h] * dot_d(s_hist[h].data(), dir.data(), dim);
      alpha_coef[h] = a;
      for (std::size_t i = 0; i < dim; ++i) dir[i] -= a * y_hist[h][i];
    }
    if (!s_hist.empty()) {
      const auto& s = s_hist.back();
      const auto& y = y_hist.back();
      const double gamma = dot_d(s.data(), y.data(), dim) / dot_d(y.data(), y.data(), dim);
      for (double& v : dir) v *= gamma;
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double beta = rho_hist[h] * dot_d(y_hist[h].data(), dir.data(), dim);
      for (std::size_t i = 0; i < dim; ++i) {
        dir[i] += (alpha_coef[h] - beta) * s_hist[h][i];
      }
    }
    for (double& v : dir) v = -v;

    double dphi0 = dot_d(dir.data(), grad.data(), dim);
    if (dphi0 >= 0.0) {
      // Curvature memory went stale; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -grad[i];
      dphi0 = -dot_d(grad.data(), grad.data(), dim);
    }

    const double gnorm2 = std::sqrt(dot_d(grad.data(), grad.data(), dim));
    const double alpha0 = iters == 0 ? std::min(1.0, 1.0 / std::max(gnorm2, 1e-12)) : 1.0;
    double f_new = f;
    const double alpha =
        strong_wolfe(eval, theta, dir, f, dphi0, alpha0, opt, theta_new, grad_new, f_new);
    if (alpha <= 0.0) break;  // no progress possible at this precision

    std::vector<double> s(dim), y(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      s[i] = theta_new[i] - theta[i];
      y[i] = grad_new[i] - grad[i];
    }
    const double sy = dot_d(s.data(), y.data(), dim);
    if (sy > 1e-12) {
      if (static_cast<int>(s_hist.size()) == opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    theta.swap(theta_new);
    grad.swap(grad_new);
    f = f_new;
    ++iters;
  }
  final_loss = f;
  final_grad_norm = inf_norm(grad);
  return iters;
}

inline void check_labels(const std::vector<int>& labels, std::int64_t num, int k) {
  if (static_cast<std::int64_t>(labels.size()) != num) {
    throw shape_error("label count " + std::to_string(labels.size()) + " vs " +
                      std::to_string(num) + " examples");
  }
  for (int y : labels) {
    if (y < 0 || y >= k) {
      throw config_error("label " + std::to_string(y) + " outside [0, " + std::to_string(k) +
                         ")");
    }
  }
}

}  // namespace detail

/// Fit the regularized softmax probe.  k_classes = 0 infers max(label) + 1.
inline ProbeModel train_probe(const FeatureView& features, const std::vector<int>& labels,
                              double l2, const OptSettings& opt = {}, int k_classes = 0) {
  if (l2 < 0.0) throw config_error("l2 must be nonnegative");
  if (opt.tolerance <= 0.0) throw config_error("gradient tolerance must be positive");
  int k = k_classes;
  if (k == 0) {
    for (int y : labels) k = std::max(k, y + 1);
  }
  if (k < 2) throw config_error("probe needs at least 2 classes");
  detail::check_labels(labels, features.num_examples, k);
  if (features.num_examples < k) {
    throw config_error("need at least one example per class: " +
                       std::to_string(features.num_examples) + " examples for " +
                       std::to_string(k) + " classes");
  }

  const std::int64_t n = features.num_features;
  ProbeModel model;
  model.k_classes = k;
  model.n_features = n;
  model.l2 = l2;

  const float* x = features.data;
  std::vector<float> standardized;
  if (opt.standardize) {
    model.feat_mean.assign(static_cast<std::size_t>(n), 0.0);
    model.feat_inv_std.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> var(static_cast<std::size_t>(n), 0.0);
    const double inv_num = 1.0 / static_cast<double>(features.num_examples);
    for (std::int64_t i = 0; i < features.num_examples; ++i) {
      const float* xi = features.row(i);
      for (std::int64_t j = 0; j < n; ++j) {
        model.feat_mean[static_cast<std::size_t>(j)] += xi[j];
      }
    }
    for (double& m : model.feat_mean) m *= inv_num;
    for (std::int64_t i = 0; i < features.num_examples; ++i) {
      const float* xi = features.row(i);
      for (std::int64_t j = 0; j < n; ++j) {
        const double d = xi[j] - model.feat_mean[static_cast<std::size_t>(j)];
        var[static_cast<std::size_t>(j)] = std::fma(d, d, var[static_cast<std::size_t>(j)]);
      }
    }
    for (std::int64_t j = 0; j < n; ++j) {
      const double sd = std::sqrt(var[static_cast<std::size_t>(j)] * inv_num);
      model.feat_inv_std[static_cast<std::size_t>(j)] = 1.0 / std::max(sd, 1e-8);
    }
    standardized.resize(static_cast<std::size_t>(features.num_examples) *
                        static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < features.num_examples; ++i) {
      const float* xi = features.row(i);
      float* out = standardized.data() + i * n;
      for (std::int64_t j = 0; j < n; ++j) {
        out[j] = static_cast<float>((xi[j] - model.feat_mean[static_cast<std::size_t>(j)]) *
                                    model.feat_inv_std[static_cast<std::size_t>(j)]);
      }
    }
    x = standardized.data();
  }

  detail::ProbeObjective obj{x, labels.data(), features.num_examples, n, k, l2};
  std::vector<double> theta(obj.dim(), 0.0);
  model.iterations =
      detail::lbfgs_minimize(obj, theta, opt, model.final_loss, model.final_grad_norm);
  model.w.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(
                                                    static_cast<std::size_t>(k) * n));
  model.b.assign(theta.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * n),
                 theta.end());
  return model;
}

/// Softmax(W x + b) per row; every row sums to 1 within round-off.
inline std::vector<double> predict_proba(const ProbeModel& model, const FeatureView& features) {
  if (features.num_features != model.n_features) {
    throw shape_error("feature dim " + std::to_string(features.num_features) +
                      " does not match probe dim " + std::to_string(model.n_features));
  }
  const std::int64_t num = features.num_examples;
  const std::int64_t n = model.n_features;
  const int k = model.k_classes;
  const bool standardized = !model.feat_mean.empty();
  std::vector<double> proba(static_cast<std::size_t>(num) * k);
  std::vector<double> z(static_cast<std::size_t>(k));
  std::vector<float> xbuf;
  if (standardized) xbuf.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < num; ++i) {
    const float* xi = features.row(i);
    if (standardized) {
      for (std::int64_t j = 0; j < n; ++j) {
        xbuf[static_cast<std::size_t>(j)] = static_cast<float>(
            (xi[j] - model.feat_mean[static_cast<std::size_t>(j)]) *
            model.feat_inv_std[static_cast<std::size_t>(j)]);
      }
      xi = xbuf.data();
    }
    double zmax = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      z[static_cast<std::size_t>(c)] =
          detail::dot_wd(model.w.data() + static_cast<std::size_t>(c) * n, xi,
                         static_cast<std::size_t>(n)) +
          model.b[static_cast<std::size_t>(c)];
      zmax = std::max(zmax, z[static_cast<std::size_t>(c)]);
    }
    double sum_exp = 0.0;
    for (int c = 0; c < k; ++c) {
      z[static_cast<std::size_t>(c)] = std::exp(z[static_cast<std::size_t>(c)] - zmax);
      sum_exp += z[static_cast<std::size_t>(c)];
    }
    const double inv = 1.0 / sum_exp;
    for (int c = 0; c < k; ++c) {
      proba[static_cast<std::size_t>(i) * k + c] = z[static_cast<std::size_t>(c)] * inv;
    }
  }
  return proba;
}

/// Fraction of rows whose argmax probability matches the label; argmax ties
/// resolve to the lowest class index.
inline double accuracy(const ProbeModel& model, const FeatureView& features,
                       const std::vector<int>& labels) {
  detail::check_labels(labels, features.num_examples, model.k_classes);
  const std::vector<double> proba = predict_proba(model, features);
  const int k = model.k_classes;
  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < features.num_examples; ++i) {
    const double* row = proba.data() + static_cast<std::size_t>(i) * k;
    int arg = 0;
    for (int c = 1; c < k; ++c) {
      if (row[c] > row[arg]) arg = c;
    }
    if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(features.num_examples);
}

/// Grid search over l2; best validation accuracy wins, accuracy ties go to
/// the larger l2 (stronger regularization).
inline std::pair<double, ProbeModel> tune_l2(const FeatureView& train_features,
                                             const std::vector<int>& train_labels,
                                             const FeatureView& val_features,
                                             const std::vector<int>& val_labels,
                                             const std::vector<double>& grid,
                                             const OptSettings& opt = {}, int k_classes = 0) {
  if (grid.empty()) throw config_error("tune_l2: empty grid");
  double best_l2 = 0.0;
  double best_acc = -1.0;
  ProbeModel best_model;
  for (double l2 : grid) {
    ProbeModel m = train_probe(train_features, train_labels, l2, opt, k_classes);
    const double acc = accuracy(m, val_features, val_labels);
    if (acc > best_acc || (acc == best_acc && l2 > best_l2)) {
      best_acc = acc;
      best_l2 = l2;
      best_model = std::move(m);
    }
  }
  return {best_l2, std::move(best_model)};
}

/// Default tuning grid: {1e-6, 1e-5, ..., 1e0}.
inline std::vector<double> default_l2_grid() {
  return {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0};
}

/// Pairwise cosine similarity of class weight rows.  Diagonal is exactly 1.
inline std::vector<double> class_cosine(const ProbeModel& model) {
  const int k = model.k_classes;
  const std::int64_t n = model.n_features;
  std::vector<double> norms(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double* wi = model.w.data() + static_cast<std::size_t>(i) * n;
    const double sq = dot_d(wi, wi, static_cast<std::size_t>(n));
    if (sq == 0.0) {
      throw cosine_error("class " + std::to_string(i) +
                         " has a zero-norm weight row; cosine undefined");
    }
    norms[static_cast<std::size_t>(i)] = std::sqrt(sq);
  }
  std::vector<double> c(static_cast<std::size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    c[static_cast<std::size_t>(i) * k + i] = 1.0;
    const double* wi = model.w.data() + static_cast<std::size_t>(i) * n;
    for (int j = i + 1; j < k; ++j) {
      const double* wj = model.w.data() + static_cast<std::size_t>(j) * n;
      const double v = dot_d(wi, wj, static_cast<std::size_t>(n)) /
                       (norms[static_cast<std::size_t>(i)] * norms[static_cast<std::size_t>(j)]);
      c[static_cast<std::size_t>(i) * k + j] = v;
      c[static_cast<std::size_t>(j) * k + i] = v;
    }
  }
  return c;
}

/// Most and least similar classes to j by cosine, excluding j itself.
/// Similarity ties resolve by class index.
inline std::pair<std::vector<int>, std::vector<int>> top_bottom_classes(
    const std::vector<double>& cosine, int k_classes, int j, int count) {
  if (static_cast<std::size_t>(k_classes) * k_classes != cosine.size()) {
    throw shape_error("cosine matrix size does not match k_classes");
  }
  if (j < 0 || j >= k_classes) throw config_error("class index out of range");
  if (count < 0 || count >= k_classes) {
    throw config_error("count " + std::to_string(count) + " out of range for " +
                       std::to_string(k_classes) + " classes");
  }
  std::vector<int> others;
  others.reserve(static_cast<std::size_t>(k_classes) - 1);
  for (int c = 0; c < k_classes; ++c) {
    if (c != j) others.push_back(c);
  }
  const double* row = cosine.data() + static_cast<std::size_t>(j) * k_classes;
  std::vector<int> top = others;
  std::sort(top.begin(), top.end(), [&](int a, int b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return a < b;
  });
  std::vector<int> bottom = others;
  std::sort(bottom.begin(), bottom.end(), [&](int a, int b) {
    if (row[a] != row[b]) return row[a] < row[b];
    return a < b;
  });
  top.resize(static_cast<std::size_t>(count));
  bottom.resize(static_cast<std::size_t>(count));
  return {top, bottom};
}

}  // namespace nrf
