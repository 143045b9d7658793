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
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstddef>
#include <vector>

#include "nrf/nrf.hpp"

namespace {

// Gaussian class clusters in feature space: class c centered at
// separation * e_c over the first k dimensions.
struct ToyData {
  std::vector<float> x;
  std::vector<int> labels;
  std::int64_t num = 0;
  std::int64_t dim = 0;

  nrf::FeatureView view() const { return {x.data(), num, dim}; }
};

ToyData make_clusters(int k, int per_class, std::int64_t dim, double separation,
                      std::uint64_t stream_index) {
  auto stream = nrf::derive_stream(91, stream_index);
  ToyData d;
  d.num = static_cast<std::int64_t>(k) * per_class;
  d.dim = dim;
  d.x.resize(static_cast<std::size_t>(d.num) * dim);
  d.labels.resize(static_cast<std::size_t>(d.num));
  for (int c = 0; c < k; ++c) {
    for (int e = 0; e < per_class; ++e) {
      const std::int64_t row = static_cast<std::int64_t>(c) * per_class + e;
      d.labels[static_cast<std::size_t>(row)] = c;
      for (std::int64_t j = 0; j < dim; ++j) {
        double v = stream.normal();
        if (j == c % dim) v += separation;
        d.x[static_cast<std::size_t>(row * dim + j)] = static_cast<float>(v);
      }
    }
  }
  return d;
}

}  // namespace

TEST_CASE("objective gradient matches central finite differences", "[probe]") {
  const ToyData d = make_clusters(3, 6, 5, 1.0, 0);
  nrf::detail::ProbeObjective obj{d.x.data(), d.labels.data(), d.num, d.dim, 3, 1e-2};
  const std::size_t dim = obj.dim();

  std::vector<double> theta(dim);
  auto stream = nrf::derive_stream(91, 99);
  for (auto& t : theta) t = 0.3 * stream.normal();

  std::vector<double> grad(dim);
  obj(theta, grad);

  std::vector<double> scratch(dim);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    std::vector<double> tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (obj(tp, scratch) - obj(tm, scratch)) / (2.0 * h);
    worst = std::max(worst, std::fabs(fd - grad[i]) / std::max(1.0, std::fabs(grad[i])));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("separable clusters train to perfect accuracy", "[probe]") {
  const ToyData d = make_clusters(3, 20, 5, 8.0, 1);
  const nrf::ProbeModel model = nrf::train_probe(d.view(), d.labels, 1e-6);
  CHECK(model.k_classes == 3);
  CHECK(nrf::accuracy(model, d.view(), d.labels) == 1.0);
  CHECK(model.final_grad_norm <= 1e-6);
  CHECK(model.iterations > 0);
}

TEST_CASE("labels uncorrelated with features land near chance", "[probe]") {
  // 10 classes, pure-noise features: train accuracy may exceed chance via
  // memorization, but held-out accuracy cannot.
  const ToyData train = make_clusters(10, 30, 16, 0.0, 2);
  const ToyData test = make_clusters(10, 30, 16, 0.0, 3);
  const nrf::ProbeModel model = nrf::train_probe(train.view(), train.labels, 1e-2);
  const double acc = nrf::accuracy(model, test.view(), test.labels);
  CHECK(acc >= 0.05);
  CHECK(acc <= 0.15);
}

TEST_CASE("training lands at a local-perturbation-proof minimum", "[probe]") {
  // The objective is convex, so the trained point must beat every nearby
  // point; 20 random directions at radius 1e-2 certify it.
  const ToyData d = make_clusters(4, 15, 6, 2.0, 4);
  const double l2 = 1e-3;
  const nrf::ProbeModel model = nrf::train_probe(d.view(), d.labels, l2);

  nrf::detail::ProbeObjective obj{d.x.data(), d.labels.data(), d.num, d.dim, 4, l2};
  std::vector<double> theta(obj.dim());
  for (int c = 0; c < 4; ++c) {
    for (std::int64_t j = 0; j < d.dim; ++j) {
      theta[static_cast<std::size_t>(c) * d.dim + j] =
          model.w[static_cast<std::size_t>(c) * d.dim + j];
    }
    theta[static_cast<std::size_t>(4) * d.dim + c] = model.b[static_cast<std::size_t>(c)];
  }
  std::vector<double> grad(obj.dim());
  const double f_star = obj(theta, grad);
  CHECK(f_star == Catch::Approx(model.final_loss).epsilon(1e-12));

  auto stream = nrf::derive_stream(91, 100);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> delta(obj.dim());
    double norm = 0.0;
    for (auto& v : delta) {
      v = stream.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    std::vector<double> perturbed = theta;
    for (std::size_t i = 0; i < delta.size(); ++i) {
      perturbed[i] += delta[i] / norm * 1e-2;
    }
    REQUIRE(obj(perturbed, grad) >= f_star - 1e-10);
  }
}

TEST_CASE("training is deterministic", "[probe]") {
  const ToyData d = make_clusters(3, 12, 5, 2.0, 5);
  const nrf::ProbeModel a = nrf::train_probe(d.view(), d.labels, 1e-3);
  const nrf::ProbeModel b = nrf::train_probe(d.view(), d.labels, 1e-3);
  REQUIRE(a.w == b.w);
  REQUIRE(a.b == b.b);
  REQUIRE(a.final_loss == b.final_loss);
}

TEST_CASE("probabilities form a simplex row by row", "[probe]") {
  const ToyData d = make_clusters(3, 10, 5, 1.5, 6);
  const nrf::ProbeModel model = nrf::train_probe(d.view(), d.labels, 1e-4);
  const std::vector<double> proba = nrf::predict_proba(model, d.view());
  for (std::int64_t i = 0; i < d.num; ++i) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double p = proba[static_cast<std::size_t>(i) * 3 + c];
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 1.0);
      sum += p;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("an untrained model predicts the uniform distribution", "[probe]") {
  nrf::ProbeModel model;
  model.k_classes = 4;
  model.n_features = 3;
  model.w.assign(12, 0.0);
  model.b.assign(4, 0.0);
  const std::vector<float> x = {1.0f, -2.0f, 0.5f};
  const std::vector<double> proba = nrf::predict_proba(model, {x.data(), 1, 3});
  for (int c = 0; c < 4; ++c) {
    REQUIRE(proba[static_cast<std::size_t>(c)] == Catch::Approx(0.25).margin(1e-12));
  }
  // All-tie argmax resolves to the lowest class index.
  const double acc0 = nrf::accuracy(model, {x.data(), 1, 3}, {0});
  const double acc1 = nrf::accuracy(model, {x.data(), 1, 3}, {1});
  CHECK(acc0 == 1.0);
  CHECK(acc1 == 0.0);
}

TEST_CASE("softmax is invariant to uniform logit shifts", "[probe]") {
  nrf::ProbeModel model;
  model.k_classes = 3;
  model.n_features = 2;
  model.w = {0.5, -1.0, 2.0, 0.25, -0.75, 1.5};
  model.b = {0.1, -0.2, 0.3};
  nrf::ProbeModel shifted = model;
  for (auto& b : shifted.b) b += 1000.0;
  const std::vector<float> x = {0.7f, -0.3f};
  const auto p = nrf::predict_proba(model, {x.data(), 1, 2});
  const auto q = nrf::predict_proba(shifted, {x.data(), 1, 2});
  for (int c = 0; c < 3; ++c) {
    REQUIRE(p[static_cast<std::size_t>(c)] ==
            Catch::Approx(q[static_cast<std::size_t>(c)]).margin(1e-12));
  }
}

TEST_CASE("extreme logits stay finite", "[probe]") {
  nrf::ProbeModel model;
  model.k_classes = 2;
  model.n_features = 1;
  model.w = {500.0, -500.0};
  model.b = {0.0, 0.0};
  const std::vector<float> x = {10.0f};
  const auto p = nrf::predict_proba(model, {x.data(), 1, 1});
  REQUIRE(std::isfinite(p[0]));
  REQUIRE(std::isfinite(p[1]));
  CHECK(p[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(p[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("stronger ridge shrinks the weights", "[probe]") {
  const ToyData d = make_clusters(3, 15, 5, 2.0, 7);
  const nrf::ProbeModel weak = nrf::train_probe(d.view(), d.labels, 1e-6);
  const nrf::ProbeModel strong = nrf::train_probe(d.view(), d.labels, 1e3);
  const auto fro = [](const nrf::ProbeModel& m) {
    return std::sqrt(nrf::dot_d(m.w.data(), m.w.data(), m.w.size()));
  };
  CHECK(fro(strong) < 1e-3);
  CHECK(fro(weak) > 10.0 * fro(strong));
}

TEST_CASE("ridge grid tuning prefers the larger tied parameter", "[probe]") {
  // Trivially separable validation data: every l2 below some point scores
  // 1.0, so the tie must resolve upward.
  const ToyData train = make_clusters(3, 20, 5, 10.0, 8);
  const ToyData val = make_clusters(3, 10, 5, 10.0, 9);
  const std::vector<double> grid = {1e-6, 1e-5, 1e-4};
  const auto [best_l2, model] = nrf::tune_l2(train.view(), train.labels, val.view(), val.labels,
                                             grid);
  CHECK(best_l2 == 1e-4);
  CHECK(model.l2 == 1e-4);
  CHECK(nrf::accuracy(model, val.view(), val.labels) == 1.0);

  CHECK_THROWS_AS(nrf::tune_l2(train.view(), train.labels, val.view(), val.labels, {}),
                  nrf::config_error);
}

TEST_CASE("standardization is an internal reparameterization", "[probe]") {
  // Shift and scale features wildly; a standardizing probe must still
  // separate the classes, and its model records the transform.
  ToyData d = make_clusters(3, 20, 5, 6.0, 10);
  for (std::int64_t i = 0; i < d.num; ++i) {
    for (std::int64_t j = 0; j < d.dim; ++j) {
      auto& v = d.x[static_cast<std::size_t>(i * d.dim + j)];
      v = v * static_cast<float>(j + 1) * 50.0f + 300.0f;
    }
  }
  nrf::OptSettings opt;
  opt.standardize = true;
  const nrf::ProbeModel model = nrf::train_probe(d.view(), d.labels, 1e-6, opt);
  REQUIRE(model.feat_mean.size() == 5);
  REQUIRE(model.feat_inv_std.size() == 5);
  CHECK(nrf::accuracy(model, d.view(), d.labels) == 1.0);

  const nrf::ProbeModel plain = nrf::train_probe(d.view(), d.labels, 1e-6);
  CHECK(plain.feat_mean.empty());
}

TEST_CASE("label and shape validation", "[probe]") {
  const ToyData d = make_clusters(3, 5, 4, 2.0, 11);
  std::vector<int> bad = d.labels;
  bad[0] = 7;
  CHECK_THROWS_AS(nrf::train_probe(d.view(), bad, 1e-3, {}, 3), nrf::config_error);
  bad[0] = -1;
  CHECK_THROWS_AS(nrf::train_probe(d.view(), bad, 1e-3, {}, 3), nrf::config_error);
  CHECK_THROWS_AS(nrf::train_probe(d.view(), d.labels, -1.0), nrf::config_error);
  std::vector<int> short_labels(d.labels.begin(), d.labels.end() - 1);
  CHECK_THROWS_AS(nrf::train_probe(d.view(), short_labels, 1e-3), nrf::shape_error);
}

TEST_CASE("class cosine matrix has unit diagonal and symmetric entries", "[probe]") {
  nrf::ProbeModel model;
  model.k_classes = 3;
  model.n_features = 2;
  const double r = 1.0 / std::sqrt(2.0);
  model.w = {1.0, 0.0, 0.0, 1.0, r, r};
  model.b = {0.0, 0.0, 0.0};
  const std::vector<double> cos = nrf::class_cosine(model);
  CHECK(cos[0] == 1.0);
  CHECK(cos[4] == 1.0);
  CHECK(cos[8] == 1.0);
  CHECK(cos[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(cos[2] == Catch::Approx(r).epsilon(1e-12));
  CHECK(cos[5] == Catch::Approx(r).epsilon(1e-12));
  CHECK(cos[1] == cos[3]);
  CHECK(cos[2] == cos[6]);

  nrf::ProbeModel degenerate = model;
  degenerate.w[4] = 0.0;
  degenerate.w[5] = 0.0;
  auto broken = degenerate;
  broken.w[2] = 0.0;
  broken.w[3] = 0.0;
  CHECK_THROWS_AS(nrf::class_cosine(broken), nrf::cosine_error);
}

TEST_CASE("top and bottom class lists rank by similarity then index", "[probe]") {
  // 4x4 cosine matrix around class 0: classes 1 and 2 tie at 0.5, class 3
  // sits at -0.25.
  const std::vector<double> cos = {
      1.0,  0.5,  0.5,  -0.25,
      0.5,  1.0,  0.0,  0.0,
      0.5,  0.0,  1.0,  0.0,
      -0.25, 0.0, 0.0,  1.0,
  };
  const auto [top, bottom] = nrf::top_bottom_classes(cos, 4, 0, 2);
  REQUIRE(top == std::vector<int>{1, 2});
  REQUIRE(bottom == std::vector<int>{3, 1});

  CHECK_THROWS_AS(nrf::top_bottom_classes(cos, 4, 4, 2), nrf::config_error);
  CHECK_THROWS_AS(nrf::top_bottom_classes(cos, 4, 0, 4), nrf::config_error);
  CHECK_THROWS_AS(nrf::top_bottom_classes(cos, 3, 0, 1), nrf::shape_error);
}

TEST_CASE("probe accepts feature views straight from extraction", "[probe]") {
  nrf::ArchitectureSpec arch;
  arch.preset = nrf::PresetKind::mlp;
  arch.width_multiplier = 0.25;
  // Two visually distinct synthetic classes: dark vs bright images.
  nrf::Tensor batch{{16, 4, 4, 3}};
  std::vector<int> labels(16);
  auto stream = nrf::derive_stream(92, 0);
  for (int e = 0; e < 16; ++e) {
    labels[static_cast<std::size_t>(e)] = e % 2;
    for (int j = 0; j < 48; ++j) {
      batch.data[static_cast<std::size_t>(e) * 48 + j] =
          static_cast<float>(stream.uniform() * 0.2 + (e % 2) * 0.8);
    }
  }
  const nrf::FeatureMatrix fm = nrf::extract_features(arch, batch, 32, 77);
  const nrf::ProbeModel model = nrf::train_probe(fm, labels, 1e-6);
  CHECK(nrf::accuracy(model, fm, labels) == 1.0);
}
