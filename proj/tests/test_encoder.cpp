#include <cmath>
#include <random>

#include <doctest.h>

#include "spanfill/encoder.hpp"
#include "support/oracles.hpp"

using namespace spanfill;

namespace {

EncoderConfig tiny() { return {4, {3, 2}, {1, 3}, 0.5, 0.6}; }

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

// A fixed random linear functional of the potentials stands in for the loss.
struct Probe {
  std::vector<StepPotentials> coeff;
  explicit Probe(int T, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    coeff = oracle::random_potentials(rng, T, 1.0);
  }
  double operator()(const Potentials& p) const {
    double s = 0;
    for (std::size_t t = 0; t < p.size(); ++t)
      s += p[t].transitions.cwiseProduct(coeff[t].transitions).sum() + p[t].unary.dot(coeff[t].unary);
    return s;
  }
};

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("shapes and zero network") {
  const auto config = tiny();
  const auto w = EncoderWeights<double>::zeros(config);
  const auto p = encode(config, w, random_matrix(4, 6, 1), random_matrix(5, 6, 2), false, 0);
  REQUIRE(p.size() == 6);
  for (const auto& s : p) {
    CHECK(s.transitions.isZero());
    CHECK(s.unary.isZero());
  }
  CHECK(w.parameter_count() == 3 * 9 + 3 + 2 * 9 + 2 + 20 * 2 + 20);
}

TEST_CASE("shape errors") {
  const auto config = tiny();
  const auto w = EncoderWeights<double>::random(config, 1);
  CHECK_THROWS_AS(encode(config, w, random_matrix(3, 4, 1), random_matrix(5, 4, 2), false, 0), ShapeError);
  CHECK_THROWS_AS(encode(config, w, random_matrix(4, 4, 1), random_matrix(5, 3, 2), false, 0), ShapeError);
  CHECK_THROWS_AS(encode(config, w, Eigen::MatrixXd(4, 0), Eigen::MatrixXd(5, 0), false, 0), ShapeError);
  EncoderConfig other = config;
  other.channels = {3, 3};
  CHECK_THROWS_AS(encode(other, w, random_matrix(4, 4, 1), random_matrix(5, 4, 2), false, 0), ShapeError);
  CHECK_THROWS_AS((EncoderConfig{4, {3}, {1, 2}, 1, 1}.validate()), ShapeError);
}

TEST_CASE("width-one layers act position-wise") {
  const EncoderConfig config{4, {6, 5}, {1, 1}, 1, 1};
  const auto w = EncoderWeights<double>::random(config, 9);
  const Eigen::MatrixXd e = random_matrix(4, 5, 3), f = random_matrix(5, 5, 4);
  const auto full = encode(config, w, e, f, false, 0);
  for (int t = 0; t < 5; ++t) {
    const auto single = encode(config, w, Eigen::MatrixXd(e.col(t)), Eigen::MatrixXd(f.col(t)), false, 0);
    CHECK(single[0].transitions.isApprox(full[t].transitions, 1e-12));
    CHECK(single[0].unary.isApprox(full[t].unary, 1e-12));
  }
}

TEST_CASE("translation equivariance away from the borders") {
  const auto config = tiny();
  const auto w = EncoderWeights<double>::random(config, 4);
  // Receptive field radius is 1; zero padding at both ends makes interior positions shift-equivariant.
  const Eigen::MatrixXd e = random_matrix(4, 8, 5), f = random_matrix(5, 8, 6);
  Eigen::MatrixXd e2 = Eigen::MatrixXd::Zero(4, 10), f2 = Eigen::MatrixXd::Zero(5, 10);
  e2.middleCols(2, 8) = e;
  f2.middleCols(2, 8) = f;
  const auto a = encode(config, w, e, f, false, 0);
  const auto b = encode(config, w, e2, f2, false, 0);
  for (int t = 1; t < 7; ++t) CHECK(a[t].unary.isApprox(b[t + 2].unary, 1e-12));
}

TEST_CASE("gradients match central differences") {
  const auto config = tiny();
  auto w = EncoderWeights<double>::random(config, 12);
  for (auto& layer : w.convs) layer.bias.setConstant(0.1);
  w.head_bias.setConstant(-0.2);
  const int T = 5;
  Eigen::MatrixXd e = random_matrix(4, T, 7);
  const Eigen::MatrixXd f = random_matrix(5, T, 8);
  const Probe probe(T, 13);
  for (bool training : {false, true}) {
    EncoderCache<double> cache;
    encode(config, w, e, f, training, 99, &cache);
    const auto grads = encode_backward(config, w, cache, probe.coeff);
    auto loss = [&] { return probe(encode(config, w, e, f, training, 99)); };

    double worst = 0;
    const auto& gw = grads.weights;
    std::vector<std::pair<double*, double>> pairs;  // (parameter, analytic gradient)
    for (std::size_t i = 0; i < w.convs.size(); ++i) {
      for (Eigen::Index k = 0; k < w.convs[i].weight.size(); ++k)
        pairs.emplace_back(w.convs[i].weight.data() + k, gw.convs[i].weight.data()[k]);
      for (Eigen::Index k = 0; k < w.convs[i].bias.size(); ++k)
        pairs.emplace_back(w.convs[i].bias.data() + k, gw.convs[i].bias.data()[k]);
    }
    for (Eigen::Index k = 0; k < w.head_weight.size(); ++k) pairs.emplace_back(w.head_weight.data() + k, gw.head_weight.data()[k]);
    for (Eigen::Index k = 0; k < w.head_bias.size(); ++k) pairs.emplace_back(w.head_bias.data() + k, gw.head_bias.data()[k]);
    for (Eigen::Index k = 0; k < e.size(); ++k) pairs.emplace_back(e.data() + k, grads.embedded.data()[k]);
    for (auto& [x, analytic] : pairs) {
      const double fd = oracle::central_difference(loss, *x);
      worst = std::max(worst, oracle::relative_error(analytic, fd, 1e-4));
    }
    CAPTURE(training);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("dropout mask") {
  const EncoderConfig config{8, {3}, {1}, 0.5, 0.6};
  const auto w = EncoderWeights<double>::random(config, 1);
  const int T = 400;
  const Eigen::MatrixXd e = Eigen::MatrixXd::Ones(8, T), f = Eigen::MatrixXd::Ones(5, T);
  EncoderCache<double> c1, c2, c3;
  encode(config, w, e, f, true, 5, &c1);
  encode(config, w, e, f, true, 5, &c2);
  encode(config, w, e, f, true, 6, &c3);
  CHECK(c1.dropout_scale == c2.dropout_scale);
  CHECK(c1.dropout_scale != c3.dropout_scale);
  const Eigen::MatrixXd emb = c1.dropout_scale.topRows(8), feat = c1.dropout_scale.bottomRows(5);
  for (Eigen::Index i = 0; i < emb.size(); ++i) CHECK((emb.data()[i] == 0.0 || emb.data()[i] == 2.0));
  for (Eigen::Index i = 0; i < feat.size(); ++i) CHECK((feat.data()[i] == 0.0 || feat.data()[i] == doctest::Approx(1 / 0.6)));
  const double kept_emb = (emb.array() > 0).cast<double>().mean();
  const double kept_feat = (feat.array() > 0).cast<double>().mean();
  CHECK(kept_emb == doctest::Approx(0.5).epsilon(0.1));
  CHECK(kept_feat == doctest::Approx(0.6).epsilon(0.1));
}

TEST_CASE("inference ignores dropout and seed") {
  const auto config = tiny();
  const auto w = EncoderWeights<double>::random(config, 3);
  const Eigen::MatrixXd e = random_matrix(4, 6, 1), f = random_matrix(5, 6, 2);
  const auto a = encode(config, w, e, f, false, 1);
  const auto b = encode(config, w, e, f, false, 2);
  EncoderConfig no_drop = config;
  no_drop.keep_embedding = no_drop.keep_features = 1.0;
  const auto c = encode(no_drop, w, e, f, true, 3);
  for (int t = 0; t < 6; ++t) {
    CHECK(a[t].unary == b[t].unary);
    CHECK(a[t].transitions == c[t].transitions);
  }
}

TEST_CASE("single precision instantiation") {
  const auto config = tiny();
  const auto wd = EncoderWeights<double>::random(config, 3);
  const auto wf = EncoderWeights<float>::random(config, 3);
  const Eigen::MatrixXd e = random_matrix(4, 3, 1), f = random_matrix(5, 3, 2);
  const auto pd = encode(config, wd, e, f, false, 0);
  const auto pf = encode<float>(config, wf, e.cast<float>(), f, false, 0);
  for (int t = 0; t < 3; ++t) CHECK(pd[t].unary.isApprox(pf[t].unary, 1e-4));
}

}  // TEST_SUITE
