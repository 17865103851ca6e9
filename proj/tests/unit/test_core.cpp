#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "calm/core.hpp"
#include "calm/error.hpp"
#include "calm/random.hpp"

using namespace calm;
using Catch::Matchers::WithinAbs;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected calm::Error");
  return Errc::OutOfRange;
}

std::vector<double> random_vector(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("normalize scales to unit length") {
  CHECK(normalize(std::vector<double>{2, 0, 0}) == std::vector<double>{1, 0, 0});
  const auto v = normalize(std::vector<double>{1, 1});
  CHECK_THAT(v[0], WithinAbs(0.70710678, 1e-8));
  CHECK_THAT(v[1], WithinAbs(0.70710678, 1e-8));
  CHECK(code_of([] { normalize(std::vector<double>{0, 0, 0}); }) == Errc::ZeroVector);
  CHECK(code_of([] { normalize(std::vector<double>{1e-13, 0}); }) == Errc::ZeroVector);
}

TEST_CASE("normalize is idempotent up to rounding") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto once = normalize(random_vector(7, rng));
    const auto twice = normalize(once);
    const auto thrice = normalize(twice);
    for (std::size_t k = 0; k < once.size(); ++k) {
      CHECK_THAT(twice[k], WithinAbs(once[k], 1e-15));
      CHECK_THAT(thrice[k], WithinAbs(twice[k], 1e-15));
    }
  }
}

TEST_CASE("cosine and distance conversions") {
  CHECK(cos_to_l2(1.0) == 0.0);
  CHECK(cos_to_l2(-1.0) == 2.0);
  CHECK_THAT(cos_to_l2(0.0), WithinAbs(1.41421356, 1e-8));
  CHECK(cos_to_l2(1.0 + 5e-10) == 0.0);
  CHECK(code_of([] { cos_to_l2(1.0 + 1e-6); }) == Errc::OutOfRange);
  CHECK(code_of([] { l2_to_cos(2.1); }) == Errc::OutOfRange);
  CHECK(code_of([] { l2_to_cos(-0.1); }) == Errc::OutOfRange);

  const std::vector<double> u{1, 0}, v{0.6, 0.8}, w{0, 1};
  CHECK(cosine(u, u) == 1.0);
  CHECK(cosine(u, w) == 0.0);
  CHECK_THAT(cosine(u, v), WithinAbs(0.6, 1e-15));
  CHECK(code_of([&] { cosine(u, std::vector<double>{1, 0, 0}); }) == Errc::DimensionMismatch);
}

TEST_CASE("cosine-distance round trip over the whole range") {
  Rng rng(11);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double s = -1.0 + 2.0 * rng.uniform();
    worst = std::max(worst, std::abs(l2_to_cos(cos_to_l2(s)) - s));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("squared chord length equals 2 - 2 cosine") {
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    const auto u = normalize(random_vector(5, rng));
    const auto v = normalize(random_vector(5, rng));
    double d2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) d2 += (u[k] - v[k]) * (u[k] - v[k]);
    CHECK_THAT(d2, WithinAbs(2.0 - 2.0 * cosine(u, v), 1e-10));
    CHECK_THAT(cos_to_l2(cosine(u, v)), WithinAbs(std::sqrt(d2), 1e-7));
  }
}

TEST_CASE("EmbeddingSet validation") {
  Matrix m(2, 2);
  m(0, 0) = 1;
  m(1, 1) = 1;
  const EmbeddingSet set(m, {4, 9});
  CHECK(set.size() == 2);
  CHECK(set.dim() == 2);
  CHECK(set.classes() == std::vector<ClassId>{4, 9});
  CHECK(set.members(9) == std::vector<std::size_t>{1});

  CHECK(code_of([&] { EmbeddingSet(m, {1}); }) == Errc::InvalidEmbedding);
  CHECK(code_of([] { EmbeddingSet(Matrix(0, 2), {}); }) == Errc::InvalidEmbedding);
  CHECK(code_of([] { EmbeddingSet(Matrix(1, 1, 1.0), {0}); }) == Errc::InvalidEmbedding);
  Matrix off = m;
  off(0, 0) = 1.0 + 1e-6;
  CHECK(code_of([&] { EmbeddingSet(off, {0, 1}); }) == Errc::InvalidEmbedding);
  off(0, 0) = 1.0 + 1e-10;
  CHECK_NOTHROW(EmbeddingSet(off, {0, 1}));

  Matrix raw(1, 3, 2.0);
  const EmbeddingSet fixed = EmbeddingSet::from_raw(raw, {0});
  CHECK_THAT(norm(fixed.row(0)), WithinAbs(1.0, 1e-15));
}

TEST_CASE("EmbeddingSet subset keeps order and allows repeats") {
  Matrix m(3, 2);
  m(0, 0) = 1;
  m(1, 1) = 1;
  m(2, 0) = -1;
  const EmbeddingSet set(m, {0, 1, 2});
  const std::vector<std::size_t> rows{2, 0, 2};
  const EmbeddingSet sub = set.subset(rows);
  CHECK(sub.labels() == std::vector<ClassId>{2, 0, 2});
  CHECK(sub.row(0)[0] == -1.0);
  const std::vector<std::size_t> bad{3};
  CHECK(code_of([&] { set.subset(bad); }) == Errc::IndexOutOfRange);
}

TEST_CASE("Rng streams are reproducible and uniform draws stay in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  // First SplitMix64 outputs for seed 0, as published with the algorithm.
  Rng zero(0);
  CHECK(zero.next() == 0xE220A8397B1DCDAFULL);
  CHECK(zero.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(Rng::derive(1, 2) != Rng::derive(2, 1));

  Rng r(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    ++counts[r.below(7)];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}
