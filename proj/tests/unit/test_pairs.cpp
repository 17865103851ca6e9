#include "catch_amalgamated.hpp"

#include <map>
#include <set>
#include <tuple>

#include "calm/error.hpp"
#include "calm/pairs.hpp"
#include "calm/random.hpp"
#include "calm/synth.hpp"

using namespace calm;

namespace {

EmbeddingSet random_set(std::vector<ClassId> labels, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(labels.size(), dim);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = random_unit_vector(dim, rng);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return EmbeddingSet(std::move(m), std::move(labels));
}

std::size_t count_if(const PairList& pairs, auto&& pred) {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), pred));
}

}  // namespace

TEST_CASE("positive pairs are exhaustive within classes") {
  CHECK(enumerate_positive_pairs(random_set({0, 0, 0, 0}, 3, 1)).size() == 6);
  CHECK(enumerate_positive_pairs(random_set({0, 0, 0, 1}, 3, 1)).size() == 3);
  const PairList two = enumerate_positive_pairs(random_set({0, 0, 1, 1}, 3, 1));
  REQUIRE(two.size() == 2);
  CHECK(two[0] == PairEntry{0, 1, 0, true});
  CHECK(two[1] == PairEntry{2, 3, 1, true});
}

TEST_CASE("positive count matches brute force on random labelings") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<ClassId> labels(n);
    for (auto& l : labels) l = static_cast<ClassId>(rng.below(6));
    const EmbeddingSet set = random_set(labels, 3, t);
    std::size_t brute = 0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) brute += labels[a] == labels[b] ? 1 : 0;
    }
    CHECK(enumerate_positive_pairs(set).size() == brute);
  }
}

TEST_CASE("negative sampling honours the per-class ratio") {
  // Class 0 has 4 samples (6 positives); 40 others give ample negatives.
  std::vector<ClassId> labels{0, 0, 0, 0};
  for (int i = 0; i < 40; ++i) labels.push_back(1 + i % 4);
  const EmbeddingSet set = random_set(labels, 4, 2);
  const PairList neg = sample_negative_pairs(set, 10, 7);
  CHECK(count_if(neg, [](const PairEntry& p) { return p.anchor == 0; }) == 60);

  // One positive pair per class at ratio 1.
  const EmbeddingSet small = random_set({0, 0, 1, 1, 2, 2}, 3, 3);
  const PairList one = sample_negative_pairs(small, 1, 1);
  for (ClassId c : {0u, 1u, 2u}) CHECK(count_if(one, [c](const PairEntry& p) { return p.anchor == c; }) == 1);
}

TEST_CASE("negative sampling is capped at the available cross-class pairs") {
  // 4 samples {A, A, A, B}: 3 positives for A, 3 cross pairs in total.
  const EmbeddingSet set = random_set({0, 0, 0, 1}, 3, 4);
  const PairList neg = sample_negative_pairs(set, 20, 1);
  CHECK(count_if(neg, [](const PairEntry& p) { return p.anchor == 0; }) == 3);
  CHECK(count_if(neg, [](const PairEntry& p) { return p.anchor == 1; }) == 0);

  // {A, A, A, A, B, B, B}: A wants 60, only 4 * 3 = 12 cross pairs exist.
  const EmbeddingSet seven = random_set({0, 0, 0, 0, 1, 1, 1}, 3, 5);
  const PairList capped = sample_negative_pairs(seven, 10, 1);
  CHECK(count_if(capped, [](const PairEntry& p) { return p.anchor == 0; }) == 12);
  CHECK(count_if(capped, [](const PairEntry& p) { return p.anchor == 1; }) == 12);
}

TEST_CASE("sampled negatives are distinct, cross-class and canonical") {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    std::vector<ClassId> labels(30);
    for (auto& l : labels) l = static_cast<ClassId>(rng.below(4));
    labels[0] = 0;
    labels[1] = 1;
    const EmbeddingSet set = random_set(labels, 3, t);
    const PairList neg = sample_negative_pairs(set, 3, t);
    std::set<std::tuple<ClassId, std::uint32_t, std::uint32_t>> seen;
    for (const PairEntry& p : neg) {
      CHECK(p.a < p.b);
      CHECK(!p.positive);
      CHECK(labels[p.a] != labels[p.b]);
      CHECK((labels[p.a] == p.anchor || labels[p.b] == p.anchor));
      CHECK(seen.insert({p.anchor, p.a, p.b}).second);
    }
    CHECK(std::is_sorted(neg.begin(), neg.end(), [](const PairEntry& x, const PairEntry& y) {
      return std::tie(x.anchor, x.a, x.b) < std::tie(y.anchor, y.a, y.b);
    }));
    CHECK(neg == sample_negative_pairs(set, 3, t));
  }
}

TEST_CASE("negative sampling errors") {
  const EmbeddingSet single = random_set({3, 3, 3}, 3, 1);
  CHECK_THROWS_MATCHES(sample_negative_pairs(single, 10, 0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::SingleClass; }));
  const EmbeddingSet two = random_set({0, 1}, 3, 1);
  CHECK_THROWS_AS(sample_negative_pairs(two, 0, 0), Error);
}

TEST_CASE("exhaustive pairs") {
  CHECK(exhaustive_pairs(random_set({0, 1, 2}, 3, 1)).size() == 3);
  const PairList four = exhaustive_pairs(random_set({0, 0, 1, 1}, 3, 1));
  CHECK(count_if(four, [](const PairEntry& p) { return p.positive; }) == 2);
  CHECK(count_if(four, [](const PairEntry& p) { return !p.positive; }) == 4);
  for (const PairEntry& p : four) {
    if (!p.positive) CHECK(p.anchor == 0);
  }
  const PairList same = exhaustive_pairs(random_set({5, 5}, 3, 1));
  REQUIRE(same.size() == 1);
  CHECK(same[0].positive);
}

TEST_CASE("labels decide polarity on every exhaustive pair") {
  Rng rng(10);
  std::vector<ClassId> labels(25);
  for (auto& l : labels) l = static_cast<ClassId>(rng.below(5));
  const PairList all = exhaustive_pairs(random_set(labels, 3, 2));
  CHECK(all.size() == 25 * 24 / 2);
  for (const PairEntry& p : all) CHECK(p.positive == (labels[p.a] == labels[p.b]));
}

TEST_CASE("scoring identical, antipodal and orthogonal vectors") {
  Matrix m(4, 2);
  m(0, 0) = 1;
  m(1, 0) = 1;
  m(2, 0) = -1;
  m(3, 1) = 1;
  const EmbeddingSet set(m, {0, 0, 1, 1});
  const PairList pairs{{0, 1, 0, true}, {0, 2, 0, false}, {0, 3, 0, false}};
  const ScoredPairSet s = score_pairs(set, pairs);
  CHECK(s.entries[0].similarity == 1.0);
  CHECK(s.entries[0].distance == 0.0);
  CHECK(s.entries[1].similarity == -1.0);
  CHECK(s.entries[1].distance == 2.0);
  CHECK(s.entries[2].similarity == 0.0);
  CHECK(s.entries[2].distance == std::sqrt(2.0));
  CHECK(s.positive_count() == 1);
  CHECK(s.negative_count() == 2);
  CHECK_THROWS_AS(score_pairs(set, PairList{{0, 4, 0, false}}), Error);
}
