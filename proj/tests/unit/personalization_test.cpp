#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "t2p/error.hpp"
#include "t2p/personalization.hpp"

namespace t2p {
namespace {

EmbeddingStore parse(const std::string& text) {
  std::istringstream in(text);
  return load_embeddings(in);
}

std::pair<ErrorCode, std::optional<std::size_t>> failure_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return {e.code(), e.line()};
  }
  ADD_FAILURE() << "no error for: " << text;
  return {ErrorCode::kIo, std::nullopt};
}

std::vector<std::string> ids_of(const RankedList& list) {
  std::vector<std::string> out;
  for (const auto& t : list.tracks) out.push_back(t.track_id);
  return out;
}

std::vector<float> random_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(d);
  for (auto& x : v) x = n(rng);
  return v;
}

TEST(EmbeddingLoadTest, DeskFixture) {
  EmbeddingStore store = testing::desk_embeddings();
  EXPECT_EQ(store.dimension(), 2u);
  EXPECT_EQ(store.user_count(), 1u);
  EXPECT_EQ(store.track_count(), 3u);
  ASSERT_NE(store.track("T6"), nullptr);
  EXPECT_FLOAT_EQ(store.track("T6")->components[1], 0.8f);
  EXPECT_EQ(store.track("T3"), nullptr);
}

TEST(EmbeddingLoadTest, Errors) {
  const std::string header = "t2p-embeddings v1 dim=2\n";
  EXPECT_EQ(failure_of(header + "user,U1,1,0\ntrack,T1,1,0,3\n"),
            (std::pair{ErrorCode::kDimensionMismatch, std::optional<std::size_t>{3}}));
  EXPECT_EQ(failure_of(header + "track,T1,0,0\n"),
            (std::pair{ErrorCode::kZeroVector, std::optional<std::size_t>{2}}));
  EXPECT_EQ(failure_of(header + "song,T1,1,0\n").first, ErrorCode::kMalformedRow);
  EXPECT_EQ(failure_of(header + "track,T1,1,abc\n").first, ErrorCode::kMalformedRow);
  EXPECT_EQ(failure_of(header + "track,T1,1,nan\n").first, ErrorCode::kMalformedRow);
  EXPECT_EQ(failure_of(header + "track,,1,0\n").first, ErrorCode::kMalformedRow);
  EXPECT_EQ(failure_of("t2p-embeddings v2 dim=2\n"),
            (std::pair{ErrorCode::kMalformedRow, std::optional<std::size_t>{1}}));
  EXPECT_EQ(failure_of("").first, ErrorCode::kMalformedRow);
}

TEST(EmbeddingLoadTest, WriteReadRoundTrip) {
  std::mt19937_64 rng(1);
  std::ostringstream out;
  write_embedding_header(out, 16);
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 20; ++i) {
    rows.push_back(random_vector(rng, 16));
    write_embedding_row(out, i == 0, (i == 0 ? "U" : "T") + std::to_string(i), rows.back());
  }
  EmbeddingStore store = parse(out.str());
  EXPECT_EQ(store.dimension(), 16u);
  EXPECT_EQ(store.user("U0")->components, rows[0]);
  for (int i = 1; i < 20; ++i) EXPECT_EQ(store.track("T" + std::to_string(i))->components, rows[i]);
}

TEST(CosineTest, Examples) {
  std::vector<float> x{1, 0}, y{0, 1}, d{0.8f, 0.8f};
  EXPECT_DOUBLE_EQ(cosine(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine(x, y), 0.0);
  EXPECT_NEAR(cosine(x, d), 0.7071, 1e-4);
  std::vector<float> three{1, 0, 0}, zero{0, 0};
  EXPECT_THROW(cosine(x, three), Error);
  EXPECT_THROW(cosine(x, zero), Error);
}

TEST(CosineTest, SymmetricAndBounded) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 2000; ++i) {
    auto u = random_vector(rng, 64), v = random_vector(rng, 64);
    double a = cosine(u, v), b = cosine(v, u);
    EXPECT_NEAR(a, b, 1e-7);
    EXPECT_LE(std::abs(a), 1.0);
    EXPECT_LE(cosine(u, u), 1.0);
    EXPECT_NEAR(cosine(u, u), 1.0, 1e-12);
  }
}

TEST(RankTest, DeskExample) {
  EmbeddingStore store = testing::desk_embeddings();
  std::vector<std::string> candidates{"T1", "T2", "T6"};
  RankedList r = rank_for_user("U1", candidates, store);
  EXPECT_TRUE(r.personalized);
  ASSERT_EQ(ids_of(r), (std::vector<std::string>{"T1", "T6", "T2"}));
  EXPECT_NEAR(*r.tracks[0].score, 1.0, 1e-12);
  EXPECT_NEAR(*r.tracks[1].score, 0.7071, 1e-4);
  EXPECT_NEAR(*r.tracks[2].score, 0.0, 1e-12);
}

TEST(RankTest, UnknownUserPassesThrough) {
  EmbeddingStore store = testing::desk_embeddings();
  std::vector<std::string> candidates{"T1", "T2", "T6"};
  RankedList r = rank_for_user("nobody", candidates, store);
  EXPECT_FALSE(r.personalized);
  EXPECT_EQ(ids_of(r), candidates);
  for (const auto& t : r.tracks) EXPECT_FALSE(t.score);
}

TEST(RankTest, TiesByTrackId) {
  EmbeddingStore store(2);
  store.add_user("U", {1, 1});
  store.add_track("B", {2, 1});
  store.add_track("A", {2, 1});
  store.add_track("C", {1, 1});
  std::vector<std::string> candidates{"B", "A", "C"};
  EXPECT_EQ(ids_of(rank_for_user("U", candidates, store)),
            (std::vector<std::string>{"C", "A", "B"}));
}

TEST(RankTest, UnscoredAppendedInInputOrder) {
  EmbeddingStore store = testing::desk_embeddings();
  std::vector<std::string> candidates{"T8", "T2", "T3", "T1", "T6"};
  RankedList r = rank_for_user("U1", candidates, store);
  EXPECT_EQ(ids_of(r), (std::vector<std::string>{"T1", "T6", "T2", "T8", "T3"}));
  EXPECT_FALSE(r.tracks[3].score);
  EXPECT_FALSE(r.tracks[4].score);
}

TEST(RankTest, RandomInstancesArePermutationsWithSortedPrefix) {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 100; ++round) {
    EmbeddingStore store(8);
    store.add_user("U", random_vector(rng, 8));
    std::vector<std::string> candidates;
    int n = static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      std::string id = "T" + std::to_string(rng() % 100000) + "_" + std::to_string(i);
      candidates.push_back(id);
      if (rng() % 4) store.add_track(id, random_vector(rng, 8));
    }
    RankedList r = rank_for_user("U", candidates, store);
    auto got = ids_of(r);
    auto a = got, b = candidates;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_EQ(a, b);
    bool unscored = false;
    std::optional<double> last;
    for (const auto& t : r.tracks) {
      if (!t.score) {
        unscored = true;
        continue;
      }
      ASSERT_FALSE(unscored);
      if (last) EXPECT_LE(*t.score, *last);
      last = t.score;
    }
  }
}

TEST(RankTest, MatchesIndependentCosineSort) {
  std::mt19937_64 rng(64);
  const std::size_t d = 64;
  for (int round = 0; round < 5; ++round) {
    EmbeddingStore store(d);
    auto user = random_vector(rng, d);
    store.add_user("U", user);
    std::vector<std::string> candidates;
    std::vector<std::pair<double, std::string>> expected;
    for (int i = 0; i < 1000; ++i) {
      std::string id = "T" + std::to_string(i);
      auto v = random_vector(rng, d);
      store.add_track(id, v);
      candidates.push_back(id);
      expected.emplace_back(oracle::cosine(user, v), id);
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    RankedList r = rank_for_user("U", candidates, store);
    ASSERT_EQ(r.tracks.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      ASSERT_EQ(r.tracks[i].track_id, expected[i].second) << i;
      ASSERT_NEAR(*r.tracks[i].score, expected[i].first, 1e-6);
    }
  }
}

TEST(RankTest, OrderIsScaleInvariant) {
  std::mt19937_64 rng(31);
  EmbeddingStore store(32);
  std::vector<std::string> candidates;
  for (int i = 0; i < 300; ++i) {
    candidates.push_back("T" + std::to_string(i));
    store.add_track(candidates.back(), random_vector(rng, 32));
  }
  for (int round = 0; round < 20; ++round) {
    auto user = random_vector(rng, 32);
    auto base = ids_of(rank_for_vector(user, candidates, store));
    for (float c : {0.001f, 0.5f, 2.0f, 3.7f, 1000.0f}) {
      auto scaled = user;
      for (auto& x : scaled) x *= c;
      EXPECT_EQ(ids_of(rank_for_vector(scaled, candidates, store)), base) << c;
    }
  }
}

}  // namespace
}  // namespace t2p
