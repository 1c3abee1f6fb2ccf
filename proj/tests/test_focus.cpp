#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "agenticsum/focus.hpp"
#include "agenticsum/mock_backend.hpp"
#include "oracles.hpp"

using namespace agenticsum;

TEST(Salience, RowStochasticIsOne) {
  std::mt19937 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto a = oracle::random_tensor(rng, 1 + rng() % 8, 1 + rng() % 32, true);
    EXPECT_NEAR(focus::salience_score(a), 1.0, 1e-9);
  }
}

TEST(Salience, MatchesTripleSum) {
  std::mt19937 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto a = oracle::random_tensor(rng, 1 + rng() % 8, 1 + rng() % 32, false);
    EXPECT_NEAR(focus::salience_score(a), oracle::salience_triple_sum(a), 1e-9);
  }
}

TEST(Salience, HandCase) {
  // H=1, T=2: entries 0.5, 0.5, 1.0, 0.0 sum to 2, divided by H*T = 2.
  AttentionTensor a(1, 2);
  a.weights = {0.5, 0.5, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(focus::salience_score(a), 1.0);
  a.weights = {1.0, 1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(focus::salience_score(a), 2.0);
}

TEST(Salience, ReceivedMassVariesAndSumsToOne) {
  AttentionTensor a(1, 2);
  a.weights = {1.0, 0.0, 1.0, 0.0};  // both queries attend to token 0
  const auto mass = focus::received_mass(a);
  EXPECT_DOUBLE_EQ(mass[0], 1.0);
  EXPECT_DOUBLE_EQ(mass[1], 0.0);
  EXPECT_DOUBLE_EQ(focus::salience_score_received(a), 1.0);
  a.weights = {0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(focus::salience_score_received(a), 0.5);
}

TEST(Salience, RejectsMalformedTensor) {
  AttentionTensor a(2, 3);
  a.weights.pop_back();
  EXPECT_THROW(focus::salience_score(a), Error);
  AttentionTensor b(1, 1);
  b.weights = {-0.1};
  EXPECT_THROW(focus::salience_score(b), Error);
}

TEST(RetainedCount, FloorAndClamp) {
  EXPECT_EQ(focus::retained_count(0.6, 10), 6u);
  EXPECT_EQ(focus::retained_count(0.1, 5), 1u);
  EXPECT_EQ(focus::retained_count(1.0, 7), 7u);
  EXPECT_EQ(focus::retained_count(0.29, 100), 29u);
  EXPECT_EQ(focus::retained_count(0.7, 10), 7u);
  EXPECT_THROW(focus::retained_count(0.0, 5), Error);
  EXPECT_THROW(focus::retained_count(1.5, 5), Error);
}

TEST(Select, TiesBreakTowardEarlierSentence) {
  const auto doc = text::make_document("d", "A one. B two. C three. D four.");
  std::vector<focus::SalienceScore> s = {{0, 0.5}, {1, 0.9}, {2, 0.5}, {3, 0.5}};
  const auto c = focus::select(doc, 0.5, s);
  EXPECT_EQ(c.kept_indices(), (std::vector<std::size_t>{0, 1}));
}

TEST(Select, PropertiesOnRandomScores) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 50;
    std::string t;
    for (std::size_t j = 0; j < m; ++j) t += "Sentence number " + std::to_string(j) + ". ";
    const auto doc = text::make_document("d", t);
    ASSERT_EQ(doc.sentences.size(), m);
    std::vector<focus::SalienceScore> s;
    // Coarse values so ties occur.
    for (std::size_t j = 0; j < m; ++j) s.push_back({j, static_cast<double>(rng() % 7)});
    std::vector<std::size_t> prev;
    for (int tenth = 1; tenth <= 10; ++tenth) {
      const double r = tenth / 10.0;
      const auto c = focus::select(doc, r, s);
      const auto kept = c.kept_indices();
      const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(r * m + 1e-9)), 1, m);
      ASSERT_EQ(kept.size(), k);
      ASSERT_TRUE(std::is_sorted(kept.begin(), kept.end()));
      double min_kept = 1e9, max_dropped = -1e9;
      for (std::size_t j = 0; j < m; ++j) {
        const bool in = std::binary_search(kept.begin(), kept.end(), j);
        (in ? min_kept : max_dropped) =
            in ? std::min(min_kept, s[j].beta) : std::max(max_dropped, s[j].beta);
      }
      ASSERT_GE(min_kept, max_dropped);
      ASSERT_TRUE(std::includes(kept.begin(), kept.end(), prev.begin(), prev.end()));
      prev = kept;
    }
  }
}

TEST(Compress, FullRetentionIsIdentity) {
  const MockBackend mock;
  const auto t = oracle::read_fixture("discharge_note.txt");
  const auto doc = text::make_document("d", t);
  for (auto scorer : {focus::Scorer::verbatim, focus::Scorer::received}) {
    EXPECT_EQ(focus::compress(doc, 1.0, scorer, mock).text(), t);
  }
}

TEST(Compress, ReducedTextKeepsSourceOrder) {
  const MockBackend mock;
  const auto doc = text::make_document("d", oracle::read_fixture("discharge_note.txt"));
  const auto c = focus::compress(doc, 0.6, focus::Scorer::verbatim, mock);
  EXPECT_EQ(c.k, 6u);
  // Verbatim scores are 1 up to rounding, so only the ordering rule is checked.
  ASSERT_EQ(c.scores.size(), doc.sentences.size());
  for (const auto& s : c.scores) EXPECT_NEAR(s.beta, 1.0, 1e-9);
  const auto kept = c.kept_indices();
  ASSERT_TRUE(std::is_sorted(kept.begin(), kept.end()));
  double min_kept = 2.0, max_dropped = -1.0;
  for (std::size_t j = 0; j < c.scores.size(); ++j) {
    if (std::find(kept.begin(), kept.end(), j) != kept.end()) min_kept = std::min(min_kept, c.scores[j].beta);
    else max_dropped = std::max(max_dropped, c.scores[j].beta);
  }
  EXPECT_GE(min_kept, max_dropped);
  const auto text = c.text();
  std::size_t pos = 0;
  for (const auto& s : c.kept) {
    const auto at = text.find(s.text, pos);
    ASSERT_NE(at, std::string::npos);
    pos = at + s.text.size();
  }
}

TEST(Compress, HeaderLineStaysOwnSentence) {
  const std::string src = "<SEX> F\nCough began Monday. Fever followed. Chest film was clear.";
  const auto doc = text::make_document("d", src);
  ASSERT_EQ(doc.sentences.size(), 4u);
  focus::CompressedDocument c;
  c.source = doc;
  c.k = 2;
  c.kept = {doc.sentences[0], doc.sentences[3]};
  const auto again = text::make_document("d", c.text());
  ASSERT_EQ(again.sentences.size(), 2u);
  EXPECT_EQ(again.sentences[0].text, "<SEX> F");
}

TEST(Compress, EmptyDocumentIsPrecondition) {
  const MockBackend mock;
  try {
    focus::compress(text::make_document("d", "   "), 0.5, focus::Scorer::verbatim, mock);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}
