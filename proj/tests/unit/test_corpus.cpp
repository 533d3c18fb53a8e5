#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "lightxml/corpus.hpp"
#include "lightxml/errors.hpp"
#include "lightxml/sparse.hpp"
#include "test_util.hpp"

namespace lightxml {
namespace {

SparseLabeledData parse(const std::string& text, Split split = Split::train) {
  std::istringstream in(text);
  return parse_sparse(in, split, "mem");
}

TEST(SparseFormat, ParsesStatedExample) {
  auto d = parse("2 5 3\n0,2 1:0.5 4:1.0\n1 0:1\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.feature_dim, 5u);
  EXPECT_EQ(d.num_labels, 3u);
  EXPECT_EQ(d.labels[0], (std::vector<std::uint32_t>{0, 2}));
  EXPECT_EQ(d.features[0].indices, (std::vector<std::uint32_t>{1, 4}));
  EXPECT_FLOAT_EQ(d.features[0].values[0], 0.5f);
}

TEST(SparseFormat, EmptyLabelFieldOnTrainRowNamesTheLine) {
  try {
    parse("2 5 3\n0 1:1\n 2:1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_NO_THROW(parse("1 5 3\n 2:1\n", Split::test));
}

TEST(SparseFormat, RejectsMalformedRows) {
  EXPECT_THROW(parse("1 5 3\n0 3:1 2:1\n"), ParseError);  // non-monotone
  EXPECT_THROW(parse("1 5 3\n0 7:1\n"), ParseError);      // feature out of range
  EXPECT_THROW(parse("1 5 3\n4 1:1\n"), ParseError);      // label out of range
  EXPECT_THROW(parse("2 5 3\n0 1:1\n"), ParseError);      // header count
  EXPECT_THROW(parse("1 5\n0 1:1\n"), ParseError);        // header shape
  EXPECT_THROW(parse("1 5 3\n0 1:x\n"), ParseError);
}

TEST(SparseFormat, WriteParseRoundTrip) {
  auto d = parse("3 6 4\n0,3 0:0.25 5:2\n1 2:1\n2,3 1:0.5 3:0.5\n");
  std::ostringstream out;
  write_sparse(out, d);
  auto back = parse(out.str());
  EXPECT_EQ(back.labels, d.labels);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.features[i].indices, d.features[i].indices);
    EXPECT_EQ(back.features[i].values, d.features[i].values);
  }
}

TEST(SparseVec, FromPairsSortsAndMerges) {
  auto v = SparseVec::from_pairs(10, {{5, 1.0f}, {2, 2.0f}, {5, 0.5f}});
  EXPECT_EQ(v.indices, (std::vector<std::uint32_t>{2, 5}));
  EXPECT_FLOAT_EQ(v.values[1], 1.5f);
  EXPECT_NO_THROW(v.validate());
  EXPECT_NEAR(normalized(v).norm(), 1.0, 1e-6);
  EXPECT_TRUE(normalized(SparseVec{{}, {}, 10}).empty());
}

TEST(SparseVec, DotProducts) {
  auto a = SparseVec::from_pairs(6, {{0, 1.0f}, {3, 2.0f}});
  auto b = SparseVec::from_pairs(6, {{3, 4.0f}, {5, 1.0f}});
  EXPECT_DOUBLE_EQ(dot(a, b), 8.0);
  std::vector<double> dense = {1, 0, 0, 0.5, 0, 0};
  EXPECT_DOUBLE_EQ(dot(a, dense), 2.0);
}

TEST(Vocab, MostFrequentTokenGetsFirstRegularId) {
  auto v = Vocab::build({"a b", "a c"}, 1);
  EXPECT_EQ(v.id("a"), Vocab::kReserved);
  EXPECT_EQ(v.size(), Vocab::kReserved + 3);
  EXPECT_EQ(v.id("never"), Vocab::kUnk);
  EXPECT_EQ(v.token(Vocab::kCls), "[CLS]");
}

TEST(Vocab, FrequencyThresholdMapsRareTokensToUnk) {
  auto v = Vocab::build({"a b", "a c"}, 2);
  EXPECT_EQ(v.id("b"), Vocab::kUnk);
  EXPECT_EQ(v.id("c"), Vocab::kUnk);
  EXPECT_NE(v.id("a"), Vocab::kUnk);
}

TEST(Vocab, DeterministicAndPersistent) {
  const std::vector<std::string> corpus = {"x y z z", "y z w", "Q, q!"};
  auto a = Vocab::build(corpus, 1), b = Vocab::build(corpus, 1);
  EXPECT_EQ(a, b);
  testing::TempDir dir("vocab");
  a.save(dir / "v.txt");
  EXPECT_EQ(Vocab::load(dir / "v.txt"), a);
  EXPECT_THROW(Vocab::build({}, 1), ConfigError);
}

TEST(SplitWords, LowercasesAndIsolatesPunctuation) {
  EXPECT_EQ(split_words("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
  EXPECT_TRUE(split_words("  \t ").empty());
}

TEST(Tokenize, EmptyTextIsClsOnly) {
  auto v = Vocab::build({"a"}, 1);
  EXPECT_EQ(tokenize("", v, 128), (std::vector<std::uint32_t>{Vocab::kCls}));
}

TEST(Tokenize, TruncatesToMaxLength) {
  std::string text;
  for (int i = 0; i < 600; ++i) text += "w" + std::to_string(i % 50) + " ";
  auto v = Vocab::build({text}, 1);
  EXPECT_EQ(tokenize(text, v, 512).size(), 512u);
}

TEST(Tokenize, ClsPlusTokens) {
  auto v = Vocab::build({"a b c"}, 1);
  auto t = tokenize("a b c", v, 128);
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(t.front(), Vocab::kCls);
  for (auto id : t) EXPECT_NE(id, Vocab::kPad);
}

XmcDataset numbered_dataset(std::size_t n) {
  auto vocab = std::make_shared<const Vocab>(Vocab::build({"a b c d"}, 1));
  SparseLabeledData sparse;
  sparse.feature_dim = 4;
  sparse.num_labels = 3;
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    sparse.features.push_back(SparseVec::from_pairs(4, {{static_cast<std::uint32_t>(i % 4), 1.0f}}));
    sparse.labels.push_back({static_cast<std::uint32_t>(i % 3)});
    texts.push_back(std::string(i % 4 + 1, 'a'));
  }
  return make_dataset(sparse, texts, vocab, 8, Split::train);
}

TEST(Batches, ShortBatchRule) {
  auto d = numbered_dataset(10);
  BatchIterator it(d, 16, 1, 1);
  EXPECT_EQ(it.num_batches(), 1u);
  EXPECT_EQ(it.next()->batch_size, 10u);
  EXPECT_FALSE(it.next().has_value());
}

TEST(Batches, SizesFourFourTwo) {
  auto d = numbered_dataset(10);
  BatchIterator it(d, 4, 1, 1);
  std::vector<std::size_t> sizes;
  std::set<std::size_t> seen;
  while (auto b = it.next()) {
    sizes.push_back(b->batch_size);
    seen.insert(b->doc_indices.begin(), b->doc_indices.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Batches, OrderDependsOnlyOnSeedAndEpoch) {
  auto d = numbered_dataset(50);
  EXPECT_EQ(BatchIterator(d, 4, 7, 2).order(), BatchIterator(d, 4, 7, 2).order());
  EXPECT_NE(BatchIterator(d, 4, 7, 2).order(), BatchIterator(d, 4, 7, 3).order());
  std::vector<std::size_t> identity(50);
  std::iota(identity.begin(), identity.end(), 0);
  EXPECT_EQ(BatchIterator(d, 4, 7, 2, false).order(), identity);
  EXPECT_THROW(BatchIterator(d, 0, 1, 1), ConfigError);
}

TEST(Batches, PaddingAndMaskAgree) {
  auto d = numbered_dataset(4);
  auto b = make_batch(d, {0, 3});
  EXPECT_EQ(b.seq_len, d.documents[3].tokens.size());
  for (std::size_t r = 0; r < 2; ++r) {
    const auto len = d.documents[r == 0 ? 0 : 3].tokens.size();
    for (std::size_t j = 0; j < b.seq_len; ++j) {
      EXPECT_EQ(b.mask[r * b.seq_len + j], j < len ? 1 : 0);
      if (j >= len) EXPECT_EQ(b.tokens[r * b.seq_len + j], Vocab::kPad);
    }
  }
}

TEST(Dataset, TextAndSparseCountsMustAgree) {
  auto vocab = std::make_shared<const Vocab>(Vocab::build({"a"}, 1));
  SparseLabeledData sparse;
  sparse.feature_dim = 1;
  sparse.num_labels = 1;
  sparse.features = {SparseVec::from_pairs(1, {{0, 1.0f}})};
  sparse.labels = {{0}};
  EXPECT_THROW(make_dataset(sparse, {"a", "a"}, vocab, 8, Split::train), ConfigError);
  auto ok = make_dataset(sparse, {"a"}, vocab, 8, Split::train);
  EXPECT_NO_THROW(ok.validate());
  auto view = ok.sparse_view();
  EXPECT_EQ(view.labels, sparse.labels);
}

TEST(Tfidf, RowsAreUnitNormAndIgnoreReservedIds) {
  std::vector<std::vector<std::uint32_t>> docs = {{1, 3, 4, 4}, {1, 3, 5}, {1, 2}};
  auto rows = build_tfidf(docs, 6);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].norm(), 1.0, 1e-6);
  EXPECT_TRUE(rows[2].empty());
  for (const auto& r : rows)
    for (auto i : r.indices) EXPECT_GE(i, Vocab::kReserved);
}

TEST(MixSeed, SpreadsNearbyInputs) {
  EXPECT_NE(mix_seed(1, 1), mix_seed(1, 2));
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
  EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

}  // namespace
}  // namespace lightxml
