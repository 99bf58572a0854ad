#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "error.hpp"
#include "json.hpp"
#include "model.hpp"
#include "oracle.hpp"

namespace {

using cst::Architecture;
using cst::TinyLM;
using cst::Vocabulary;

Vocabulary small_vocab() {
  std::vector<std::string> corpus{"alpha beta gamma", "delta beta", "sys prompt words"};
  return cst::build_vocab(corpus);
}

constexpr Architecture kSmall{3, 4, 5};

TEST(Vocabulary, ReservedMarkersComeFirst) {
  const Vocabulary v = small_vocab();
  EXPECT_EQ(v.token(0), "<bos>");
  EXPECT_EQ(v.token(1), "<eos>");
  EXPECT_EQ(v.token(2), "<sys>");
  EXPECT_EQ(v.token(3), "<usr>");
  EXPECT_EQ(v.token(4), "<asst>");
  EXPECT_EQ(v.token(5), "<unk>");
  EXPECT_EQ(v.size(), 6u + 7u);  // alpha beta delta gamma prompt sys words
  EXPECT_EQ(v.id("never-seen"), cst::reserved::unk);
}

TEST(Vocabulary, SortedAndDeduplicated) {
  const Vocabulary v = small_vocab();
  for (std::size_t i = cst::reserved::count + 1; i < v.size(); ++i) {
    EXPECT_LT(v.tokens()[i - 1], v.tokens()[i]);
  }
}

TEST(Vocabulary, RejectsMissingReservedPrefix) {
  EXPECT_THROW(Vocabulary::from_tokens({"a", "b"}), cst::Error);
}

TEST(Render, LayoutOfContext) {
  const Vocabulary v = small_vocab();
  const auto r = cst::render_context(v, "sys prompt", "alpha", "beta gamma");
  const std::vector<cst::TokenId> expect{0, 2, v.id("sys"), v.id("prompt"), 3, v.id("alpha"), 4,
                                         v.id("beta"), v.id("gamma"), 1};
  EXPECT_EQ(r.tokens, expect);
  EXPECT_EQ(r.completion_begin, 7u);
  EXPECT_EQ(r.completion_size(), 3u);
}

TEST(Render, EmptyCompletionIsJustEos) {
  const Vocabulary v = small_vocab();
  const auto r = cst::render_context(v, "", "alpha", "");
  EXPECT_EQ(r.completion_size(), 1u);
  EXPECT_EQ(r.tokens.back(), cst::reserved::eos);
}

TEST(Layout, BlockSizes) {
  const cst::ParamLayout l(14, kSmall);
  ASSERT_EQ(l.manifest().size(), 7u);
  EXPECT_EQ(l.token_embedding().size(), 14u * 4);
  EXPECT_EQ(l.slot_embedding().size(), 3u * 4);
  EXPECT_EQ(l.system_embedding().size(), 14u * 4);
  EXPECT_EQ(l.hidden_weight().size(), 5u * 4 * 4);
  EXPECT_EQ(l.hidden_bias().size(), 5u);
  EXPECT_EQ(l.output_weight().size(), 14u * 5);
  EXPECT_EQ(l.output_bias().size(), 14u);
  std::size_t offset = 0;
  for (const auto& b : l.manifest()) {
    EXPECT_EQ(b.offset, offset) << b.name;
    offset += b.size();
  }
  EXPECT_EQ(offset, l.total());
}

TEST(TinyLM, ZeroParamsGiveUniformSequenceProbability) {
  // Eight tokens in total; a one-token answer plus EOS scores 2 * ln(1/8).
  const auto v = Vocabulary::from_tokens({"<bos>", "<eos>", "<sys>", "<usr>", "<asst>", "<unk>", "hi", "yo"});
  const TinyLM m(v, Architecture{});
  EXPECT_NEAR(cst::seq_logprob(m, "", "hi", "yo"), -4.1588830834, 1e-9);
  for (double p : m.next_token_probs(std::vector<cst::TokenId>{0})) EXPECT_DOUBLE_EQ(p, 0.125);
}

TEST(TinyLM, NextTokenProbsSumToOne) {
  const TinyLM m = TinyLM::random(small_vocab(), kSmall, 7, 0.5);
  const auto p = m.next_token_probs(std::vector<cst::TokenId>{0, 2, 6, 3});
  double sum = 0.0;
  for (double q : p) {
    EXPECT_GT(q, 0.0);
    sum += q;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(TinyLM, SeqLogprobMatchesLongDoubleOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const TinyLM m = TinyLM::random(small_vocab(), kSmall, seed, 0.7);
    const double got = cst::seq_logprob(m, "sys prompt words", "alpha delta", "beta gamma beta");
    const long double want = oracle::seq_logprob(m, "sys prompt words", "alpha delta", "beta gamma beta");
    EXPECT_NEAR(got, static_cast<double>(want), 1e-10) << "seed " << seed;
  }
}

TEST(TinyLM, SystemPromptChangesProbabilities) {
  const TinyLM m = TinyLM::random(small_vocab(), Architecture{2, 4, 5}, 3, 0.7);
  // With K=2 the window never reaches s; only the system slot can see it.
  const double a = cst::seq_logprob(m, "sys", "alpha delta gamma", "beta");
  const double b = cst::seq_logprob(m, "prompt", "alpha delta gamma", "beta");
  EXPECT_NE(a, b);
}

TEST(TinyLM, GradientMatchesCentralDifferences) {
  const TinyLM m = TinyLM::random(small_vocab(), kSmall, 11, 0.6);
  const auto g = cst::seq_logprob_grad(m, "sys prompt", "alpha", "beta gamma");
  ASSERT_EQ(g.size(), m.params().size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < g.size(); ++i) {
    TinyLM plus = m, minus = m;
    plus.mutable_params()[i] += h;
    minus.mutable_params()[i] -= h;
    const double fd = (cst::seq_logprob(plus, "sys prompt", "alpha", "beta gamma") -
                       cst::seq_logprob(minus, "sys prompt", "alpha", "beta gamma")) /
                      (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-6 + 1e-5 * std::fabs(fd)) << "param " << i;
  }
}

TEST(TinyLM, GreedyTiesGoToLowestIndex) {
  // All-zero model: every token ties, so the lowest index (BOS) wins until
  // max_len, and BOS renders as its spelling.
  const TinyLM m(small_vocab(), kSmall);
  EXPECT_EQ(cst::greedy_generate(m, "", "alpha", 3), "<bos> <bos> <bos>");
}

TEST(TinyLM, GreedyStopsAtEos) {
  TinyLM m(small_vocab(), kSmall);
  const auto& ob = m.layout().output_bias();
  m.mutable_params()[ob.offset + cst::reserved::eos] = 5.0;
  EXPECT_EQ(cst::greedy_generate(m, "", "alpha", 8), "");
}

TEST(Reference, SnapshotIsIndependentCopy) {
  TinyLM m = TinyLM::random(small_vocab(), kSmall, 5, 0.3);
  const auto ref = cst::snapshot_reference(m);
  const double before = cst::seq_logprob(ref, "sys", "alpha", "beta");
  m.mutable_params()[m.layout().output_bias().offset + m.vocab().id("beta")] += 1.0;
  EXPECT_EQ(cst::seq_logprob(ref, "sys", "alpha", "beta"), before);
  EXPECT_NE(cst::seq_logprob(m, "sys", "alpha", "beta"), before);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const TinyLM m = TinyLM::random(small_vocab(), kSmall, 9, 1.0 / 3.0);
  const std::string text = cst::checkpoint_json(m);
  const TinyLM back = cst::parse_checkpoint(text);
  ASSERT_EQ(back.params().size(), m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(back.params()[i], m.params()[i]);
  EXPECT_EQ(back.vocab(), m.vocab());
  EXPECT_EQ(back.arch(), m.arch());
  EXPECT_EQ(cst::checkpoint_json(back), text);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "cst_test_ckpt.json";
  const TinyLM m = TinyLM::random(small_vocab(), kSmall, 2);
  cst::save_checkpoint(m, path);
  EXPECT_EQ(cst::checkpoint_json(cst::load_checkpoint(path)), cst::checkpoint_json(m));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsWrongVersionAndSize) {
  const TinyLM m(small_vocab(), kSmall);
  std::string text = cst::checkpoint_json(m);
  std::string bad = text;
  bad.replace(bad.find("\"format_version\":1"), 18, "\"format_version\":2");
  EXPECT_THROW(cst::parse_checkpoint(bad), cst::Error);
  auto doc = nlohmann::json::parse(text);
  doc["params"].erase(doc["params"].size() - 1);
  EXPECT_THROW(cst::parse_checkpoint(doc.dump()), cst::Error);
  EXPECT_THROW(cst::parse_checkpoint("not json"), cst::Error);
}

TEST(Checkpoint, Format17RoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(std::stod(cst::format_double17(x)), x);
  }
}

}  // namespace
