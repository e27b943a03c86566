#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <declab/model.hpp>

#include "helpers.hpp"

using namespace declab;
using namespace declab::lm;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

Vocabulary xy_vocab() { return Vocabulary({"x", "y"}); }

TabularMarkovModel xy_model() {
  TabularMarkovModel model(xy_vocab(), 1);
  model.set_row(std::vector<TokenId>{}, {std::log(0.2), std::log(0.8)});
  model.set_row(std::vector<TokenId>{0}, {std::log(0.5), std::log(0.5)});
  model.set_row(std::vector<TokenId>{1}, {std::log(0.7), std::log(0.3)});
  return model;
}

}  // namespace

TEST_CASE("tabular model row lookup") {
  auto model = xy_model();
  SECTION("empty context uses the root row") {
    auto logits = model.next_logits(std::vector<TokenId>{});
    REQUIRE(logits[0] == Approx(std::log(0.2)));
  }
  SECTION("long contexts key on the trailing window") {
    auto logits = model.next_logits(std::vector<TokenId>{0, 1});
    REQUIRE(logits[0] == Approx(std::log(0.7)));
  }
  SECTION("order zero always uses the root row") {
    TabularMarkovModel flat(xy_vocab(), 0);
    flat.set_row(std::vector<TokenId>{}, {1.0, -1.0});
    auto logits = flat.next_logits(std::vector<TokenId>{1, 0, 1});
    REQUIRE(logits[0] == 1.0);
  }
  SECTION("missing row is a model error") {
    TabularMarkovModel sparse(xy_vocab(), 1);
    sparse.set_row(std::vector<TokenId>{}, {0.0, 0.0});
    REQUIRE_THROWS_AS(sparse.next_logits(std::vector<TokenId>{0}), ModelError);
  }
}

TEST_CASE("tabular model row validation") {
  TabularMarkovModel model(xy_vocab(), 1);
  REQUIRE_THROWS_AS(model.set_row(std::vector<TokenId>{}, {1.0}), ParameterError);
  REQUIRE_THROWS_AS(model.set_row(std::vector<TokenId>{0, 1}, {1.0, 1.0}), ParameterError);
  REQUIRE_THROWS_AS(model.set_row(std::vector<TokenId>{}, {1.0, std::nan("")}), InputError);
}

TEST_CASE("tabular save and load round trip") {
  auto model = xy_model();
  auto dir = testutil::fresh_dir("model");
  auto path = dir / "xy.tsv";
  save_tabular(model, path);
  auto loaded = load_tabular(path);
  REQUIRE(loaded.vocab() == model.vocab());
  REQUIRE(loaded.rows() == model.rows());
}

TEST_CASE("tabular load reports the offending line") {
  auto dir = testutil::fresh_dir("model_err");
  auto path = testutil::write_file(dir / "bad.tsv",
                                   "vocab\tx y\n"
                                   "order\tnot-a-number\n");
  REQUIRE_THROWS_WITH(load_tabular(path), ContainsSubstring(":2:"));
  auto missing = dir / "missing.tsv";
  REQUIRE_THROWS_AS(load_tabular(missing), InputError);
}

TEST_CASE("bundled model tables load") {
  for (const char* name : {"spec4_target.tsv", "spec4_draft.tsv", "spec5_target.tsv",
                           "spec5_draft.tsv", "toy_target.tsv", "toy_draft.tsv"}) {
    auto model = load_tabular(testutil::data_path(name));
    REQUIRE(model.vocab().size() >= 4);
    REQUIRE(!model.rows().empty());
  }
}

TEST_CASE("ngram model from a tiny corpus") {
  SECTION("add-alpha counts on a b a b") {
    auto model = train_ngram("a b a b", 2, 0.5);
    // after "a": count(b)=2, alpha=.5, V=2 -> (2+.5)/(2+1)=5/6
    auto after_a = next_token_dist(model, std::vector<TokenId>{0}, SamplingParams{});
    REQUIRE(after_a.p[1] == Approx(0.8333333333333334).margin(1e-15));
    auto after_b = next_token_dist(model, std::vector<TokenId>{1}, SamplingParams{});
    REQUIRE(after_b.p[0] == Approx(0.75).margin(1e-15));
  }
  SECTION("unseen context falls back to the uniform prior") {
    auto model = train_ngram("a b", 3, 1.0);
    auto dist = next_token_dist(model, std::vector<TokenId>{1, 1}, SamplingParams{});
    REQUIRE(dist.p[0] == Approx(0.5).margin(1e-15));
    REQUIRE(dist.p[1] == Approx(0.5).margin(1e-15));
  }
  SECTION("training input validation") {
    REQUIRE_THROWS_AS(train_ngram("   ", 2, 1.0), InputError);
    REQUIRE_THROWS_AS(train_ngram("a b", 0, 1.0), ParameterError);
    REQUIRE_THROWS_AS(train_ngram("a b", 2, 0.0), ParameterError);
  }
  SECTION("the bundled corpus trains cleanly") {
    auto corpus = testutil::read_file(testutil::data_path("toy_corpus.txt"));
    auto model = train_ngram(corpus, 2, 1.0);
    REQUIRE(model.vocab().size() > 4);
  }
}

TEST_CASE("sequence scoring") {
  auto model = xy_model();
  std::vector<TokenId> seq{0, 1, 0};
  SECTION("chain-rule log probability") {
    auto score = sequence_log_prob(model, std::vector<TokenId>{}, seq, SamplingParams{});
    REQUIRE_FALSE(score.impossible);
    REQUIRE(score.log_prob == Approx(-2.6592600369327783).margin(1e-12));
  }
  SECTION("a filtered-out token marks the sequence impossible") {
    SamplingParams params;
    params.top_k = 1;  // root row keeps only y, so x is unreachable
    auto score = sequence_log_prob(model, std::vector<TokenId>{}, seq, params);
    REQUIRE(score.impossible);
    REQUIRE(std::isinf(score.log_prob));
  }
  SECTION("length-penalized ranking score") {
    REQUIRE(length_penalized_score(-2.0, 4, 1.0) == Approx(-0.5).margin(1e-15));
    REQUIRE(length_penalized_score(-2.0, 4, 0.5) == Approx(-1.0).margin(1e-15));
    REQUIRE_THROWS_AS(length_penalized_score(-2.0, 0, 1.0), ParameterError);
  }
}

TEST_CASE("context cursor") {
  auto model = xy_model();
  ContextCursor cursor(model, {0});
  REQUIRE(cursor.size() == 1);
  cursor.push(1);
  REQUIRE(cursor.size() == 2);
  REQUIRE(cursor.dist(SamplingParams{}).p[0] == Approx(0.7).margin(1e-12));
  cursor.truncate(1);
  REQUIRE(cursor.size() == 1);
  REQUIRE_THROWS_AS(cursor.truncate(5), ParameterError);
}

TEST_CASE("vocabulary basics") {
  Vocabulary vocab({"a", "b", "</s>"});
  REQUIRE(vocab.size() == 3);
  REQUIRE(vocab.require("b") == 1);
  REQUIRE(!vocab.find("zz").has_value());
  REQUIRE(vocab.is_stop(2));
  REQUIRE_FALSE(vocab.is_stop(0));
  REQUIRE(vocab.tokenize("a b a") == std::vector<TokenId>{0, 1, 0});
  REQUIRE_THROWS_AS(vocab.tokenize("a zz"), InputError);
  REQUIRE(vocab.detokenize(std::vector<TokenId>{0, 1, 2}) == "a b");
  REQUIRE_THROWS_AS(Vocabulary({"a", "a"}), InputError);
}
