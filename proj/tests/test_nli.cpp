#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <declab/mock_nli.hpp>
#include <declab/nli.hpp>

#include "helpers.hpp"

using namespace declab;
using namespace declab::nli;
using Catch::Approx;

namespace {

struct ServerGuard {
  MockNliServer server;
  ~ServerGuard() { server.stop(); }
};

NliClientConfig fast_config(const std::string& endpoint) {
  NliClientConfig config;
  config.endpoint = endpoint;
  config.max_attempts = 2;
  config.backoff_base = std::chrono::milliseconds(1);
  config.timeout = std::chrono::seconds(2);
  return config;
}

}  // namespace

TEST_CASE("cache keys") {
  auto key = cache_key("svc", "premise", "hypothesis");
  REQUIRE(key.size() == 32);
  REQUIRE(key.find_first_not_of("0123456789abcdef") == std::string::npos);
  // length prefixing keeps field boundaries unambiguous
  REQUIRE(cache_key("svc", "ab", "c") != cache_key("svc", "a", "bc"));
  REQUIRE(cache_key("svc-a", "p", "h") != cache_key("svc-b", "p", "h"));
  REQUIRE(cache_key("svc", "p", "h") == cache_key("svc", "p", "h"));
}

TEST_CASE("verdict cache persists across instances") {
  auto dir = testutil::fresh_dir("cache");
  auto path = dir / "verdicts.tsv";
  auto key = cache_key("svc", "p", "h");
  semantic::EntailmentVerdict verdict;
  verdict.label = semantic::EntailmentLabel::Entailment;
  verdict.class_scores = {0.1, 0.2, 0.7};
  {
    VerdictCache cache(path);
    REQUIRE(!cache.lookup(key).has_value());
    cache.store(key, verdict);
    REQUIRE(cache.lookup(key).has_value());
  }
  VerdictCache reloaded(path);
  auto hit = reloaded.lookup(key);
  REQUIRE(hit.has_value());
  REQUIRE(hit->label == semantic::EntailmentLabel::Entailment);
  REQUIRE(hit->class_scores[2] == Approx(0.7).margin(1e-12));

  REQUIRE(testutil::read_file(path).rfind("v1\t", 0) == 0);
}

TEST_CASE("corrupt cache lines are skipped, valid ones survive") {
  auto dir = testutil::fresh_dir("cache_corrupt");
  auto path = dir / "verdicts.tsv";
  auto key = cache_key("svc", "p", "h");
  {
    VerdictCache cache(path);
    semantic::EntailmentVerdict verdict;
    verdict.label = semantic::EntailmentLabel::Neutral;
    verdict.class_scores = {0.2, 0.6, 0.2};
    cache.store(key, verdict);
  }
  std::ofstream(path, std::ios::app) << "v1\ttruncated-garbage\n"
                                     << "not-a-record\n";
  VerdictCache cache(path);
  REQUIRE(cache.size() == 1);
  REQUIRE(cache.lookup(key).has_value());
}

TEST_CASE("mock server scores fixtures and falls back to the rule") {
  ServerGuard guard;
  guard.server.add_fixture("it rains", "the ground is wet", {0.1, 0.2, 0.7});
  int port = guard.server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  auto config = fast_config(guard.server.endpoint());

  auto fixture = score_remote(config, NliRequest{"it rains", "the ground is wet"});
  REQUIRE(fixture.label == semantic::EntailmentLabel::Entailment);
  REQUIRE(fixture.class_scores[2] == Approx(0.7).margin(1e-9));

  auto rule = score_remote(config, NliRequest{"same words here", "same words here"});
  REQUIRE(rule.label == semantic::EntailmentLabel::Entailment);
  REQUIRE(guard.server.request_count() == 2);
}

TEST_CASE("bundled fixtures load") {
  ServerGuard guard;
  guard.server.load_fixtures(testutil::data_path("nli_fixtures.json"));
  guard.server.start("127.0.0.1", 0);
  auto config = fast_config(guard.server.endpoint());
  auto verdict = score_remote(config, NliRequest{"the sky is blue", "the sky has a blue color"});
  REQUIRE(verdict.label == semantic::EntailmentLabel::Entailment);
  REQUIRE(verdict.class_scores[2] == Approx(0.8).margin(1e-9));
  auto contra = score_remote(config, NliRequest{"the sky is blue", "the sky is green"});
  REQUIRE(contra.label == semantic::EntailmentLabel::Contradiction);
}

TEST_CASE("malformed request bodies get a 400") {
  ServerGuard guard;
  guard.server.start("127.0.0.1", 0);
  httplib::Client http("127.0.0.1", guard.server.port());
  auto res = http.Post("/score", "this is not json", "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 400);
}

TEST_CASE("service failures are not retried as transport failures") {
  httplib::Server broken;
  broken.Post("/score", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  int port = broken.bind_to_any_port("127.0.0.1");
  std::thread runner([&] { broken.listen_after_bind(); });
  broken.wait_until_ready();
  auto config = fast_config("http://127.0.0.1:" + std::to_string(port));
  REQUIRE_THROWS_AS(score_remote(config, NliRequest{"p", "h"}), ServiceError);
  broken.stop();
  runner.join();
}

TEST_CASE("protocol violations are reported, not retried") {
  httplib::Server weird;
  std::string body = "not json";
  weird.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(body, "application/json");
  });
  int port = weird.bind_to_any_port("127.0.0.1");
  std::thread runner([&] { weird.listen_after_bind(); });
  weird.wait_until_ready();
  auto config = fast_config("http://127.0.0.1:" + std::to_string(port));

  REQUIRE_THROWS_AS(score_remote(config, NliRequest{"p", "h"}), ProtocolError);
  body = R"({"model":"m","entailment":0.5})";
  REQUIRE_THROWS_AS(score_remote(config, NliRequest{"p", "h"}), ProtocolError);
  body = R"({"contradiction":0.0,"neutral":0.0,"entailment":0.0})";
  REQUIRE_THROWS_AS(score_remote(config, NliRequest{"p", "h"}), ProtocolError);
  weird.stop();
  runner.join();
}

TEST_CASE("unreachable endpoints raise a transport error after retries") {
  auto config = fast_config("http://127.0.0.1:1");
  config.timeout = std::chrono::seconds(1);
  REQUIRE_THROWS_AS(score_remote(config, NliRequest{"p", "h"}), TransportError);
}

TEST_CASE("request validation") {
  REQUIRE_THROWS_AS((NliRequest{"", "h"}.validate()), ParameterError);
  REQUIRE_THROWS_AS((NliRequest{"p", "  \t"}.validate()), ParameterError);
  NliClientConfig config;
  REQUIRE_THROWS_AS(score_remote(config, NliRequest{"p", "h"}), ParameterError);
}

TEST_CASE("client caches verdicts on disk") {
  ServerGuard guard;
  guard.server.start("127.0.0.1", 0);
  auto dir = testutil::fresh_dir("client_cache");
  auto cache_path = dir / "verdicts.tsv";
  auto config = fast_config(guard.server.endpoint());
  {
    NliClient client(config, cache_path);
    auto first = client.score(NliRequest{"alpha beta", "alpha beta"});
    auto second = client.score(NliRequest{"alpha beta", "alpha beta"});
    REQUIRE(first.label == second.label);
    REQUIRE(client.remote_calls() == 1);
    REQUIRE(guard.server.request_count() == 1);
  }
  NliClient fresh(config, cache_path);
  fresh.score(NliRequest{"alpha beta", "alpha beta"});
  REQUIRE(fresh.remote_calls() == 0);
  REQUIRE(guard.server.request_count() == 1);
}

TEST_CASE("concurrent identical requests coalesce into one call") {
  ServerGuard guard;
  guard.server.set_delay(std::chrono::milliseconds(100));
  guard.server.start("127.0.0.1", 0);
  auto dir = testutil::fresh_dir("coalesce");
  NliClient client(fast_config(guard.server.endpoint()), dir / "verdicts.tsv");

  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] { client.score(NliRequest{"slow premise", "slow hypothesis"}); });
  for (auto& t : threads) t.join();
  REQUIRE(client.remote_calls() == 1);
  REQUIRE(guard.server.request_count() == 1);
}

TEST_CASE("the client doubles as a clustering oracle") {
  ServerGuard guard;
  guard.server.start("127.0.0.1", 0);
  auto dir = testutil::fresh_dir("oracle");
  NliClient client(fast_config(guard.server.endpoint()), dir / "verdicts.tsv");
  auto oracle = as_equivalence_oracle(client);
  REQUIRE(oracle->judge("same answer", "same answer").label ==
          semantic::EntailmentLabel::Entailment);
}
