#pragma once

/**
 * mock_nli.hpp - fixture-driven NLI service for tests and offline runs.
 *
 * Speaks the documented /score protocol. Exact (premise, hypothesis)
 * pairs listed in the fixtures answer with their pinned scores; every
 * other pair falls back to either a fixed default verdict or the
 * rule-based oracle (the default), which makes the server a drop-in
 * stand-in for a real NLI model at toy scale.
 */

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "declab/common.hpp"
#include "declab/entail.hpp"
#include "declab/nli.hpp"

namespace declab::nli {

class MockNliServer {
 public:
  MockNliServer() { install_routes(); }

  ~MockNliServer() { stop(); }

  MockNliServer(const MockNliServer&) = delete;
  MockNliServer& operator=(const MockNliServer&) = delete;

  /** Pin the answer for one exact (premise, hypothesis) pair. */
  void add_fixture(std::string premise, std::string hypothesis, std::array<double, 3> scores) {
    fixtures_[{std::move(premise), std::move(hypothesis)}] = scores;
  }

  /** Answer unknown pairs with this fixed verdict instead of the rule oracle. */
  void set_default(std::array<double, 3> scores) { default_scores_ = scores; }

  /** Artificial handling delay, for exercising request coalescing. */
  void set_delay(std::chrono::milliseconds delay) { delay_ = delay; }

  /**
   * Fixture file shape:
   * {
   *   "model": "mock-nli/1",
   *   "default": {"mode": "rule"} | {"mode": "fixed", "scores": [c, n, e]},
   *   "pairs": [{"premise": "...", "hypothesis": "...", "scores": [c, n, e]}]
   * }
   */
  void load_fixtures(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("mock nli: cannot open fixtures '" + path.string() + "'");
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw InputError("mock nli: fixtures file is not JSON");
    if (doc.contains("model")) model_ = doc["model"].get<std::string>();
    if (doc.contains("default") && doc["default"].value("mode", "rule") == "fixed") {
      auto s = doc["default"]["scores"];
      set_default({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()});
    }
    for (const auto& pair : doc.value("pairs", nlohmann::json::array())) {
      auto s = pair.at("scores");
      add_fixture(pair.at("premise").get<std::string>(), pair.at("hypothesis").get<std::string>(),
                  {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()});
    }
  }

  /** Bind and serve on a background thread; returns the bound port. */
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    if (thread_.joinable()) throw ParameterError("mock nli: already running");
    host_ = host;
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw TransportError("mock nli: cannot bind to " + host);
    } else {
      if (!server_.bind_to_port(host, port))
        throw TransportError("mock nli: cannot bind to " + host + ":" + std::to_string(port));
      port_ = port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /** Serve on the calling thread until stop() (CLI entry point). */
  void run_blocking(const std::string& host, int port) {
    host_ = host;
    port_ = port;
    if (!server_.bind_to_port(host, port))
      throw TransportError("mock nli: cannot bind to " + host + ":" + std::to_string(port));
    server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string endpoint() const { return "http://" + host_ + ":" + std::to_string(port_); }
  std::size_t request_count() const { return request_count_.load(); }
  const std::string& model() const { return model_; }

 private:
  void install_routes() {
    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      ++request_count_;
      if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
      nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("premise") || !body.contains("hypothesis")) {
        res.status = 400;
        res.set_content(R"({"error":"expected {premise, hypothesis}"})", "application/json");
        return;
      }
      const auto premise = body["premise"].get<std::string>();
      const auto hypothesis = body["hypothesis"].get<std::string>();

      std::array<double, 3> scores{};
      auto it = fixtures_.find({premise, hypothesis});
      if (it != fixtures_.end()) {
        scores = it->second;
      } else if (default_scores_) {
        scores = *default_scores_;
      } else {
        scores = semantic::rule_based_verdict(premise, hypothesis).class_scores;
      }
      nlohmann::json out{{"model", model_},
                         {"contradiction", scores[0]},
                         {"neutral", scores[1]},
                         {"entailment", scores[2]}};
      res.set_content(out.dump(), "application/json");
    });
  }

  httplib::Server server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
  std::string model_ = "mock-nli/1";
  std::map<std::pair<std::string, std::string>, std::array<double, 3>> fixtures_;
  std::optional<std::array<double, 3>> default_scores_;
  std::chrono::milliseconds delay_{0};
  std::atomic<std::size_t> request_count_{0};
};

}  // namespace declab::nli
