#pragma once

/**
 * nli.hpp - HTTP client for a natural-language-inference scoring
 * service, with a persistent verdict cache.
 *
 * Wire protocol (see docs/formats.md):
 *   POST {endpoint}/score
 *   request  {"premise": "...", "hypothesis": "..."}
 *   response {"model": "...", "contradiction": c, "neutral": n, "entailment": e}
 *
 * Transport failures (no response at all) are retried with exponential
 * backoff; a non-2xx status raises ServiceError and a malformed body
 * raises ProtocolError, both without retry since they are not transient.
 *
 * The cache is a single append-only text file with an in-memory index.
 * Keys hash (service identity, premise, hypothesis), in that order, so
 * verdicts are direction-sensitive and never bleed across services.
 */

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "declab/common.hpp"
#include "declab/entail.hpp"

namespace declab::nli {

// ============================================================
// Errors
// ============================================================

/** The service could not be reached at all. */
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** The service answered, but not in the documented shape. */
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** The service answered with a non-2xx status. */
class ServiceError : public std::runtime_error {
 public:
  explicit ServiceError(int status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// ============================================================
// Requests
// ============================================================

struct NliRequest {
  std::string premise;
  std::string hypothesis;

  /** Throws ParameterError when either side is empty after trimming. */
  void validate() const {
    auto blank = [](const std::string& s) {
      for (unsigned char c : s)
        if (!std::isspace(c)) return false;
      return true;
    };
    if (blank(premise)) throw ParameterError("nli request: empty premise");
    if (blank(hypothesis)) throw ParameterError("nli request: empty hypothesis");
  }
};

struct NliClientConfig {
  std::string endpoint;                 // e.g. http://127.0.0.1:8080
  std::string service_identity = "mock-nli/1";
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{100};
  std::chrono::seconds timeout{10};
};

// ============================================================
// Remote scoring
// ============================================================

/** One scoring round trip with retry on transport failure. */
inline semantic::EntailmentVerdict score_remote(const NliClientConfig& config,
                                                const NliRequest& request) {
  request.validate();
  if (config.endpoint.empty()) throw ParameterError("nli: endpoint not configured");

  nlohmann::json body{{"premise", request.premise}, {"hypothesis", request.hypothesis}};
  const std::string payload = body.dump();

  httplib::Result result;
  auto backoff = config.backoff_base;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    httplib::Client client(config.endpoint);
    client.set_connection_timeout(config.timeout);
    client.set_read_timeout(config.timeout);
    result = client.Post("/score", payload, "application/json");
    if (result) break;
    if (attempt == config.max_attempts)
      throw TransportError("nli: no response from " + config.endpoint + " after " +
                           std::to_string(config.max_attempts) + " attempts (" +
                           httplib::to_string(result.error()) + ")");
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }

  if (result->status < 200 || result->status >= 300)
    throw ServiceError(result->status,
                       "nli: service returned status " + std::to_string(result->status));

  nlohmann::json parsed = nlohmann::json::parse(result->body, nullptr, false);
  if (parsed.is_discarded()) throw ProtocolError("nli: response body is not JSON");
  for (const char* field : {"contradiction", "neutral", "entailment"})
    if (!parsed.contains(field) || !parsed[field].is_number())
      throw ProtocolError(std::string("nli: response missing numeric field '") + field + "'");

  std::array<double, 3> scores{parsed["contradiction"].get<double>(),
                               parsed["neutral"].get<double>(),
                               parsed["entailment"].get<double>()};
  const double sum = scores[0] + scores[1] + scores[2];
  if (!(sum > 0.0)) throw ProtocolError("nli: class scores have no mass");
  if (std::abs(sum - 1.0) > 1e-6)
    std::cerr << "nli: class scores sum to " << sum << ", renormalizing\n";
  try {
    return semantic::EntailmentVerdict::from_scores(scores);
  } catch (const InputError& e) {
    throw ProtocolError(std::string("nli: ") + e.what());
  }
}

// ============================================================
// Cache
// ============================================================

/** 128-bit FNV-1a over length-prefixed fields, as 32 hex characters. */
inline std::string cache_key(std::string_view service_identity, std::string_view premise,
                             std::string_view hypothesis) {
  unsigned __int128 h = (static_cast<unsigned __int128>(0x6c62272e07bb0142ull) << 64) |
                        0x62b821756295c58dull;
  const unsigned __int128 prime = (static_cast<unsigned __int128>(0x0000000001000000ull) << 64) |
                                  0x000000000000013bull;
  auto feed = [&](std::string_view s) {
    // length prefix removes concatenation ambiguity between fields
    std::uint64_t len = s.size();
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<unsigned char>(len >> (8 * i));
      h *= prime;
    }
    for (unsigned char c : s) {
      h ^= c;
      h *= prime;
    }
  };
  feed(service_identity);
  feed(premise);
  feed(hypothesis);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(h >> 64),
                static_cast<unsigned long long>(h & 0xffffffffffffffffull));
  return buf;
}

/**
 * Append-only verdict store. One line per entry:
 *   v1 <TAB> key <TAB> label <TAB> c <TAB> n <TAB> e <TAB> stored_at
 * Corrupt lines are skipped with a warning on load, so a truncated tail
 * never poisons the rest of the file. Thread-safe.
 */
class VerdictCache {
 public:
  explicit VerdictCache(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty()) throw ParameterError("cache: empty path");
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    load();
    out_.open(path_, std::ios::app);
    if (!out_) throw InputError("cache: cannot open '" + path_.string() + "' for append");
  }

  std::optional<semantic::EntailmentVerdict> lookup(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void store(const std::string& key, const semantic::EntailmentVerdict& verdict) {
    std::lock_guard lock(mutex_);
    entries_[key] = verdict;
    char buf[160];
    std::snprintf(buf, sizeof buf, "v1\t%s\t%d\t%.17g\t%.17g\t%.17g\t%lld\n", key.c_str(),
                  static_cast<int>(verdict.label), verdict.class_scores[0],
                  verdict.class_scores[1], verdict.class_scores[2],
                  static_cast<long long>(std::time(nullptr)));
    out_ << buf;
    out_.flush();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  void load() {
    std::ifstream in(path_);
    if (!in) return;  // fresh cache
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string tag, key;
      int label = 0;
      double c = 0, n = 0, e = 0;
      long long ts = 0;
      if (!(std::getline(ss, tag, '\t') && std::getline(ss, key, '\t') && (ss >> label) &&
            (ss >> c) && (ss >> n) && (ss >> e) && (ss >> ts)) ||
          tag != "v1" || key.size() != 32 || label < 0 || label > 2) {
        std::cerr << "cache: skipping corrupt line " << line_no << " in " << path_ << "\n";
        continue;
      }
      semantic::EntailmentVerdict v;
      v.label = static_cast<semantic::EntailmentLabel>(label);
      v.class_scores = {c, n, e};
      try {
        v.validate();
      } catch (const InputError&) {
        std::cerr << "cache: skipping corrupt line " << line_no << " in " << path_ << "\n";
        continue;
      }
      entries_[key] = v;
    }
  }

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, semantic::EntailmentVerdict> entries_;
  std::ofstream out_;
};

// ============================================================
// Cached client
// ============================================================

/**
 * Write-through cached scorer with request coalescing: concurrent
 * callers asking for the same key share one remote call.
 */
class NliClient {
 public:
  NliClient(NliClientConfig config, std::filesystem::path cache_path)
      : config_(std::move(config)), cache_(std::move(cache_path)) {}

  semantic::EntailmentVerdict score(const NliRequest& request) {
    request.validate();
    const std::string key = cache_key(config_.service_identity, request.premise, request.hypothesis);

    std::unique_lock lock(mutex_);
    for (;;) {
      if (auto hit = cache_.lookup(key)) return *hit;
      if (!inflight_.count(key)) break;
      ready_.wait(lock);
    }
    inflight_.insert(key);
    lock.unlock();

    semantic::EntailmentVerdict verdict;
    try {
      verdict = score_remote(config_, request);
      ++remote_calls_;
    } catch (...) {
      lock.lock();
      inflight_.erase(key);
      ready_.notify_all();
      throw;
    }

    lock.lock();
    cache_.store(key, verdict);
    inflight_.erase(key);
    ready_.notify_all();
    return verdict;
  }

  std::size_t remote_calls() const { return remote_calls_.load(); }
  const VerdictCache& cache() const { return cache_; }

 private:
  NliClientConfig config_;
  VerdictCache cache_;
  std::mutex mutex_;
  std::condition_variable ready_;
  std::set<std::string> inflight_;
  std::atomic<std::size_t> remote_calls_{0};
};

/** Expose a cached client behind the clustering oracle interface. */
class RemoteOracle final : public semantic::EquivalenceOracle {
 public:
  explicit RemoteOracle(NliClient& client) : client_(&client) {}
  semantic::EntailmentVerdict judge(const std::string& premise,
                                    const std::string& hypothesis) override {
    return client_->score(NliRequest{premise, hypothesis});
  }

 private:
  NliClient* client_;
};

inline std::unique_ptr<semantic::EquivalenceOracle> as_equivalence_oracle(NliClient& client) {
  return std::make_unique<RemoteOracle>(client);
}

}  // namespace declab::nli
