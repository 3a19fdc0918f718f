#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpeval/metrics/rc_score.hpp"

namespace rpeval {

enum class JudgeKind { kRepair, kErc, kRc, kGenerate };

std::string_view to_string(JudgeKind k);

struct Sampling {
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1024;

  static Sampling from_json(const nlohmann::json& j, const Sampling& defaults);
  static Sampling from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  bool operator==(const Sampling&) const = default;
};

struct JudgeRequest {
  JudgeKind kind = JudgeKind::kErc;
  std::string prompt;
  Sampling sampling;
  int pass_index = 1;

  /// SHA-256 over a canonical encoding of (kind, prompt, sampling, pass_index).
  std::string idempotency_key() const;
};

enum class Provenance { kRemote, kCache, kMock };

std::string_view to_string(Provenance p);

struct JudgeReply {
  std::string text;
  Provenance provenance = Provenance::kMock;
  std::chrono::milliseconds latency{0};
  int attempt = 1;
};

/// A model endpoint that turns a prompt into reply text.
///
/// Implementations signal retryable trouble with TransientBackendError,
/// credential problems with AuthError and anything else that a retry cannot
/// fix with PermanentBackendError.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual const std::string& name() const = 0;
  /// Remote backends report Provenance::kRemote, local mocks kMock.
  virtual bool remote() const = 0;
  virtual std::string complete(const JudgeRequest& req) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{5000};

  std::chrono::milliseconds delay_before(int attempt) const;  ///< attempt >= 2
  static RetryPolicy from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Content-addressed reply store keyed by (backend name, idempotency key).
///
/// With a directory the layout is
///   <dir>/<backend>/<key[0:2]>/<key>.json   {"backend","key","kind","reply"}
/// and each record is written to a temporary file and renamed into place.
/// Without a directory the cache lives in memory only.
class ReplyCache {
 public:
  explicit ReplyCache(std::filesystem::path dir = {});

  std::optional<std::string> get(std::string_view backend, const std::string& key);
  void put(std::string_view backend, const std::string& key, JudgeKind kind, const std::string& reply);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path record_path(std::string_view backend, const std::string& key) const;

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::string> memory_;
};

/// Bounds the number of in-flight backend calls across all clients.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit);
  void acquire();
  void release();
  int limit() const noexcept { return limit_; }

 private:
  int limit_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

/// Counters shared by every client of a run.
struct CallStats {
  std::atomic<long> requests{0};
  std::atomic<long> cache_hits{0};
  std::atomic<long> backend_calls{0};
  std::atomic<long> remote_calls{0};
  std::atomic<long> failures{0};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// std::this_thread::sleep_for.
Sleeper real_sleeper();

/// Cache lookup, then up to policy.max_attempts backend calls with
/// exponential backoff between transient failures. Successful replies are
/// cached. Throws TransportError after exhaustion or a permanent failure,
/// AuthError (uncaught, unretried) on credential problems.
JudgeReply call(const JudgeRequest& req, JudgeBackend& backend, const RetryPolicy& policy, ReplyCache* cache = nullptr,
                ConcurrencyLimiter* limiter = nullptr, CallStats* stats = nullptr,
                const Sleeper& sleeper = real_sleeper());

/// A backend bundled with the run's cache, retry policy and limiter.
class JudgeClient {
 public:
  JudgeClient(std::shared_ptr<JudgeBackend> backend, RetryPolicy policy = {},
              std::shared_ptr<ReplyCache> cache = nullptr, std::shared_ptr<ConcurrencyLimiter> limiter = nullptr,
              std::shared_ptr<CallStats> stats = nullptr, Sleeper sleeper = real_sleeper());

  JudgeReply call(const JudgeRequest& req);
  const std::string& name() const { return backend_->name(); }
  JudgeBackend& backend() { return *backend_; }

 private:
  std::shared_ptr<JudgeBackend> backend_;
  RetryPolicy policy_;
  std::shared_ptr<ReplyCache> cache_;
  std::shared_ptr<ConcurrencyLimiter> limiter_;
  std::shared_ptr<CallStats> stats_;
  Sleeper sleeper_;
};

// ---------------------------------------------------------------------------
// Backends

/// Mock backend that computes replies with a function. The function may throw
/// backend errors to script failures.
class FunctionBackend final : public JudgeBackend {
 public:
  using Responder = std::function<std::string(const JudgeRequest&)>;
  FunctionBackend(std::string name, Responder responder);
  const std::string& name() const override { return name_; }
  bool remote() const override { return false; }
  std::string complete(const JudgeRequest& req) override;

 private:
  std::string name_;
  Responder responder_;
};

/// Mock backend reading `<dir>/<idempotency_key>.txt`. A missing fixture is a
/// permanent failure.
class FixtureBackend final : public JudgeBackend {
 public:
  FixtureBackend(std::string name, std::filesystem::path dir);
  const std::string& name() const override { return name_; }
  bool remote() const override { return false; }
  std::string complete(const JudgeRequest& req) override;

 private:
  std::string name_;
  std::filesystem::path dir_;
};

struct HttpBackendConfig {
  std::string name;
  std::string endpoint;     ///< full URL of an OpenAI-compatible chat completions route
  std::string model;
  std::string api_key_env;  ///< environment variable holding the bearer token; empty for none
  double rate_limit_per_sec = 0.0;  ///< 0 = unlimited
  int timeout_sec = 120;
};

/// OpenAI-compatible chat-completions client.
class HttpBackend final : public JudgeBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  ~HttpBackend() override;
  const std::string& name() const override { return cfg_.name; }
  bool remote() const override { return true; }
  std::string complete(const JudgeRequest& req) override;

 private:
  void throttle();

  HttpBackendConfig cfg_;
  std::string origin_;
  std::string path_;
  std::mutex rate_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
};

// ---------------------------------------------------------------------------
// RC verdict parsing

/// Reads {"agree_evidence": [...], "disagree_evidence": [...]} (a fenced or
/// embedded object is accepted). When `sources` is non-empty, spans that are
/// not verbatim substrings of some source are discarded. Flags are derived
/// from the surviving evidence. std::nullopt when the reply is unparseable.
std::optional<metrics::RcVerdict> parse_rc_verdict(const JudgeReply& reply,
                                                   std::span<const std::string> sources = {});

}  // namespace rpeval
