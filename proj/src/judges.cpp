#include "rpeval/judges.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "rpeval/corpus.hpp"
#include "rpeval/digest.hpp"
#include "rpeval/errors.hpp"
#include "rpeval/json_extract.hpp"

namespace rpeval {

using nlohmann::json;

std::string_view to_string(JudgeKind k) {
  switch (k) {
    case JudgeKind::kRepair: return "repair";
    case JudgeKind::kErc: return "erc";
    case JudgeKind::kRc: return "rc";
    case JudgeKind::kGenerate: return "generate";
  }
  return "unknown";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kRemote: return "remote";
    case Provenance::kCache: return "cache";
    case Provenance::kMock: return "mock";
  }
  return "unknown";
}

Sampling Sampling::from_json(const json& j, const Sampling& defaults) {
  Sampling s = defaults;
  if (j.is_null()) return s;
  if (!j.is_object()) throw ConfigError("sampling must be an object");
  try {
    s.temperature = j.value("temperature", s.temperature);
    s.top_p = j.value("top_p", s.top_p);
    s.max_tokens = j.value("max_tokens", s.max_tokens);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sampling: ") + e.what());
  }
  return s;
}

Sampling Sampling::from_json(const json& j) { return from_json(j, Sampling{}); }

json Sampling::to_json() const {
  return {{"temperature", temperature}, {"top_p", top_p}, {"max_tokens", max_tokens}};
}

std::string JudgeRequest::idempotency_key() const {
  json j = {{"kind", to_string(kind)}, {"prompt", prompt}, {"sampling", sampling.to_json()}, {"pass", pass_index}};
  return sha256_hex(j.dump());
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds(0);
  const double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, attempt - 2);
  return std::chrono::milliseconds(
      static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
}

RetryPolicy RetryPolicy::from_json(const json& j) {
  RetryPolicy p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw ConfigError("retry must be an object");
  try {
    p.max_attempts = j.value("max_attempts", p.max_attempts);
    p.base_delay = std::chrono::milliseconds(j.value("base_delay_ms", p.base_delay.count()));
    p.multiplier = j.value("multiplier", p.multiplier);
    p.max_delay = std::chrono::milliseconds(j.value("max_delay_ms", p.max_delay.count()));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("retry: ") + e.what());
  }
  if (p.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  return p;
}

json RetryPolicy::to_json() const {
  return {{"max_attempts", max_attempts},
          {"base_delay_ms", base_delay.count()},
          {"multiplier", multiplier},
          {"max_delay_ms", max_delay.count()}};
}

// ---------------------------------------------------------------------------

namespace {

std::string sanitize(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace

ReplyCache::ReplyCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
  }
}

std::filesystem::path ReplyCache::record_path(std::string_view backend, const std::string& key) const {
  return dir_ / sanitize(backend) / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ReplyCache::get(std::string_view backend, const std::string& key) {
  const std::string mem_key = std::string(backend) + '\n' + key;
  {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(mem_key); it != memory_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  std::ifstream in(record_path(backend, key));
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("key", "") != key || !j.contains("reply") ||
      !j["reply"].is_string()) {
    spdlog::warn("ignoring corrupt cache record for {} key {}", backend, key);
    return std::nullopt;
  }
  std::string reply = j["reply"].get<std::string>();
  std::lock_guard lock(mu_);
  memory_.emplace(mem_key, reply);
  return reply;
}

void ReplyCache::put(std::string_view backend, const std::string& key, JudgeKind kind, const std::string& reply) {
  {
    std::lock_guard lock(mu_);
    memory_[std::string(backend) + '\n' + key] = reply;
  }
  if (dir_.empty()) return;
  const auto path = record_path(backend, key);
  std::filesystem::create_directories(path.parent_path());
  std::ostringstream tid;
  tid << std::this_thread::get_id();
  const auto tmp = path.parent_path() / (key + ".tmp." + tid.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write cache record " + tmp.string());
    json j = {{"backend", backend}, {"key", key}, {"kind", to_string(kind)}, {"reply", reply}};
    out << j.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

ConcurrencyLimiter::ConcurrencyLimiter(int limit) : limit_(std::max(1, limit)) {}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

JudgeReply call(const JudgeRequest& req, JudgeBackend& backend, const RetryPolicy& policy, ReplyCache* cache,
                ConcurrencyLimiter* limiter, CallStats* stats, const Sleeper& sleeper) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string key = req.idempotency_key();
  if (stats) ++stats->requests;
  if (cache) {
    if (auto hit = cache->get(backend.name(), key)) {
      if (stats) ++stats->cache_hits;
      return JudgeReply{*hit, Provenance::kCache,
                        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0),
                        1};
    }
  }
  std::string last_error;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (attempt > 1) sleeper(policy.delay_before(attempt));
    if (limiter) limiter->acquire();
    std::optional<std::string> text;
    bool permanent = false;
    try {
      if (stats) {
        ++stats->backend_calls;
        if (backend.remote()) ++stats->remote_calls;
      }
      text = backend.complete(req);
    } catch (const AuthError&) {
      if (limiter) limiter->release();
      throw;
    } catch (const TransientBackendError& e) {
      last_error = e.what();
    } catch (const PermanentBackendError& e) {
      last_error = e.what();
      permanent = true;
    } catch (...) {
      if (limiter) limiter->release();
      throw;
    }
    if (limiter) limiter->release();
    if (text) {
      if (cache) cache->put(backend.name(), key, req.kind, *text);
      return JudgeReply{std::move(*text), backend.remote() ? Provenance::kRemote : Provenance::kMock,
                        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0),
                        attempt};
    }
    spdlog::debug("{} {} attempt {} failed: {}", backend.name(), to_string(req.kind), attempt, last_error);
    if (permanent) {
      if (stats) ++stats->failures;
      throw TransportError(backend.name() + ": " + last_error, attempt);
    }
  }
  if (stats) ++stats->failures;
  throw TransportError(backend.name() + ": retries exhausted after " + std::to_string(policy.max_attempts) +
                           " attempts: " + last_error,
                       policy.max_attempts);
}

JudgeClient::JudgeClient(std::shared_ptr<JudgeBackend> backend, RetryPolicy policy, std::shared_ptr<ReplyCache> cache,
                         std::shared_ptr<ConcurrencyLimiter> limiter, std::shared_ptr<CallStats> stats,
                         Sleeper sleeper)
    : backend_(std::move(backend)),
      policy_(policy),
      cache_(std::move(cache)),
      limiter_(std::move(limiter)),
      stats_(std::move(stats)),
      sleeper_(std::move(sleeper)) {
  if (!backend_) throw ConfigError("JudgeClient: null backend");
}

JudgeReply JudgeClient::call(const JudgeRequest& req) {
  return rpeval::call(req, *backend_, policy_, cache_.get(), limiter_.get(), stats_.get(), sleeper_);
}

// ---------------------------------------------------------------------------

FunctionBackend::FunctionBackend(std::string name, Responder responder)
    : name_(std::move(name)), responder_(std::move(responder)) {}

std::string FunctionBackend::complete(const JudgeRequest& req) { return responder_(req); }

FixtureBackend::FixtureBackend(std::string name, std::filesystem::path dir)
    : name_(std::move(name)), dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) throw ConfigError("fixture directory not found: " + dir_.string());
}

std::string FixtureBackend::complete(const JudgeRequest& req) {
  const auto path = dir_ / (req.idempotency_key() + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PermanentBackendError("no fixture " + path.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::vector<std::string>> evidence_list(const json& obj, std::initializer_list<const char*> keys,
                                                      bool& found) {
  for (const char* k : keys) {
    if (!obj.contains(k)) continue;
    found = true;
    const json& v = obj.at(k);
    std::vector<std::string> out;
    if (v.is_null()) return out;
    if (!v.is_array()) return std::nullopt;
    for (const auto& e : v) {
      if (e.is_string()) {
        out.push_back(e.get<std::string>());
      } else if (e.is_object() && e.contains("quote") && e["quote"].is_string()) {
        out.push_back(e["quote"].get<std::string>());
      } else {
        return std::nullopt;
      }
    }
    return out;
  }
  return std::vector<std::string>{};
}

}  // namespace

std::optional<metrics::RcVerdict> parse_rc_verdict(const JudgeReply& reply, std::span<const std::string> sources) {
  for (const auto& obj : object_candidates(reply.text)) {
    bool found_agree = false;
    bool found_disagree = false;
    auto agree = evidence_list(obj, {"agree_evidence", "agree_evidences", "agree", "supporting_evidence"}, found_agree);
    auto disagree = evidence_list(
        obj, {"disagree_evidence", "disagree_evidences", "disagree", "contradicting_evidence"}, found_disagree);
    if (!found_agree && !found_disagree) continue;
    if (!agree || !disagree) return std::nullopt;
    auto keep = [&](std::vector<std::string>& spans) {
      std::vector<std::string> kept;
      for (auto& s : spans) {
        std::string t = trim_text(s);
        if (t.empty()) continue;
        const bool verbatim =
            sources.empty() ||
            std::any_of(sources.begin(), sources.end(), [&](const std::string& src) { return src.find(t) != std::string::npos; });
        if (verbatim) kept.push_back(std::move(t));
      }
      spans = std::move(kept);
    };
    keep(*agree);
    keep(*disagree);
    return metrics::RcVerdict::from_evidence(std::move(*agree), std::move(*disagree));
  }
  return std::nullopt;
}

}  // namespace rpeval
