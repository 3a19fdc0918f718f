#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "rpeval/errors.hpp"
#include "rpeval/judges.hpp"

namespace rpeval {

using nlohmann::json;

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("backend " + cfg_.name + ": endpoint must be an http(s) URL");
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  origin_ = cfg_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : cfg_.endpoint.substr(path_start);
  const auto scheme = cfg_.endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("backend " + cfg_.name + ": unsupported scheme " + scheme);
}

HttpBackend::~HttpBackend() = default;

void HttpBackend::throttle() {
  if (cfg_.rate_limit_per_sec <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / cfg_.rate_limit_per_sec));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(rate_mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string HttpBackend::complete(const JudgeRequest& req) {
  std::string token;
  if (!cfg_.api_key_env.empty()) {
    const char* v = std::getenv(cfg_.api_key_env.c_str());
    if (!v || !*v) throw AuthError("backend " + cfg_.name + ": environment variable " + cfg_.api_key_env + " is not set");
    token = v;
  }
  throttle();

  httplib::Client cli(origin_);
  cli.set_connection_timeout(std::chrono::seconds(10));
  cli.set_read_timeout(std::chrono::seconds(cfg_.timeout_sec));
  cli.set_write_timeout(std::chrono::seconds(cfg_.timeout_sec));
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

  json body = {{"model", cfg_.model},
               {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
               {"temperature", req.sampling.temperature},
               {"top_p", req.sampling.top_p},
               {"max_tokens", req.sampling.max_tokens}};
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransientBackendError("backend " + cfg_.name + ": " + httplib::to_string(res.error()));
  const int status = res->status;
  if (status == 401 || status == 403) throw AuthError("backend " + cfg_.name + ": HTTP " + std::to_string(status));
  if (status == 408 || status == 429 || status >= 500) {
    throw TransientBackendError("backend " + cfg_.name + ": HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw PermanentBackendError("backend " + cfg_.name + ": HTTP " + std::to_string(status) + ": " + res->body);
  }
  auto j = json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw TransientBackendError("backend " + cfg_.name + ": response is not JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw PermanentBackendError("backend " + cfg_.name + ": message content is not text");
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw PermanentBackendError("backend " + cfg_.name + ": unexpected response shape");
  }
}

}  // namespace rpeval
