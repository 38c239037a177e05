#include "simdrift/llm_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "simdrift/errors.hpp"

namespace simdrift {
namespace {

// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("LLM base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  auto path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds{0};
  double d = static_cast<double>(initial_backoff.count());
  for (int i = 2; i < attempt; ++i) d *= multiplier;
  d = std::min(d, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds{static_cast<long long>(d)};
}

void LlmSettings::validate() const {
  if (model.empty()) throw ConfigError("llm backend: model is required");
  split_url(base_url);
  if (retry.max_attempts < 1) throw ConfigError("llm backend: max_attempts must be >= 1");
  if (max_in_flight < 1) throw ConfigError("llm backend: max_in_flight must be >= 1");
}

void to_json(nlohmann::json& j, const LlmSettings& s) {
  j = nlohmann::json{{"base_url", s.base_url},
                     {"model", s.model},
                     {"api_key_env", s.api_key_env},
                     {"max_attempts", s.retry.max_attempts},
                     {"initial_backoff_ms", s.retry.initial_backoff.count()},
                     {"backoff_multiplier", s.retry.multiplier},
                     {"max_backoff_ms", s.retry.max_backoff.count()},
                     {"max_in_flight", s.max_in_flight},
                     {"timeout_seconds", s.timeout_seconds}};
  if (s.temperature) j["temperature"] = *s.temperature;
  if (s.top_p) j["top_p"] = *s.top_p;
  if (s.top_k) j["top_k"] = *s.top_k;
  if (s.max_tokens) j["max_tokens"] = *s.max_tokens;
}

void from_json(const nlohmann::json& j, LlmSettings& s) {
  s = LlmSettings{};
  s.base_url = j.value("base_url", s.base_url);
  s.model = j.value("model", s.model);
  s.api_key_env = j.value("api_key_env", s.api_key_env);
  s.retry.max_attempts = j.value("max_attempts", s.retry.max_attempts);
  s.retry.initial_backoff = std::chrono::milliseconds{j.value("initial_backoff_ms", s.retry.initial_backoff.count())};
  s.retry.multiplier = j.value("backoff_multiplier", s.retry.multiplier);
  s.retry.max_backoff = std::chrono::milliseconds{j.value("max_backoff_ms", s.retry.max_backoff.count())};
  s.max_in_flight = j.value("max_in_flight", s.max_in_flight);
  s.timeout_seconds = j.value("timeout_seconds", s.timeout_seconds);
  if (j.contains("temperature")) s.temperature = j.at("temperature").get<double>();
  if (j.contains("top_p")) s.top_p = j.at("top_p").get<double>();
  if (j.contains("top_k")) s.top_k = j.at("top_k").get<int>();
  if (j.contains("max_tokens")) s.max_tokens = j.at("max_tokens").get<int>();
}

ChatCompletionsClient::ChatCompletionsClient(LlmSettings settings)
    : settings_(std::move(settings)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  settings_.validate();
  std::tie(scheme_host_port_, path_) = split_url(settings_.base_url);
  path_ += "/chat/completions";
}

void ChatCompletionsClient::set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
  sleeper_ = std::move(sleeper);
}

std::size_t ChatCompletionsClient::attempts_made() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

int ChatCompletionsClient::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_in_flight_;
}

nlohmann::json ChatCompletionsClient::request_body(const std::vector<ChatMessage>& messages) const {
  nlohmann::json body{{"model", settings_.model}, {"stream", false}, {"messages", nlohmann::json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  if (settings_.temperature) body["temperature"] = *settings_.temperature;
  if (settings_.top_p) body["top_p"] = *settings_.top_p;
  if (settings_.top_k && *settings_.top_k > 0) body["top_k"] = *settings_.top_k;
  if (settings_.max_tokens) body["max_tokens"] = *settings_.max_tokens;
  return body;
}

ChatCompletionsClient::Attempt ChatCompletionsClient::attempt_once(const std::string& body) {
  httplib::Client cli(scheme_host_port_);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(settings_.timeout_seconds);
  cli.set_write_timeout(30);
  httplib::Headers headers;
  if (const char* key = std::getenv(settings_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  Attempt a;
  auto res = cli.Post(path_, headers, body, "application/json");
  if (!res) {
    a.retryable = true;
    a.log = "transport error: " + httplib::to_string(res.error());
    return a;
  }
  if (res->status == 429 || res->status >= 500) {
    a.retryable = true;
    a.log = "http " + std::to_string(res->status);
    return a;
  }
  if (res->status < 200 || res->status >= 300) {
    a.log = "http " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    return a;
  }
  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty() ||
      !j["choices"][0].contains("message") || !j["choices"][0]["message"].contains("content") ||
      !j["choices"][0]["message"]["content"].is_string()) {
    a.retryable = true;
    a.log = "malformed response body";
    return a;
  }
  a.ok = true;
  a.content = j["choices"][0]["message"]["content"].get<std::string>();
  a.log = "ok";
  return a;
}

std::string ChatCompletionsClient::complete(const std::vector<ChatMessage>& messages) {
  const auto body = request_body(messages).dump();
  std::vector<std::string> log;
  for (int attempt = 1; attempt <= settings_.retry.max_attempts; ++attempt) {
    if (const auto delay = settings_.retry.delay_before(attempt); delay.count() > 0) sleeper_(delay);
    {
      std::unique_lock lock(mu_);
      slot_free_.wait(lock, [&] { return in_flight_ < settings_.max_in_flight; });
      ++in_flight_;
      ++attempts_;
      peak_in_flight_ = std::max(peak_in_flight_, in_flight_);
    }
    Attempt a;
    try {
      a = attempt_once(body);
    } catch (const std::exception& e) {
      a.retryable = true;
      a.log = std::string("exception: ") + e.what();
    }
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    slot_free_.notify_one();
    log.push_back("attempt " + std::to_string(attempt) + ": " + a.log);
    if (a.ok) return a.content;
    if (!a.retryable) break;
  }
  throw BackendError("chat completion failed after " + std::to_string(log.size()) + " attempt(s)", log);
}

LlmRespondent::LlmRespondent(std::shared_ptr<ChatCompletionsClient> client) : client_(std::move(client)) {
  if (!client_) throw ConfigError("llm respondent needs a client");
}

std::string LlmRespondent::ask(const Session& session, const Question& question) {
  return client_->complete(branch_messages(session, question));
}

std::string LlmRespondent::reply(const std::vector<ChatMessage>& conversation, const TrialSeed&) {
  return client_->complete(conversation);
}

LlmAgent::LlmAgent(std::shared_ptr<ChatCompletionsClient> client) : client_(std::move(client)) {
  if (!client_) throw ConfigError("llm agent needs a client");
}

std::string LlmAgent::respond(const std::vector<ChatMessage>& conversation, const TrialSeed&) {
  return client_->complete(conversation);
}

}  // namespace simdrift
