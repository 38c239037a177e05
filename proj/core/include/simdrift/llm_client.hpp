#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simdrift/respondents.hpp"

namespace simdrift {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{16000};

  /// Delay before attempt `attempt` (1-based, so attempt 2 waits initial_backoff).
  std::chrono::milliseconds delay_before(int attempt) const;
  bool operator==(const RetryPolicy&) const = default;
};

/// Connection and sampling settings for an OpenAI-style chat-completions
/// endpoint. The API key is read from the environment variable named by
/// `api_key_env` at request time and never stored in configs.
struct LlmSettings {
  std::string base_url = "http://localhost:8000/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> top_k;
  std::optional<int> max_tokens;
  RetryPolicy retry;
  int max_in_flight = 8;
  int timeout_seconds = 120;

  void validate() const;
  bool operator==(const LlmSettings&) const = default;
};

void to_json(nlohmann::json& j, const LlmSettings& s);
void from_json(const nlohmann::json& j, LlmSettings& s);

/// Blocking chat-completions client with bounded retries (exponential
/// backoff on transport errors, 429 and 5xx) and a cap on concurrent
/// requests. Non-streaming only.
class ChatCompletionsClient {
 public:
  explicit ChatCompletionsClient(LlmSettings settings);

  /// Returns choices[0].message.content. Throws BackendError carrying one log
  /// line per attempt once retries are exhausted or on a non-retryable status.
  std::string complete(const std::vector<ChatMessage>& messages);

  nlohmann::json request_body(const std::vector<ChatMessage>& messages) const;

  /// Replaces the backoff sleep (tests use this to avoid real waits).
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper);

  const LlmSettings& settings() const noexcept { return settings_; }
  std::size_t attempts_made() const;
  int peak_in_flight() const;

 private:
  struct Attempt {
    bool ok = false;
    bool retryable = false;
    std::string content;
    std::string log;
  };
  Attempt attempt_once(const std::string& body);

  LlmSettings settings_;
  std::string scheme_host_port_;
  std::string path_;
  std::function<void(std::chrono::milliseconds)> sleeper_;

  mutable std::mutex mu_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
  int peak_in_flight_ = 0;
  std::size_t attempts_ = 0;
};

/// Simulated user backed by a chat model; every ask is one stateless request.
class LlmRespondent final : public Respondent {
 public:
  explicit LlmRespondent(std::shared_ptr<ChatCompletionsClient> client);
  std::string ask(const Session& session, const Question& question) override;
  std::string reply(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) override;

 private:
  std::shared_ptr<ChatCompletionsClient> client_;
};

class LlmAgent final : public ChatAgent {
 public:
  explicit LlmAgent(std::shared_ptr<ChatCompletionsClient> client);
  std::string respond(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) override;

 private:
  std::shared_ptr<ChatCompletionsClient> client_;
};

}  // namespace simdrift
