#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "simdrift/respondents.hpp"

namespace simdrift {

/// Write-once answer cache keyed by (TrialSeed, question text), persisted as
/// JSONL lines of {"key": {...}, "question", "answer", "hash"}. Safe for
/// concurrent use.
class ReplayStore {
 public:
  /// Memory-only store.
  ReplayStore() = default;
  /// Loads `path` if it exists; new entries are appended to it.
  explicit ReplayStore(std::filesystem::path path);

  std::optional<std::string> lookup(const TrialSeed& key, std::string_view question) const;

  /// Stores `answer`. Re-recording an identical value is a no-op; a different
  /// value under an existing key throws ConflictError.
  void record(const TrialSeed& key, std::string_view question, std::string_view answer);

  std::size_t size() const;

  /// Content address of a key: hex FNV-1a of its canonical JSON.
  static std::string content_hash(const TrialSeed& key, std::string_view question);

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> entries_;
};

/// Answers from a ReplayStore. On a miss it asks `upstream` and records the
/// answer, or throws BackendError when there is no upstream.
class ReplayRespondent final : public Respondent {
 public:
  ReplayRespondent(std::shared_ptr<ReplayStore> store, std::shared_ptr<Respondent> upstream = nullptr);

  std::string ask(const Session& session, const Question& question) override;
  std::string reply(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) override;
  std::optional<DiscreteDistribution> exact_answer(const Session& session,
                                                   const Question& question) const override;
  std::optional<PersonaOracle> oracle(const AugmentedPersona& persona,
                                      const QuestionBank& bank) const override;

 private:
  std::shared_ptr<ReplayStore> store_;
  std::shared_ptr<Respondent> upstream_;
};

class ReplayAgent final : public ChatAgent {
 public:
  ReplayAgent(std::shared_ptr<ReplayStore> store, std::shared_ptr<ChatAgent> upstream = nullptr);
  std::string respond(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) override;

 private:
  std::shared_ptr<ReplayStore> store_;
  std::shared_ptr<ChatAgent> upstream_;
};

}  // namespace simdrift
