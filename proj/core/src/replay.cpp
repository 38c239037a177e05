#include "simdrift/replay.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "simdrift/errors.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {
namespace {

nlohmann::json key_json(const TrialSeed& k) {
  return nlohmann::json{{"master", k.master},       {"persona", k.persona_id}, {"iteration", k.iteration},
                        {"arm", k.arm},             {"trial", k.trial},        {"question_id", k.question_id}};
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string ReplayStore::content_hash(const TrialSeed& key, std::string_view question) {
  const nlohmann::json canonical{{"key", key_json(key)}, {"question", question}};
  return hex(stable_hash(canonical.dump()));
}

ReplayStore::ReplayStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& k = j.at("key");
      TrialSeed key{k.at("master").get<std::uint64_t>(), k.at("persona").get<std::string>(),
                    k.at("iteration").get<int>(),         k.at("arm").get<int>(),
                    k.at("trial").get<int>(),             k.at("question_id").get<std::string>()};
      const auto hash = content_hash(key, j.at("question").get<std::string>());
      const auto answer = j.at("answer").get<std::string>();
      const auto [it, inserted] = entries_.emplace(hash, answer);
      if (!inserted && it->second != answer) {
        throw ConflictError("replay store line " + std::to_string(lineno) + ": conflicting answer");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("replay store " + path_->string() + " line " + std::to_string(lineno) + ": " +
                      e.what());
    }
  }
}

std::optional<std::string> ReplayStore::lookup(const TrialSeed& key, std::string_view question) const {
  const auto hash = content_hash(key, question);
  std::lock_guard lock(mu_);
  const auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReplayStore::record(const TrialSeed& key, std::string_view question, std::string_view answer) {
  const auto hash = content_hash(key, question);
  std::lock_guard lock(mu_);
  const auto it = entries_.find(hash);
  if (it != entries_.end()) {
    if (it->second == answer) return;
    throw ConflictError("replay store: key " + hash + " already holds a different answer");
  }
  entries_.emplace(hash, std::string(answer));
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw DataError("replay store: cannot append to " + path_->string());
    out << nlohmann::json{{"key", key_json(key)}, {"question", question}, {"answer", answer}, {"hash", hash}}.dump()
        << '\n';
  }
}

std::size_t ReplayStore::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

ReplayRespondent::ReplayRespondent(std::shared_ptr<ReplayStore> store, std::shared_ptr<Respondent> upstream)
    : store_(std::move(store)), upstream_(std::move(upstream)) {
  if (!store_) throw ConfigError("replay respondent needs a store");
}

std::string ReplayRespondent::ask(const Session& session, const Question& question) {
  const auto key = session.seed.with_question(question.id);
  const auto prompt = render_question(resolve_question(question, session.placeholders));
  if (auto hit = store_->lookup(key, prompt)) return *hit;
  if (!upstream_) {
    throw BackendError("replay miss for persona " + key.persona_id + ", question " + question.id);
  }
  auto answer = upstream_->ask(session, question);
  store_->record(key, prompt, answer);
  return answer;
}

std::string ReplayRespondent::reply(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) {
  if (auto hit = store_->lookup(seed, "")) return *hit;
  if (!upstream_) throw BackendError("replay miss for dialogue turn " + seed.question_id);
  auto answer = upstream_->reply(conversation, seed);
  store_->record(seed, "", answer);
  return answer;
}

std::optional<DiscreteDistribution> ReplayRespondent::exact_answer(const Session& session,
                                                                   const Question& question) const {
  return upstream_ ? upstream_->exact_answer(session, question) : std::nullopt;
}

std::optional<PersonaOracle> ReplayRespondent::oracle(const AugmentedPersona& persona,
                                                      const QuestionBank& bank) const {
  return upstream_ ? upstream_->oracle(persona, bank) : std::nullopt;
}

ReplayAgent::ReplayAgent(std::shared_ptr<ReplayStore> store, std::shared_ptr<ChatAgent> upstream)
    : store_(std::move(store)), upstream_(std::move(upstream)) {
  if (!store_) throw ConfigError("replay agent needs a store");
}

std::string ReplayAgent::respond(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) {
  if (auto hit = store_->lookup(seed, "")) return *hit;
  if (!upstream_) throw BackendError("replay miss for agent turn " + seed.question_id);
  auto answer = upstream_->respond(conversation, seed);
  store_->record(seed, "", answer);
  return answer;
}

}  // namespace simdrift
