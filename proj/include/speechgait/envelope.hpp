#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "speechgait/errors.hpp"
#include "speechgait/intent.hpp"

namespace speechgait {

/// One command on the wire: a UTF-8 JSON object
/// {"type": "intent"|"text", "payload": ..., "ts_ms": ..., "seq": ...}.
/// ts_ms and seq are optional; without seq there is no duplicate filtering.
struct CommandEnvelope {
  enum class Type { intent, text };

  Type type = Type::text;
  std::string payload;
  std::int64_t ts_ms = 0;
  std::optional<std::uint64_t> seq;
  std::string sender; ///< optional; transports fall back to the peer address
};

inline CommandEnvelope parse_envelope(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("envelope is not JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ParseError("envelope must be a JSON object");

  CommandEnvelope env;
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string())
    throw ParseError("envelope needs a string 'type'");
  if (*type == "intent")
    env.type = CommandEnvelope::Type::intent;
  else if (*type == "text")
    env.type = CommandEnvelope::Type::text;
  else
    throw ParseError("envelope type must be 'intent' or 'text'");

  const auto payload = j.find("payload");
  if (payload == j.end() || !payload->is_string())
    throw ParseError("envelope needs a string 'payload'");
  env.payload = payload->get<std::string>();

  if (const auto ts = j.find("ts_ms"); ts != j.end()) {
    if (!ts->is_number_integer())
      throw ParseError("envelope 'ts_ms' must be an integer");
    env.ts_ms = ts->get<std::int64_t>();
  }
  if (const auto seq = j.find("seq"); seq != j.end()) {
    if (!seq->is_number_unsigned())
      throw ParseError("envelope 'seq' must be a non-negative integer");
    env.seq = seq->get<std::uint64_t>();
  }
  if (const auto sender = j.find("sender"); sender != j.end()) {
    if (!sender->is_string())
      throw ParseError("envelope 'sender' must be a string");
    env.sender = sender->get<std::string>();
  }
  return env;
}

inline std::string serialize(const CommandEnvelope& env) {
  nlohmann::json j = {{"type", env.type == CommandEnvelope::Type::intent ? "intent" : "text"},
                      {"payload", env.payload},
                      {"ts_ms", env.ts_ms}};
  if (env.seq)
    j["seq"] = *env.seq;
  if (!env.sender.empty())
    j["sender"] = env.sender;
  return j.dump();
}

/// Maps an envelope to an intent. "intent" payloads must name an intent
/// (ParseError otherwise); "text" payloads go through the keyword parser and
/// may yield nothing.
inline std::optional<Intent> resolve(const CommandEnvelope& env, const Vocabulary& vocabulary) {
  if (env.type == CommandEnvelope::Type::intent) {
    const auto intent = parse_intent_name(env.payload);
    if (!intent)
      throw ParseError("unknown intent '" + env.payload + "'");
    return intent;
  }
  return parse(env.payload, vocabulary);
}

/// Per-sender sequence filter: a sequenced envelope is accepted only if its
/// seq is above the last accepted one from the same sender.
class SequenceFilter {
public:
  enum class Verdict { accepted, duplicate, stale };

  Verdict check(const std::string& sender, const CommandEnvelope& env) {
    if (!env.seq)
      return Verdict::accepted;
    auto [it, inserted] = last_.try_emplace(sender, *env.seq);
    if (inserted)
      return Verdict::accepted;
    if (*env.seq == it->second) {
      ++duplicates_;
      return Verdict::duplicate;
    }
    if (*env.seq < it->second) {
      ++stale_;
      return Verdict::stale;
    }
    it->second = *env.seq;
    return Verdict::accepted;
  }

  void forget(const std::string& sender) { last_.erase(sender); }

  std::uint64_t duplicates() const noexcept { return duplicates_; }
  std::uint64_t stale() const noexcept { return stale_; }

private:
  std::map<std::string, std::uint64_t> last_;
  std::uint64_t duplicates_ = 0;
  std::uint64_t stale_ = 0;
};

} // namespace speechgait
