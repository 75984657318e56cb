#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace speechgait {

enum class Intent { stand, sit, walk, stop, speed_up, slow_down, maintain };

inline constexpr std::array<Intent, 7> kAllIntents = {
    Intent::stand, Intent::sit,       Intent::walk,    Intent::stop,
    Intent::speed_up, Intent::slow_down, Intent::maintain};

constexpr std::string_view to_string(Intent intent) noexcept {
  switch (intent) {
  case Intent::stand:
    return "stand";
  case Intent::sit:
    return "sit";
  case Intent::walk:
    return "walk";
  case Intent::stop:
    return "stop";
  case Intent::speed_up:
    return "speed_up";
  case Intent::slow_down:
    return "slow_down";
  case Intent::maintain:
    return "maintain";
  }
  return "?";
}

/// Accepts the snake_case wire names ("speed_up") and the CamelCase type
/// names ("SpeedUp"), case-insensitively.
inline std::optional<Intent> parse_intent_name(std::string_view name) {
  std::string folded;
  for (char c : name) {
    if (c != '_' && c != '-' && c != ' ')
      folded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (Intent intent : kAllIntents) {
    std::string candidate;
    for (char c : to_string(intent))
      if (c != '_')
        candidate += c;
    if (folded == candidate)
      return intent;
  }
  return std::nullopt;
}

struct Utterance {
  std::string text;
  std::int64_t timestamp_ms = 0;
};

/// Lowercases, splits on whitespace and strips punctuation. Apostrophes are
/// kept inside a token ("don't") but trimmed from its ends; the UTF-8 right
/// single quote is folded to an ASCII apostrophe.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    auto first = current.find_first_not_of('\'');
    auto last = current.find_last_not_of('\'');
    if (first != std::string::npos)
      tokens.push_back(current.substr(first, last - first + 1));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
               static_cast<unsigned char>(text[i + 2]) == 0x99) {
      current += '\'';
      i += 2;
    } else if (c == '\'') {
      current += '\'';
    } else if (c >= 0x80 || std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return tokens;
}

struct Phrase {
  std::vector<std::string> tokens;
  Intent intent;
};

using Vocabulary = std::vector<Phrase>;

inline Vocabulary default_vocabulary() {
  const std::pair<const char*, Intent> table[] = {
      {"keep moving", Intent::maintain},  {"don't change", Intent::maintain},
      {"maintain speed", Intent::maintain}, {"stand up", Intent::stand},
      {"stand", Intent::stand},           {"sit down", Intent::sit},
      {"sit", Intent::sit},               {"stop moving", Intent::stop},
      {"stop", Intent::stop},             {"walk forward", Intent::walk},
      {"walk", Intent::walk},             {"move forward", Intent::walk},
      {"move", Intent::walk},             {"forward", Intent::walk},
      {"slow down", Intent::slow_down},   {"slow", Intent::slow_down},
      {"speed up", Intent::speed_up},     {"go faster", Intent::speed_up},
      {"faster", Intent::speed_up},
  };
  Vocabulary vocabulary;
  for (const auto& [text, intent] : table)
    vocabulary.push_back({tokenize(text), intent});
  return vocabulary;
}

inline constexpr std::string_view kGateWord = "robot";

/// Tie-break rank, lower wins: Stop > Sit > Stand > SlowDown > SpeedUp > Walk > Maintain.
constexpr int safety_rank(Intent intent) noexcept {
  switch (intent) {
  case Intent::stop:
    return 0;
  case Intent::sit:
    return 1;
  case Intent::stand:
    return 2;
  case Intent::slow_down:
    return 3;
  case Intent::speed_up:
    return 4;
  case Intent::walk:
    return 5;
  case Intent::maintain:
    return 6;
  }
  return 7;
}

struct ParseOutcome {
  std::optional<Intent> intent;
  bool gate_present = false;
  const Phrase* matched = nullptr; ///< points into the vocabulary passed to parse_detailed
};

/// Keyword-subset matcher. A phrase scores |phrase ∩ utterance| / |phrase|;
/// only full matches (score 1) are candidates. Among candidates the longest
/// phrase wins, then the safety rank.
inline ParseOutcome parse_detailed(std::string_view text, const Vocabulary& vocabulary) {
  ParseOutcome outcome;
  const auto tokens = tokenize(text);
  auto has = [&](std::string_view token) {
    return std::find(tokens.begin(), tokens.end(), token) != tokens.end();
  };
  outcome.gate_present = has(kGateWord);
  if (!outcome.gate_present)
    return outcome;

  for (const auto& phrase : vocabulary) {
    if (phrase.tokens.empty())
      continue;
    const auto hits = std::count_if(phrase.tokens.begin(), phrase.tokens.end(), has);
    if (static_cast<std::size_t>(hits) < phrase.tokens.size())
      continue;
    const Phrase* best = outcome.matched;
    if (best == nullptr || phrase.tokens.size() > best->tokens.size() ||
        (phrase.tokens.size() == best->tokens.size() &&
         safety_rank(phrase.intent) < safety_rank(best->intent))) {
      outcome.matched = &phrase;
    }
  }
  if (outcome.matched != nullptr)
    outcome.intent = outcome.matched->intent;
  return outcome;
}

inline std::optional<Intent> parse(std::string_view text, const Vocabulary& vocabulary) {
  return parse_detailed(text, vocabulary).intent;
}

inline std::optional<Intent> parse(const Utterance& utterance, const Vocabulary& vocabulary) {
  return parse(utterance.text, vocabulary);
}

// ---------------------------------------------------------------------------
// Recognition metrics

struct EditCounts {
  std::size_t insertions = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;

  std::size_t total() const noexcept { return insertions + substitutions + deletions; }
};

/// Minimum-edit alignment of hypothesis against target at word granularity.
/// The backtrace prefers match/substitution, then deletion, then insertion.
inline EditCounts align_words(std::span<const std::string> target, std::span<const std::string> hypothesis) {
  const std::size_t n = target.size();
  const std::size_t m = hypothesis.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i)
    at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j)
    at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (target[i - 1] == hypothesis[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  EditCounts counts;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = target[i - 1] == hypothesis[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same)
          ++counts.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

/// (I + S + D) / N × 100. Throws std::invalid_argument for an empty target.
inline double word_error_rate(std::span<const std::string> target, std::span<const std::string> hypothesis) {
  if (target.empty())
    throw std::invalid_argument("word error rate undefined for an empty target");
  return 100.0 * static_cast<double>(align_words(target, hypothesis).total()) /
         static_cast<double>(target.size());
}

inline double word_error_rate(std::string_view target, std::string_view hypothesis) {
  const auto t = tokenize(target);
  const auto h = tokenize(hypothesis);
  return word_error_rate(std::span<const std::string>(t), std::span<const std::string>(h));
}

struct Trial {
  std::string target_text;
  std::string hypothesis_text;
  std::optional<Intent> target_intent;
  std::optional<Intent> parsed_intent;
};

/// Percentage of trials whose parsed intent differs from the target intent
/// (two "none" values count as a match).
inline double intent_error_rate(std::span<const Trial> trials) {
  if (trials.empty())
    throw std::invalid_argument("intent error rate undefined for an empty trial list");
  const auto wrong = std::count_if(trials.begin(), trials.end(),
                                   [](const Trial& t) { return t.parsed_intent != t.target_intent; });
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(trials.size());
}

} // namespace speechgait
