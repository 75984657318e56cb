#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "speechgait/intent.hpp"

namespace speechgait {

// Corpus lines are `target<TAB>hypothesis<TAB>intent` with "-" for no
// intent. Blank lines and lines starting with '#' are ignored.

struct CorpusEntry {
  std::size_t line = 0;
  Trial trial;
};

struct MalformedLine {
  std::size_t line = 0;
  std::string reason;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  std::vector<MalformedLine> malformed;
};

inline Corpus read_corpus(std::istream& in, const Vocabulary& vocabulary) {
  Corpus corpus;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r')
      raw.pop_back();
    if (raw.find_first_not_of(" \t") == std::string::npos || raw.front() == '#')
      continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = raw.find('\t', start);
      fields.push_back(raw.substr(start, tab - start));
      if (tab == std::string::npos)
        break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      corpus.malformed.push_back({line_no, "expected 3 tab-separated fields, got " + std::to_string(fields.size())});
      continue;
    }
    if (tokenize(fields[0]).empty()) {
      corpus.malformed.push_back({line_no, "target text has no words"});
      continue;
    }
    std::optional<Intent> target_intent;
    std::string intent_field = fields[2];
    intent_field.erase(0, intent_field.find_first_not_of(' '));
    intent_field.erase(intent_field.find_last_not_of(' ') + 1);
    if (intent_field != "-") {
      target_intent = parse_intent_name(intent_field);
      if (!target_intent) {
        corpus.malformed.push_back({line_no, "unknown intent '" + fields[2] + "'"});
        continue;
      }
    }
    Trial trial{fields[0], fields[1], target_intent, parse(fields[1], vocabulary)};
    corpus.entries.push_back({line_no, std::move(trial)});
  }
  return corpus;
}

struct TrialScore {
  std::size_t line = 0;
  EditCounts edits;
  std::size_t reference_words = 0;
  double wer = 0.0;
  bool intent_correct = true;
};

struct MetricsReport {
  std::vector<TrialScore> trials;
  std::vector<MalformedLine> malformed;
  double mean_wer = 0.0;   ///< cumulative average of per-trial WER
  double pooled_wer = 0.0; ///< total edits / total reference words
  double ier = 0.0;
};

inline MetricsReport evaluate(const Corpus& corpus) {
  MetricsReport report;
  report.malformed = corpus.malformed;
  if (corpus.entries.empty())
    return report;

  std::vector<Trial> trials;
  std::size_t edits = 0;
  std::size_t words = 0;
  double wer_sum = 0.0;
  for (const auto& entry : corpus.entries) {
    const auto target = tokenize(entry.trial.target_text);
    const auto hypothesis = tokenize(entry.trial.hypothesis_text);
    TrialScore score;
    score.line = entry.line;
    score.edits = align_words(target, hypothesis);
    score.reference_words = target.size();
    score.wer = word_error_rate(target, hypothesis);
    score.intent_correct = entry.trial.parsed_intent == entry.trial.target_intent;
    edits += score.edits.total();
    words += score.reference_words;
    wer_sum += score.wer;
    report.trials.push_back(score);
    trials.push_back(entry.trial);
  }
  report.mean_wer = wer_sum / static_cast<double>(report.trials.size());
  report.pooled_wer = 100.0 * static_cast<double>(edits) / static_cast<double>(words);
  report.ier = intent_error_rate(trials);
  return report;
}

inline nlohmann::json to_json(const MetricsReport& report, const Corpus& corpus) {
  nlohmann::json trials = nlohmann::json::array();
  for (std::size_t i = 0; i < report.trials.size(); ++i) {
    const auto& score = report.trials[i];
    const auto& trial = corpus.entries[i].trial;
    auto name = [](const std::optional<Intent>& k) {
      return k ? nlohmann::json(std::string(to_string(*k))) : nlohmann::json(nullptr);
    };
    trials.push_back({{"line", score.line},
                      {"target", trial.target_text},
                      {"hypothesis", trial.hypothesis_text},
                      {"insertions", score.edits.insertions},
                      {"substitutions", score.edits.substitutions},
                      {"deletions", score.edits.deletions},
                      {"words", score.reference_words},
                      {"wer", score.wer},
                      {"target_intent", name(trial.target_intent)},
                      {"parsed_intent", name(trial.parsed_intent)},
                      {"intent_correct", score.intent_correct}});
  }
  nlohmann::json malformed = nlohmann::json::array();
  for (const auto& m : report.malformed)
    malformed.push_back({{"line", m.line}, {"reason", m.reason}});
  return {{"trials", trials},
          {"malformed", malformed},
          {"count", report.trials.size()},
          {"mean_wer", report.mean_wer},
          {"pooled_wer", report.pooled_wer},
          {"ier", report.ier}};
}

} // namespace speechgait
