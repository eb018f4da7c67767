#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sea/testee.hpp"

namespace sea {

/// Question-pooled error tally: wrong / total.
struct ErrorTally {
  std::uint64_t wrong = 0;
  std::uint64_t total = 0;
  std::uint64_t unparsable = 0;

  void add(const AnswerRecord& r);
  void add(const ErrorTally& other);
  /// nullopt when no question has been counted.
  std::optional<double> error() const;
  bool operator==(const ErrorTally&) const = default;
};

ErrorTally tally(std::span<const AnswerRecord> records);

/// Wrong / count for one paragraph's records; nullopt for no records.
std::optional<double> per_paragraph_error(std::span<const AnswerRecord> records);

/// Pooled error over all records; nullopt for no records.
std::optional<double> subset_error(std::span<const AnswerRecord> records);

/// Mean over paragraphs of per-paragraph error (records grouped by para_id).
std::optional<double> mean_of_means(std::span<const AnswerRecord> records);

/// Pearson correlation; nullopt when either side has zero variance or the
/// inputs are shorter than 2.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation with average ranks for ties.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

enum class CorrelationMode { per_question, per_paragraph };

struct CrossValCell {
  std::string provider;
  std::string testee;
  std::optional<double> correlation;
  std::string null_reason;
  double accuracy = 0.0;
  std::size_t n_questions = 0;
  std::size_t n_paragraphs = 0;
};

/// Correlation and accuracy of `testee_answers` against the provider's own
/// answers on the same questions. Both lists must cover the same qa_ids.
CrossValCell crossval_cell(std::span<const AnswerRecord> provider_answers,
                           std::span<const AnswerRecord> testee_answers,
                           CorrelationMode mode);

struct ErrorsPerCost {
  std::size_t n_sources = 0;
  double consumed = 0.0;
  /// consumed / n_sources; nullopt for zero sources.
  std::optional<double> ratio;
};

ErrorsPerCost errors_per_cost(std::size_t n_sources, double consumed);

}  // namespace sea
