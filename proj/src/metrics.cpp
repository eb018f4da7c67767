#include "sea/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace sea {

void ErrorTally::add(const AnswerRecord& r) {
  ++total;
  if (r.wrong()) ++wrong;
  if (r.parsed == kUnparsable) ++unparsable;
}

void ErrorTally::add(const ErrorTally& o) {
  wrong += o.wrong;
  total += o.total;
  unparsable += o.unparsable;
}

std::optional<double> ErrorTally::error() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(wrong) / static_cast<double>(total);
}

ErrorTally tally(std::span<const AnswerRecord> records) {
  ErrorTally t;
  for (const auto& r : records) t.add(r);
  return t;
}

std::optional<double> per_paragraph_error(std::span<const AnswerRecord> records) {
  return tally(records).error();
}

std::optional<double> subset_error(std::span<const AnswerRecord> records) {
  return tally(records).error();
}

std::optional<double> mean_of_means(std::span<const AnswerRecord> records) {
  std::map<std::string, ErrorTally> by_para;
  for (const auto& r : records) by_para[r.para_id].add(r);
  if (by_para.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [_, t] : by_para) sum += *t.error();
  return sum / static_cast<double>(by_para.size());
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

CrossValCell crossval_cell(std::span<const AnswerRecord> provider_answers,
                           std::span<const AnswerRecord> testee_answers, CorrelationMode mode) {
  std::unordered_map<std::string, const AnswerRecord*> by_id;
  for (const auto& r : testee_answers) by_id.emplace(r.qa_id, &r);
  CrossValCell cell;
  std::vector<double> px, tx;
  std::map<std::string, std::pair<ErrorTally, ErrorTally>> per_para;
  ErrorTally testee_tally;
  for (const auto& p : provider_answers) {
    auto it = by_id.find(p.qa_id);
    if (it == by_id.end()) throw std::invalid_argument("testee did not answer " + p.qa_id);
    px.push_back(p.correct ? 1.0 : 0.0);
    tx.push_back(it->second->correct ? 1.0 : 0.0);
    testee_tally.add(*it->second);
    auto& pp = per_para[p.para_id];
    pp.first.add(p);
    pp.second.add(*it->second);
  }
  cell.n_questions = px.size();
  cell.n_paragraphs = per_para.size();
  cell.accuracy = testee_tally.total ? 1.0 - *testee_tally.error() : 0.0;
  if (mode == CorrelationMode::per_question) {
    cell.correlation = pearson(px, tx);
  } else {
    std::vector<double> pa, ta;
    for (const auto& [_, t] : per_para) {
      pa.push_back(1.0 - *t.first.error());
      ta.push_back(1.0 - *t.second.error());
    }
    cell.correlation = pearson(pa, ta);
  }
  if (!cell.correlation) {
    cell.null_reason = px.size() < 2 ? "fewer than two observations" : "zero variance";
  }
  return cell;
}

ErrorsPerCost errors_per_cost(std::size_t n_sources, double consumed) {
  ErrorsPerCost e{n_sources, consumed, std::nullopt};
  if (n_sources > 0) e.ratio = consumed / static_cast<double>(n_sources);
  return e;
}

}  // namespace sea
