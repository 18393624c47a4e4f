#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/rng.hpp"

namespace mmdebias::corpus {

/// Political lean of a publishing source on a continuous scale:
/// -1 far-left, 0 neutral, +1 right.
class SourceScore {
 public:
  explicit SourceScore(double value) : value_(value) {
    if (!std::isfinite(value) || value < -1.0 || value > 1.0)
      throw ValidationError("source score " + std::to_string(value) + " outside [-1, 1]");
  }
  double value() const { return value_; }
  friend bool operator==(SourceScore, SourceScore) = default;

 private:
  double value_;
};

struct Article {
  std::string id;
  std::string source_id;
  std::string text;
  std::string image_ref;
  std::string topic;
  SourceScore source_score{0.0};

  friend bool operator==(const Article&, const Article&) = default;
};

/// Source id -> score. Scores live on sources; articles inherit them.
using ScoreTable = std::map<std::string, double, std::less<>>;

/// Parses line-delimited JSON articles. Blank lines are skipped. Throws
/// ParseError naming the 1-based line for malformed records and
/// ValidationError for out-of-range scores or duplicate ids.
std::vector<Article> parse_articles(std::istream& in);
std::vector<Article> load_articles(const std::filesystem::path& path);

std::string serialize_article(const Article& a);
void write_articles(std::ostream& out, const std::vector<Article>& articles);
void save_articles(const std::filesystem::path& path, const std::vector<Article>& articles);

/// Looks the source up; unknown sources are an error, never a silent 0.
SourceScore assign_source_score(std::string_view source_id, const ScoreTable& table);

/// Derives the per-source table from a corpus. Articles from one source that
/// disagree on the score are a ValidationError.
ScoreTable build_score_table(const std::vector<Article>& articles);

/// Verifies every article's score equals its source's table entry.
void check_against_table(const std::vector<Article>& articles, const ScoreTable& table);

/// Reads a TSV score table: source_id <TAB> score.
ScoreTable load_score_table(const std::filesystem::path& path);
void save_score_table(const std::filesystem::path& path, const ScoreTable& table);

/// A biased sentence and its neutralized rewrite, lowercased and tokenized.
struct NeutralityPair {
  std::string id;
  std::vector<std::string> biased_tokens;
  std::vector<std::string> neutral_tokens;

  friend bool operator==(const NeutralityPair&, const NeutralityPair&) = default;
};

struct PairLoadResult {
  std::vector<NeutralityPair> pairs;
  std::size_t dropped = 0;  // token-identical pairs
};

/// TSV with three columns: id, biased sentence, neutral sentence. No header.
PairLoadResult parse_neutrality_pairs(std::istream& in);
PairLoadResult load_neutrality_pairs(const std::filesystem::path& path);
void save_neutrality_pairs(const std::filesystem::path& path, const std::vector<NeutralityPair>& pairs);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

/// Sizes of the three parts for n items; throws when ratios are not positive
/// or do not sum to one within 1e-9.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

template <typename T>
Split<T> split_dataset(const std::vector<T>& items, const SplitRatios& ratios, std::uint64_t seed) {
  auto sizes = split_sizes(items.size(), ratios);
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  Split<T> out;
  std::size_t k = 0;
  for (; k < sizes[0]; ++k) out.train.push_back(items[order[k]]);
  for (; k < sizes[0] + sizes[1]; ++k) out.val.push_back(items[order[k]]);
  for (; k < order.size(); ++k) out.test.push_back(items[order[k]]);
  return out;
}

}  // namespace mmdebias::corpus
