#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mmdebias::neutralize {

/// Immutable-after-load word -> vector map. All vectors share one dimension
/// and none has zero norm.
class WordVectorTable {
 public:
  explicit WordVectorTable(std::size_t dim) : dim_(dim) {}

  /// Text format: header "<count> <dim>", then "<word> <dim floats>" per line.
  static WordVectorTable parse(std::istream& in);
  static WordVectorTable load(const std::filesystem::path& path);

  void add(std::string word, std::vector<double> vec);
  const std::vector<double>* find(std::string_view word) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// dot(v1, v2) / (|v1| |v2|); nullopt when either word is out of vocabulary.
std::optional<double> cosine_similarity(std::string_view w1, std::string_view w2, const WordVectorTable& table);

struct NeutralizationReport {
  double mean_cosine = 0.0;  // over in-vocabulary pairs only
  std::size_t oov_count = 0;
  std::size_t n = 0;  // all samples, including OOV
};

/// Throws ValidationError on an empty sample list and UndefinedError when
/// every pair is out of vocabulary.
NeutralizationReport evaluate_neutralization(const std::vector<std::pair<std::string, std::string>>& samples,
                                             const WordVectorTable& table);

/// Two-column TSV of (original, predicted) words.
std::vector<std::pair<std::string, std::string>> load_word_pairs(const std::filesystem::path& path);

}  // namespace mmdebias::neutralize
