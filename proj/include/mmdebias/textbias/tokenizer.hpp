#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mmdebias::textbias {

/// A subword piece. word_index ties every piece to its parent word;
/// continuation pieces carry a "##" prefix in text.
struct Token {
  std::string text;
  std::size_t word_index = 0;
  bool continuation = false;

  friend bool operator==(const Token&, const Token&) = default;
};

inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kBos = "[BOS]";
inline constexpr std::string_view kEos = "[EOS]";

/// Piece inventory. Ids 0..4 are the special tokens in the order above.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kMaskId = 2;
  static constexpr int kBosId = 3;
  static constexpr int kEosId = 4;
  static constexpr int kNumSpecial = 5;

  Vocabulary();

  /// Whole words with count >= min_count (at most max_words, most frequent
  /// first, ties lexicographic) plus every byte seen as a word-initial and a
  /// "##" continuation piece, so any word seen in training is representable.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences, std::size_t max_words,
                          std::size_t min_count = 1);

  int add(const std::string& piece);
  int id(std::string_view piece) const;  // kUnkId when absent
  bool contains(std::string_view piece) const;
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return pieces_.size(); }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

/// Word-level tokenization: lowercased words, punctuation split off, one token
/// per word. Throws ValidationError on empty or whitespace-only text.
std::vector<Token> tokenize(std::string_view text);

/// Greedy longest-match subword tokenization against a vocabulary. Words
/// present in the vocabulary stay whole; others split into the longest known
/// prefixes, falling back to single UTF-8 code points.
class Tokenizer {
 public:
  Tokenizer() = default;
  explicit Tokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {}

  std::vector<Token> tokenize(std::string_view text) const;
  std::vector<Token> tokenize_words(const std::vector<std::string>& words) const;
  /// Words flagged in `force_split` skip the whole-word match.
  std::vector<Token> tokenize_words(const std::vector<std::string>& words, const std::vector<bool>& force_split) const;
  std::vector<int> ids(const std::vector<Token>& tokens) const;
  const Vocabulary& vocabulary() const { return vocab_; }

 private:
  void split_word(const std::string& word, std::size_t word_index, std::vector<Token>& out,
                  bool allow_whole = true) const;
  Vocabulary vocab_;
};

/// Reassembles text from pieces; equals the whitespace-normalized, lowercased
/// input of tokenize().
std::string detokenize(const std::vector<Token>& tokens);

/// Number of distinct words spanned by the tokens (max word_index + 1).
std::size_t word_count(const std::vector<Token>& tokens);

}  // namespace mmdebias::textbias
