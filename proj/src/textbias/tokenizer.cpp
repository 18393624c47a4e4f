#include "mmdebias/textbias/tokenizer.hpp"

#include <algorithm>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/text.hpp"

namespace mmdebias::textbias {

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::vector<std::string> code_points(const std::string& w) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < w.size();) {
    std::size_t len = std::min(utf8_length(static_cast<unsigned char>(w[i])), w.size() - i);
    out.push_back(w.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (auto s : {kPad, kUnk, kMask, kBos, kEos}) add(std::string(s));
}

int Vocabulary::add(const std::string& piece) {
  auto it = index_.find(piece);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(pieces_.size());
  pieces_.push_back(piece);
  index_.emplace(piece, id);
  return id;
}

int Vocabulary::id(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view piece) const { return index_.contains(std::string(piece)); }

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences, std::size_t max_words,
                             std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  std::map<std::string, bool> chars;
  for (const auto& s : sentences)
    for (const auto& w : s) {
      ++counts[w];
      for (auto& cp : code_points(w)) chars[cp] = true;
    }
  std::vector<std::pair<std::string, std::size_t>> words(counts.begin(), counts.end());
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  std::size_t added = 0;
  for (const auto& [w, c] : words) {
    if (added >= max_words || c < min_count) break;
    v.add(w);
    ++added;
  }
  for (const auto& [c, _] : chars) {
    v.add(c);
    v.add("##" + c);
  }
  return v;
}

nlohmann::json Vocabulary::to_json() const { return pieces_; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  auto pieces = j.get<std::vector<std::string>>();
  if (pieces.size() < kNumSpecial) throw ValidationError("vocabulary missing special tokens");
  Vocabulary v;
  for (int i = 0; i < kNumSpecial; ++i)
    if (pieces[i] != v.pieces_[i]) throw ValidationError("vocabulary special tokens out of order");
  for (std::size_t i = kNumSpecial; i < pieces.size(); ++i) v.add(pieces[i]);
  if (v.size() != pieces.size()) throw ValidationError("vocabulary contains duplicate pieces");
  return v;
}

std::vector<Token> tokenize(std::string_view text) {
  auto words = text::split_words(text);
  if (words.empty()) throw ValidationError("cannot tokenize empty text");
  std::vector<Token> out;
  out.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) out.push_back({std::move(words[i]), i, false});
  return out;
}

std::vector<Token> Tokenizer::tokenize(std::string_view text) const {
  auto words = text::split_words(text);
  if (words.empty()) throw ValidationError("cannot tokenize empty text");
  return tokenize_words(words);
}

std::vector<Token> Tokenizer::tokenize_words(const std::vector<std::string>& words) const {
  std::vector<Token> out;
  for (std::size_t i = 0; i < words.size(); ++i) split_word(words[i], i, out);
  return out;
}

std::vector<Token> Tokenizer::tokenize_words(const std::vector<std::string>& words,
                                             const std::vector<bool>& force_split) const {
  if (force_split.size() != words.size()) throw ValidationError("split flags do not match the words");
  std::vector<Token> out;
  for (std::size_t i = 0; i < words.size(); ++i) split_word(words[i], i, out, !force_split[i]);
  return out;
}

void Tokenizer::split_word(const std::string& word, std::size_t word_index, std::vector<Token>& out,
                           bool allow_whole) const {
  if (vocab_.size() == Vocabulary::kNumSpecial || (allow_whole && vocab_.contains(word))) {
    out.push_back({word, word_index, false});
    return;
  }
  auto cps = code_points(word);
  std::size_t start = 0;
  while (start < cps.size()) {
    std::string prefix = start ? "##" : "";
    std::size_t best_end = start + 1;
    std::string candidate = prefix;
    std::size_t limit = !allow_whole && start == 0 ? cps.size() - 1 : cps.size();
    for (std::size_t end = start; end < limit; ++end) {
      candidate += cps[end];
      if (vocab_.contains(candidate)) best_end = end + 1;
    }
    std::string piece = prefix;
    for (std::size_t k = start; k < best_end; ++k) piece += cps[k];
    out.push_back({std::move(piece), word_index, start > 0});
    start = best_end;
  }
}

std::vector<int> Tokenizer::ids(const std::vector<Token>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab_.id(t.text));
  return out;
}

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t.continuation) {
      out += t.text.starts_with("##") ? t.text.substr(2) : t.text;
    } else {
      if (!out.empty()) out += ' ';
      out += t.text;
    }
  }
  return out;
}

std::size_t word_count(const std::vector<Token>& tokens) {
  std::size_t n = 0;
  for (const auto& t : tokens) n = std::max(n, t.word_index + 1);
  return n;
}

}  // namespace mmdebias::textbias
