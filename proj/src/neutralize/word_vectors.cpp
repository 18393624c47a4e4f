#include "mmdebias/neutralize/word_vectors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/text.hpp"

namespace mmdebias::neutralize {

WordVectorTable WordVectorTable::parse(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t count = 0, dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!text::trim(line).empty()) break;
  }
  {
    std::istringstream hs(line);
    if (!(hs >> count >> dim) || dim == 0) throw ParseError("expected header '<count> <dim>'", lineno);
    std::string extra;
    if (hs >> extra) throw ParseError("unexpected text after header", lineno);
  }
  WordVectorTable table(dim);
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> v;
    v.reserve(dim);
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) throw ParseError("non-numeric vector component", lineno);
    if (v.size() != dim)
      throw ParseError("expected " + std::to_string(dim) + " components, got " + std::to_string(v.size()), lineno);
    try {
      table.add(word, std::move(v));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (table.size() != count)
    throw ParseError("header declares " + std::to_string(count) + " words, file has " + std::to_string(table.size()), 0);
  return table;
}

WordVectorTable WordVectorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word vectors " + path.string());
  return parse(in);
}

void WordVectorTable::add(std::string word, std::vector<double> vec) {
  if (vec.size() != dim_) throw ValidationError("vector for '" + word + "' has the wrong dimension");
  double norm = 0.0;
  for (double x : vec) {
    if (!std::isfinite(x)) throw ValidationError("vector for '" + word + "' is not finite");
    norm += x * x;
  }
  if (norm == 0.0) throw ValidationError("vector for '" + word + "' has zero norm");
  if (!vectors_.emplace(std::move(word), std::move(vec)).second) throw ValidationError("duplicate word in table");
}

const std::vector<double>* WordVectorTable::find(std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::optional<double> cosine_similarity(std::string_view w1, std::string_view w2, const WordVectorTable& table) {
  const auto* a = table.find(w1);
  const auto* b = table.find(w2);
  if (!a || !b) return std::nullopt;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a->size(); ++k) {
    dot += (*a)[k] * (*b)[k];
    na += (*a)[k] * (*a)[k];
    nb += (*b)[k] * (*b)[k];
  }
  if (a == b) return 1.0;
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

NeutralizationReport evaluate_neutralization(const std::vector<std::pair<std::string, std::string>>& samples,
                                             const WordVectorTable& table) {
  if (samples.empty()) throw ValidationError("no neutralization samples");
  NeutralizationReport r;
  r.n = samples.size();
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& [orig, pred] : samples) {
    auto c = cosine_similarity(orig, pred, table);
    if (!c) {
      ++r.oov_count;
      continue;
    }
    sum += *c;
    ++used;
  }
  if (used == 0) throw UndefinedError("every sample is out of vocabulary; mean cosine undefined");
  r.mean_cosine = sum / static_cast<double>(used);
  return r;
}

std::vector<std::pair<std::string, std::string>> load_word_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("expected 2 tab-separated fields", lineno);
    out.emplace_back(text::trim(line.substr(0, tab)), text::trim(line.substr(tab + 1)));
  }
  return out;
}

}  // namespace mmdebias::neutralize
