#include "mmdebias/corpus/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmdebias/common/log.hpp"
#include "mmdebias/common/text.hpp"

namespace mmdebias::corpus {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kArticleFields = {"id",        "source_id", "text",
                                                           "image_ref", "topic",     "source_score"};

Article article_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("article record must be an object", line);
  for (const auto& [key, _] : j.items())
    if (!kArticleFields.contains(key)) throw ParseError("unknown field '" + key + "'", line);
  for (const auto& f : kArticleFields)
    if (!j.contains(f)) throw ParseError("missing field '" + f + "'", line);
  Article a;
  try {
    a.id = j.at("id").get<std::string>();
    a.source_id = j.at("source_id").get<std::string>();
    a.text = j.at("text").get<std::string>();
    a.image_ref = j.at("image_ref").get<std::string>();
    a.topic = j.at("topic").get<std::string>();
    if (!j.at("source_score").is_number()) throw ParseError("source_score must be a number", line);
    double score = j.at("source_score").get<double>();
    try {
      a.source_score = SourceScore(score);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line) + ": " + e.what());
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line);
  }
  if (a.id.empty()) throw ParseError("empty id", line);
  if (text::trim(a.text).empty()) throw ParseError("empty text", line);
  return a;
}

}  // namespace

std::vector<Article> parse_articles(std::istream& in) {
  std::vector<Article> out;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), lineno);
    }
    Article a = article_from_json(j, lineno);
    if (!seen.insert(a.id).second)
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate article id '" + a.id + "'");
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Article> load_articles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open article file " + path.string());
  return parse_articles(in);
}

std::string serialize_article(const Article& a) {
  json j = {{"id", a.id},       {"source_id", a.source_id}, {"text", a.text},
            {"image_ref", a.image_ref}, {"topic", a.topic}, {"source_score", a.source_score.value()}};
  return j.dump();
}

void write_articles(std::ostream& out, const std::vector<Article>& articles) {
  for (const auto& a : articles) out << serialize_article(a) << '\n';
}

void save_articles(const std::filesystem::path& path, const std::vector<Article>& articles) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_articles(out, articles);
}

SourceScore assign_source_score(std::string_view source_id, const ScoreTable& table) {
  auto it = table.find(source_id);
  if (it == table.end()) throw NotFoundError("no score for source '" + std::string(source_id) + "'");
  return SourceScore(it->second);
}

ScoreTable build_score_table(const std::vector<Article>& articles) {
  ScoreTable table;
  for (const auto& a : articles) {
    auto [it, inserted] = table.emplace(a.source_id, a.source_score.value());
    if (!inserted && it->second != a.source_score.value())
      throw ValidationError("source '" + a.source_id + "' has conflicting scores " + std::to_string(it->second) +
                            " and " + std::to_string(a.source_score.value()) + " (article " + a.id + ")");
  }
  return table;
}

void check_against_table(const std::vector<Article>& articles, const ScoreTable& table) {
  for (const auto& a : articles) {
    auto expected = assign_source_score(a.source_id, table);
    if (expected != a.source_score)
      throw ValidationError("article " + a.id + " score differs from source table entry for " + a.source_id);
  }
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score table " + path.string());
  ScoreTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected source<TAB>score", lineno);
    std::string source = line.substr(0, tab);
    double v = 0.0;
    try {
      std::size_t used = 0;
      std::string rest = text::trim(line.substr(tab + 1));
      v = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError("bad score value", lineno);
    }
    SourceScore checked(v);
    if (!table.emplace(source, checked.value()).second)
      throw ValidationError("duplicate source '" + source + "' in score table");
  }
  return table;
}

void save_score_table(const std::filesystem::path& path, const ScoreTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (const auto& [source, score] : table) out << source << '\t' << score << '\n';
}

PairLoadResult parse_neutrality_pairs(std::istream& in) {
  PairLoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (!line.empty() && line.back() == '\t') fields.emplace_back();
    if (fields.size() != 3)
      throw ParseError("expected 3 tab-separated fields, got " + std::to_string(fields.size()), lineno);
    NeutralityPair p{text::trim(fields[0]), text::split_words(fields[1]), text::split_words(fields[2])};
    if (p.id.empty() || p.biased_tokens.empty() || p.neutral_tokens.empty())
      throw ParseError("empty id or sentence", lineno);
    if (p.biased_tokens == p.neutral_tokens) {
      ++result.dropped;
      continue;
    }
    result.pairs.push_back(std::move(p));
  }
  if (result.dropped)
    log::info("dropped " + std::to_string(result.dropped) + " token-identical neutrality pair(s)");
  return result;
}

PairLoadResult load_neutrality_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pair file " + path.string());
  return parse_neutrality_pairs(in);
}

void save_neutrality_pairs(const std::filesystem::path& path, const std::vector<NeutralityPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : pairs)
    out << p.id << '\t' << text::join(p.biased_tokens) << '\t' << text::join(p.neutral_tokens) << '\n';
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& r) {
  if (!(r.train > 0 && r.val > 0 && r.test > 0)) throw ValidationError("split ratios must be positive");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
  auto train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.train));
  auto val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.val));
  train = std::min(train, n);
  val = std::min(val, n - train);
  return {train, val, n - train - val};
}

}  // namespace mmdebias::corpus
