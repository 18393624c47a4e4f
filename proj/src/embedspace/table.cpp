#include "mmdebias/embedspace/table.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mmdebias/common/error.hpp"

namespace mmdebias::embedspace {

void EmbeddingTable::add(std::string id, EmbeddingVector v) {
  if (id.empty() || id.find_first_of("\t\n") != std::string::npos) throw ValidationError("invalid embedding id");
  if (dim_ == 0) dim_ = v.dim();
  if (v.dim() != dim_ || dim_ == 0) throw ValidationError("embedding '" + id + "' has the wrong dimension");
  for (double x : v.values)
    if (!std::isfinite(x)) throw ValidationError("embedding '" + id + "' is not finite");
  auto key = std::make_pair(id, v.modality);
  if (index_.contains(key)) throw ValidationError("duplicate embedding for '" + id + "'");
  index_.emplace(key, entries_.size());
  entries_.push_back({std::move(id), std::move(v)});
}

const EmbeddingVector* EmbeddingTable::find(const std::string& id, Modality m) const {
  auto it = index_.find({id, m});
  return it == index_.end() ? nullptr : &entries_[it->second].vector;
}

std::size_t EmbeddingTable::count(Modality m) const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.vector.modality == m;
  return n;
}

std::vector<TableEntry> EmbeddingTable::entries_of(Modality m) const {
  std::vector<TableEntry> out;
  for (const auto& e : entries_)
    if (e.vector.modality == m) out.push_back(e);
  return out;
}

void EmbeddingTable::write(std::ostream& out) const {
  std::string mods;
  if (count(Modality::text)) mods = "text";
  if (count(Modality::image)) mods += mods.empty() ? "image" : ",image";
  if (mods.empty()) mods = "none";
  out << "mmdebias-embeddings " << entries_.size() << ' ' << dim_ << ' ' << mods << '\n';
  out << std::setprecision(17);
  for (const auto& e : entries_) {
    out << e.id << '\t' << modality_name(e.vector.modality) << '\t';
    for (std::size_t k = 0; k < e.vector.values.size(); ++k) out << (k ? " " : "") << e.vector.values[k];
    out << '\n';
  }
}

EmbeddingTable EmbeddingTable::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty embedding table", 1);
  std::istringstream hs(line);
  std::string magic, mods;
  std::size_t count = 0, dim = 0;
  if (!(hs >> magic >> count >> dim >> mods) || magic != "mmdebias-embeddings")
    throw ParseError("bad embedding table header", 1);
  EmbeddingTable t(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError("expected id<TAB>modality<TAB>values", lineno);
    EmbeddingVector v;
    try {
      v.modality = parse_modality(line.substr(t1 + 1, t2 - t1 - 1));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
    std::istringstream vs(line.substr(t2 + 1));
    double x;
    while (vs >> x) v.values.push_back(x);
    if (!vs.eof() || v.values.size() != dim) throw ParseError("expected " + std::to_string(dim) + " values", lineno);
    t.add(line.substr(0, t1), std::move(v));
  }
  if (t.size() != count) throw ParseError("header count does not match records", 0);
  return t;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding table " + path.string());
  return read(in);
}

TableStats table_stats(const EmbeddingTable& table) {
  TableStats s;
  s.dim = table.dim();
  s.text = table.count(Modality::text);
  s.image = table.count(Modality::image);
  double norms = 0.0;
  for (const auto& e : table.entries()) {
    double n = 0.0;
    for (double x : e.vector.values) n += x * x;
    norms += std::sqrt(n);
  }
  if (table.size()) s.mean_norm = norms / static_cast<double>(table.size());
  auto images = table.entries_of(Modality::image);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = i + 1; j < images.size(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < s.dim; ++k) {
        double x = images[i].vector.values[k] - images[j].vector.values[k];
        d += x * x;
      }
      total += std::sqrt(d);
      ++pairs;
    }
  if (pairs) s.mean_image_distance = total / static_cast<double>(pairs);
  return s;
}

}  // namespace mmdebias::embedspace
