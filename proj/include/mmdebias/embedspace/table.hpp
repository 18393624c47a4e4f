#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmdebias/embedspace/loss.hpp"

namespace mmdebias::embedspace {

struct TableEntry {
  std::string id;
  EmbeddingVector vector;
};

/// Embeddings keyed by (id, modality). Immutable once built; concurrent reads
/// are safe.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  void add(std::string id, EmbeddingVector v);
  const EmbeddingVector* find(const std::string& id, Modality m) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t count(Modality m) const;
  const std::vector<TableEntry>& entries() const { return entries_; }
  std::vector<TableEntry> entries_of(Modality m) const;

  /// Header line "mmdebias-embeddings <count> <dim> <modalities>" where
  /// modalities is a comma list (text,image), then one
  /// "<id>\t<modality>\t<v1> ... <vD>" line per entry.
  void write(std::ostream& out) const;
  static EmbeddingTable read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static EmbeddingTable load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::vector<TableEntry> entries_;
  std::map<std::pair<std::string, Modality>, std::size_t> index_;
};

struct TableStats {
  std::size_t text = 0, image = 0, dim = 0;
  double mean_norm = 0.0;
  double mean_image_distance = 0.0;  // mean pairwise Euclidean distance between images
};

TableStats table_stats(const EmbeddingTable& table);

}  // namespace mmdebias::embedspace
