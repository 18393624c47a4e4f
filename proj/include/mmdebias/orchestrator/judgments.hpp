#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmdebias/orchestrator/pipeline.hpp"

namespace mmdebias::orchestrator {

/// Original and debiased text and image shown side by side to a grader.
struct EvalPair {
  std::string pair_id;
  std::string original_text;
  std::string debiased_text;
  std::string original_image;  // image ids
  std::string debiased_image;
  std::string original_image_path;
  std::string debiased_image_path;
};

/// Uniform sample without replacement; ValidationError when n exceeds the corpus.
std::vector<EvalPair> sample_pairs(const std::vector<DebiasedArticle>& corpus, std::size_t n, std::uint64_t seed);

nlohmann::json to_json(const EvalPair& p);
EvalPair eval_pair_from_json(const nlohmann::json& j);
void save_eval_pairs(const std::filesystem::path& path, const std::vector<EvalPair>& pairs);
/// Relative image paths resolve against the file's directory.
std::vector<EvalPair> load_eval_pairs(const std::filesystem::path& path);

struct JudgmentRecord {
  std::string pair_id;
  std::string grader_id;
  bool makes_sense_together = false;
  bool bias_reduced = false;
  bool same_meaning = false;
  int fluency = 0;  // 1..5
  std::string submitted_at;

  friend bool operator==(const JudgmentRecord&, const JudgmentRecord&) = default;
};

void validate(const JudgmentRecord& r);
nlohmann::json to_json(const JudgmentRecord& r);
/// Strict: unknown or missing fields and wrong types are ValidationErrors.
/// submitted_at may be omitted and is then left empty.
JudgmentRecord judgment_from_json(const nlohmann::json& j);

/// Current UTC time as ISO 8601 with a trailing Z.
std::string utc_timestamp();

/// Line-delimited judgment log. Each submit appends one record and syncs it
/// to disk before returning; on load the last record per (pair, grader) wins.
class JudgmentStore {
 public:
  explicit JudgmentStore(std::filesystem::path path);
  ~JudgmentStore();
  JudgmentStore(const JudgmentStore&) = delete;
  JudgmentStore& operator=(const JudgmentStore&) = delete;

  void submit(const JudgmentRecord& record);
  std::vector<JudgmentRecord> records() const;
  std::size_t size() const;
  bool contains(const std::string& pair_id, const std::string& grader_id) const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, JudgmentRecord> latest_;
};

struct QuestionStats {
  std::size_t n = 0;
  std::optional<double> makes_sense_together;
  std::optional<double> bias_reduced;
  std::optional<double> same_meaning;
  std::optional<double> mean_fluency;
};

struct JudgmentReport {
  QuestionStats overall;
  std::map<std::string, QuestionStats> per_pair;
};

JudgmentReport aggregate_judgments(const std::vector<JudgmentRecord>& records);
nlohmann::json to_json(const QuestionStats& s);
nlohmann::json to_json(const JudgmentReport& r);

}  // namespace mmdebias::orchestrator
