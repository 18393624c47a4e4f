#include "mmdebias/orchestrator/judgments.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include "mmdebias/common/log.hpp"
#include "mmdebias/common/text.hpp"

namespace mmdebias::orchestrator {

namespace fs = std::filesystem;

std::vector<EvalPair> sample_pairs(const std::vector<DebiasedArticle>& corpus, std::size_t n, std::uint64_t seed) {
  if (n > corpus.size())
    throw ValidationError("cannot sample " + std::to_string(n) + " pairs from " + std::to_string(corpus.size()));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<EvalPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = corpus[order[i]];
    EvalPair p;
    p.pair_id = "pair-" + d.original.id;
    p.original_text = d.original.text;
    p.debiased_text = d.neutralized_text;
    p.original_image = d.original.id;
    p.original_image_path = d.image.original_image_path;
    if (d.image.replacement) {
      p.debiased_image = d.image.replacement->image_id;
      p.debiased_image_path = d.image.replacement_image_path;
    } else {
      p.debiased_image = p.original_image;
      p.debiased_image_path = p.original_image_path;
    }
    out.push_back(std::move(p));
  }
  return out;
}

nlohmann::json to_json(const EvalPair& p) {
  return {{"pair_id", p.pair_id},
          {"original_text", p.original_text},
          {"debiased_text", p.debiased_text},
          {"original_image", p.original_image},
          {"debiased_image", p.debiased_image},
          {"original_image_path", p.original_image_path},
          {"debiased_image_path", p.debiased_image_path}};
}

EvalPair eval_pair_from_json(const nlohmann::json& j) {
  EvalPair p;
  p.pair_id = j.at("pair_id").get<std::string>();
  p.original_text = j.at("original_text").get<std::string>();
  p.debiased_text = j.at("debiased_text").get<std::string>();
  p.original_image = j.at("original_image").get<std::string>();
  p.debiased_image = j.at("debiased_image").get<std::string>();
  p.original_image_path = j.value("original_image_path", "");
  p.debiased_image_path = j.value("debiased_image_path", "");
  return p;
}

void save_eval_pairs(const fs::path& path, const std::vector<EvalPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

std::vector<EvalPair> load_eval_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<EvalPair> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  auto fix = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (path.parent_path() / p).string();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      auto p = eval_pair_from_json(nlohmann::json::parse(line));
      fix(p.original_image_path);
      fix(p.debiased_image_path);
      if (!seen.insert(p.pair_id).second) throw ValidationError("duplicate pair id '" + p.pair_id + "'");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

void validate(const JudgmentRecord& r) {
  if (r.pair_id.empty()) throw ValidationError("pair_id is required");
  if (r.grader_id.empty()) throw ValidationError("grader_id is required");
  if (r.fluency < 1 || r.fluency > 5) throw ValidationError("fluency must be an integer from 1 to 5");
}

nlohmann::json to_json(const JudgmentRecord& r) {
  return {{"pair_id", r.pair_id},
          {"grader_id", r.grader_id},
          {"makes_sense_together", r.makes_sense_together},
          {"bias_reduced", r.bias_reduced},
          {"same_meaning", r.same_meaning},
          {"fluency", r.fluency},
          {"submitted_at", r.submitted_at}};
}

JudgmentRecord judgment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("judgment must be an object");
  static const std::set<std::string> known = {"pair_id",      "grader_id", "makes_sense_together", "bias_reduced",
                                              "same_meaning", "fluency",   "submitted_at"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ValidationError("unknown field '" + key + "'");
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    return j.at(key);
  };
  auto str = [&](const char* key) {
    const auto& v = need(key);
    if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  };
  auto flag = [&](const char* key) {
    const auto& v = need(key);
    if (!v.is_boolean()) throw ValidationError(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
  };
  JudgmentRecord r;
  r.pair_id = str("pair_id");
  r.grader_id = str("grader_id");
  r.makes_sense_together = flag("makes_sense_together");
  r.bias_reduced = flag("bias_reduced");
  r.same_meaning = flag("same_meaning");
  const auto& f = need("fluency");
  if (!f.is_number_integer()) throw ValidationError("field 'fluency' must be an integer");
  r.fluency = f.get<int>();
  if (j.contains("submitted_at")) {
    if (!j.at("submitted_at").is_string()) throw ValidationError("field 'submitted_at' must be a string");
    r.submitted_at = j.at("submitted_at").get<std::string>();
  }
  validate(r);
  return r;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

JudgmentStore::JudgmentStore(fs::path path) : path_(std::move(path)) {
  bool needs_newline = false;
  if (fs::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError("cannot read " + path_.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0, lineno = 0, good_end = 0;
    bool pending_error = false;
    std::string error;
    while (pos < content.size()) {
      auto nl = content.find('\n', pos);
      std::size_t end = nl == std::string::npos ? content.size() : nl + 1;
      std::string line = content.substr(pos, end - pos);
      pos = end;
      ++lineno;
      if (pending_error) throw ParseError(error, lineno - 1);
      if (text::trim(line).empty()) {
        good_end = end;
        continue;
      }
      try {
        auto r = judgment_from_json(nlohmann::json::parse(line));
        latest_[{r.pair_id, r.grader_id}] = r;
        good_end = end;
      } catch (const std::exception& e) {
        // A torn final line is a write that was never acknowledged; anything
        // earlier is corruption.
        pending_error = true;
        error = e.what();
      }
    }
    if (pending_error) {
      log::warn("dropping incomplete last record in " + path_.string());
      fs::resize_file(path_, good_end);
    } else if (!content.empty() && content.back() != '\n') {
      needs_newline = true;
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open " + path_.string() + ": " + std::strerror(errno));
  if (needs_newline && ::write(fd_, "\n", 1) != 1) throw IoError("cannot write " + path_.string());
}

JudgmentStore::~JudgmentStore() {
  if (fd_ >= 0) ::close(fd_);
}

void JudgmentStore::submit(const JudgmentRecord& record) {
  validate(record);
  std::string line = to_json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    ssize_t w = ::write(fd_, p, left);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw IoError("cannot append to " + path_.string() + ": " + std::strerror(errno));
    }
    p += w;
    left -= static_cast<std::size_t>(w);
  }
  if (::fsync(fd_) != 0) throw IoError("cannot sync " + path_.string() + ": " + std::strerror(errno));
  latest_[{record.pair_id, record.grader_id}] = record;
}

std::vector<JudgmentRecord> JudgmentStore::records() const {
  std::lock_guard lock(mu_);
  std::vector<JudgmentRecord> out;
  for (const auto& [_, r] : latest_) out.push_back(r);
  return out;
}

std::size_t JudgmentStore::size() const {
  std::lock_guard lock(mu_);
  return latest_.size();
}

bool JudgmentStore::contains(const std::string& pair_id, const std::string& grader_id) const {
  std::lock_guard lock(mu_);
  return latest_.contains({pair_id, grader_id});
}

namespace {

struct Tally {
  std::size_t n = 0, sense = 0, reduced = 0, same = 0;
  long fluency = 0;

  void add(const JudgmentRecord& r) {
    ++n;
    sense += r.makes_sense_together;
    reduced += r.bias_reduced;
    same += r.same_meaning;
    fluency += r.fluency;
  }
  QuestionStats stats() const {
    QuestionStats s;
    s.n = n;
    if (n == 0) return s;
    auto d = static_cast<double>(n);
    s.makes_sense_together = static_cast<double>(sense) / d;
    s.bias_reduced = static_cast<double>(reduced) / d;
    s.same_meaning = static_cast<double>(same) / d;
    s.mean_fluency = static_cast<double>(fluency) / d;
    return s;
  }
};

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

JudgmentReport aggregate_judgments(const std::vector<JudgmentRecord>& records) {
  Tally all;
  std::map<std::string, Tally> pairs;
  for (const auto& r : records) {
    all.add(r);
    pairs[r.pair_id].add(r);
  }
  JudgmentReport rep;
  rep.overall = all.stats();
  for (const auto& [id, t] : pairs) rep.per_pair[id] = t.stats();
  return rep;
}

nlohmann::json to_json(const QuestionStats& s) {
  return {{"n", s.n},
          {"makes_sense_together", opt(s.makes_sense_together)},
          {"bias_reduced", opt(s.bias_reduced)},
          {"same_meaning", opt(s.same_meaning)},
          {"mean_fluency", opt(s.mean_fluency)}};
}

nlohmann::json to_json(const JudgmentReport& r) {
  auto j = to_json(r.overall);
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [id, s] : r.per_pair) per[id] = to_json(s);
  j["per_pair"] = per;
  return j;
}

}  // namespace mmdebias::orchestrator
