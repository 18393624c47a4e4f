#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmdebias/orchestrator/judgments.hpp"

namespace mmdebias::orchestrator {

/// Serves evaluation pairs and collects judgments:
///   GET  /api/pairs/next?grader=<id>  next pair that grader has not judged (204 when done)
///   POST /api/judgments               201 with the stored record; 400 invalid; 404 unknown pair
///   GET  /api/report                  aggregate report
///   GET  /api/images/<id>             image bytes
class EvalService {
 public:
  EvalService(std::vector<EvalPair> pairs, const std::filesystem::path& store_path);
  ~EvalService();

  /// Binds to `port` on `host` (0 picks a free port) and returns the port.
  int bind(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving requests until stop().
  void listen();
  void stop();
  void wait_until_ready() const;

  std::optional<EvalPair> next_pair(const std::string& grader_id) const;
  /// NotFoundError for an unknown pair; ValidationError for a bad record.
  JudgmentRecord submit(const JudgmentRecord& record);
  const JudgmentStore& store() const { return store_; }

 private:
  struct Http;
  void routes();

  std::vector<EvalPair> pairs_;
  JudgmentStore store_;
  std::unique_ptr<Http> http_;
};

}  // namespace mmdebias::orchestrator
