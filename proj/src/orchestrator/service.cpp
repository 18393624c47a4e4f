#include "mmdebias/orchestrator/service.hpp"

#include <fstream>
#include <iterator>

#include <httplib.h>

#include "mmdebias/common/log.hpp"

namespace mmdebias::orchestrator {

struct EvalService::Http {
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::string image_url(const std::string& id) { return "/api/images/" + id; }

}  // namespace

EvalService::EvalService(std::vector<EvalPair> pairs, const std::filesystem::path& store_path)
    : pairs_(std::move(pairs)), store_(store_path), http_(std::make_unique<Http>()) {
  routes();
}

EvalService::~EvalService() { stop(); }

std::optional<EvalPair> EvalService::next_pair(const std::string& grader_id) const {
  for (const auto& p : pairs_)
    if (!store_.contains(p.pair_id, grader_id)) return p;
  return std::nullopt;
}

JudgmentRecord EvalService::submit(const JudgmentRecord& record) {
  validate(record);
  bool known = false;
  for (const auto& p : pairs_) known = known || p.pair_id == record.pair_id;
  if (!known) throw NotFoundError("unknown pair '" + record.pair_id + "'");
  JudgmentRecord r = record;
  if (r.submitted_at.empty()) r.submitted_at = utc_timestamp();
  store_.submit(r);
  return r;
}

void EvalService::routes() {
  auto& s = http_->server;

  s.Get("/api/pairs/next", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("grader") || req.get_param_value("grader").empty())
      return send_error(res, 400, "query parameter 'grader' is required");
    auto p = next_pair(req.get_param_value("grader"));
    if (!p) {
      res.status = 204;
      return;
    }
    send_json(res, 200,
              {{"pair_id", p->pair_id},
               {"original_text", p->original_text},
               {"debiased_text", p->debiased_text},
               {"original_image_url", image_url(p->original_image)},
               {"debiased_image_url", image_url(p->debiased_image)}});
  });

  s.Post("/api/judgments", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      return send_error(res, 400, "body is not valid JSON");
    }
    try {
      send_json(res, 201, to_json(submit(judgment_from_json(body))));
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const std::exception& e) {
      log::warn(std::string("judgment not stored: ") + e.what());
      send_error(res, 500, "judgment could not be stored");
    }
  });

  s.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, to_json(aggregate_judgments(store_.records())));
  });

  s.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::string path;
    for (const auto& p : pairs_) {
      if (p.original_image == id && !p.original_image_path.empty()) path = p.original_image_path;
      if (p.debiased_image == id && !p.debiased_image_path.empty()) path = p.debiased_image_path;
      if (!path.empty()) break;
    }
    if (path.empty()) return send_error(res, 404, "unknown image '" + id + "'");
    std::ifstream in(path, std::ios::binary);
    if (!in) return send_error(res, 404, "image file for '" + id + "' is unavailable");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.status = 200;
    res.set_content(bytes, "image/x-portable-anymap");
  });
}

int EvalService::bind(const std::string& host, int port) {
  if (port == 0) {
    int p = http_->server.bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!http_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void EvalService::listen() { http_->server.listen_after_bind(); }

void EvalService::stop() {
  if (http_) http_->server.stop();
}

void EvalService::wait_until_ready() const { http_->server.wait_until_ready(); }

}  // namespace mmdebias::orchestrator
