#include "emoreact/server.hpp"

#include <cstdlib>
#include <iostream>

#include <httplib.h>
#include <json.hpp>

namespace emoreact {

using json = nlohmann::ordered_json;

namespace {

HttpReply error_reply(int status, std::string_view code, std::string_view message) {
  json j;
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  return {status, j.dump()};
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

void ServerConfig::apply_environment() {
  if (const char* h = std::getenv("EMOREACT_HOST"); h != nullptr && *h != '\0') host = h;
  if (const char* p = std::getenv("EMOREACT_PORT"); p != nullptr && *p != '\0') {
    char* end = nullptr;
    const long v = std::strtol(p, &end, 10);
    if (*end != '\0' || v < 0 || v > 65535) throw std::invalid_argument("EMOREACT_PORT is not a port number");
    port = static_cast<int>(v);
  }
  if (const char* o = std::getenv("EMOREACT_CORS_ORIGIN"); o != nullptr && *o != '\0') cors_origin = o;
}

HttpReply handle_health(const Pipeline* pipeline) {
  json j;
  if (pipeline == nullptr) {
    j["status"] = "unavailable";
    j["models"] = nullptr;
    return {503, j.dump()};
  }
  j["status"] = "ok";
  j["models"] = json::parse(pipeline->versions_json());
  return {200, j.dump()};
}

HttpReply handle_predict(const Pipeline* pipeline, const std::string& body) {
  if (pipeline == nullptr) return error_reply(503, "model_not_loaded", "models are not loaded");
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "invalid_json", "request body is not valid JSON");
  }
  if (!request.is_object()) return error_reply(400, "invalid_json", "request body must be a JSON object");
  if (!request.contains("text") || !request["text"].is_string()) {
    return error_reply(400, "missing_text", "field 'text' (string) is required");
  }
  const std::string text = request["text"].get<std::string>();
  if (blank(text)) return error_reply(400, "empty_text", "field 'text' is empty");
  std::vector<std::string> comments;
  if (request.contains("comments") && !request["comments"].is_null()) {
    if (!request["comments"].is_array()) return error_reply(400, "invalid_comments", "'comments' must be an array");
    for (const auto& c : request["comments"]) {
      if (!c.is_string()) return error_reply(400, "invalid_comments", "'comments' must hold strings");
      comments.push_back(c.get<std::string>());
    }
  }
  try {
    return {200, pipeline->predict(text, comments).to_json()};
  } catch (const std::exception& e) {
    return error_reply(500, "prediction_failed", e.what());
  }
}

Server::Server(ServerConfig config, std::shared_ptr<const Pipeline> pipeline)
    : config_(std::move(config)), pipeline_(std::move(pipeline)), http_(std::make_unique<httplib::Server>()) {
  const std::string origin = config_.cors_origin;
  http_->set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  http_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    const HttpReply r = handle_health(pipeline_.get());
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  http_->Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = handle_predict(pipeline_.get(), req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

Server::~Server() { stop(); }

int Server::bind() {
  if (config_.port == 0) {
    const int port = http_->bind_to_any_port(config_.host);
    if (port < 0) throw std::runtime_error("cannot bind " + config_.host);
    config_.port = port;
    return port;
  }
  if (!http_->bind_to_port(config_.host, config_.port)) {
    throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return config_.port;
}

void Server::run() { http_->listen_after_bind(); }

void Server::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

}  // namespace emoreact
