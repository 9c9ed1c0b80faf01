#pragma once

#include <memory>
#include <string>

#include "emoreact/pipeline.hpp"

namespace httplib {
class Server;
}

namespace emoreact {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";

  /// Overrides fields from EMOREACT_HOST, EMOREACT_PORT and EMOREACT_CORS_ORIGIN.
  void apply_environment();
};

struct HttpReply {
  int status = 200;
  std::string body;
};

/// Request handlers, independent of the transport. A null pipeline means the
/// models are not loaded.
HttpReply handle_health(const Pipeline* pipeline);
HttpReply handle_predict(const Pipeline* pipeline, const std::string& body);

/// HTTP front end: GET /health, POST /predict, CORS for the configured origin.
class Server {
 public:
  Server(ServerConfig config, std::shared_ptr<const Pipeline> pipeline);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the port.
  int bind();
  /// Serves until stop(); call after bind().
  void run();
  void stop();

  const ServerConfig& config() const { return config_; }

 private:
  ServerConfig config_;
  std::shared_ptr<const Pipeline> pipeline_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace emoreact
