#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxsketch/fusion.hpp"

namespace httplib {
class Server;
}

namespace voxsketch {

struct ServiceConfig {
  int max_sessions = 64;
  int iterations = 5;
  bool incremental = false;  // one sweep from the previous grid instead of a full re-fuse
  GridFrame frame{};
  int resolution = 0;  // 0: the model's slice count
  int preview_size = 256;
};

/// Rejected request; `status` is the HTTP status the service answers with.
struct ServiceError : Error {
  int status;
  ServiceError(int s, const std::string& what) : Error(what), status(s) {}
};

struct SessionSnapshot {
  std::string id;
  int version = 0;
  std::vector<int> views;  // accepted viewpoint ids in fusion order
  WorldGrid grid;          // empty at version 0
};

/// Sessions share the model; each session's operations are serialized.
class SessionStore {
 public:
  SessionStore(Model model, ServiceConfig config);

  std::string create();
  /// Accepts a drawing for a viewpoint, recomputes the prediction and
  /// returns the new version. Re-submitting a viewpoint replaces its
  /// drawing in place.
  int submit(const std::string& id, const LineDrawing& drawing, int view);
  SessionSnapshot snapshot(const std::string& id) const;
  void remove(const std::string& id);
  std::size_t size() const;

  const ServiceConfig& config() const { return config_; }
  const Model& model() const { return model_; }
  int resolution() const { return config_.resolution; }
  Camera camera(int view) const;

 private:
  struct Session {
    std::mutex mutex;
    std::string id;
    ViewSet views;
    WorldGrid grid;
    int version = 0;
  };
  std::shared_ptr<Session> find(const std::string& id) const;

  Model model_;
  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  Rng id_rng_;
};

/// The 13 viewpoints with ids, labels, kinds and camera parameters.
nlohmann::json viewpoints_json(const GridFrame& frame);

/// HTTP front end:
///   POST   /sessions
///   POST   /sessions/{id}/drawings?view=ID      (PNG body)
///   GET    /sessions/{id}/prediction?format=voxels|mesh|preview&view=ID
///   GET    /viewpoints
///   DELETE /sessions/{id}
class HttpService {
 public:
  HttpService(Model model, ServiceConfig config);
  ~HttpService();

  SessionStore& store() { return store_; }
  /// Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void routes();
  SessionStore store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace voxsketch
