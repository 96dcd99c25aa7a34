#include "voxsketch/service.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "httplib.h"
#include "voxsketch/dataset.hpp"
#include "voxsketch/mesh.hpp"
#include "voxsketch/render.hpp"

namespace voxsketch {

SessionStore::SessionStore(Model model, ServiceConfig config)
    : model_(std::move(model)), config_(std::move(config)), id_rng_(std::random_device{}()) {
  if (!model_.single) throw Error("service: model has no single-view network");
  if (config_.resolution == 0) config_.resolution = model_.slices();
  if (config_.resolution < 1) throw Error("service: resolution must be positive");
  if (config_.max_sessions < 1) throw Error("service: session cap must be positive");
  if (config_.iterations < 0) throw Error("service: iterations must be nonnegative");
  if (config_.iterations > 0 && !model_.updater) throw Error("service: model has no updater network");
}

Camera SessionStore::camera(int view) const { return viewpoint_camera(ViewpointId(view), config_.frame); }

std::string SessionStore::create() {
  std::lock_guard lock(mutex_);
  if (static_cast<int>(sessions_.size()) >= config_.max_sessions)
    throw ServiceError(503, "session cap of " + std::to_string(config_.max_sessions) +
                                " reached; delete an idle session or retry later");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%06llx%016llx", static_cast<unsigned long long>(++counter_ & 0xffffff),
                static_cast<unsigned long long>(id_rng_.next()));
  auto s = std::make_shared<Session>();
  s->id = buf;
  sessions_[s->id] = s;
  return s->id;
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "no session '" + id + "'");
  return it->second;
}

int SessionStore::submit(const std::string& id, const LineDrawing& drawing, int view) {
  auto s = find(id);
  if (view < 0 || view >= ViewpointId::kCount) throw ServiceError(400, "viewpoint id must lie in [0, 12]");
  const int r = model_.input_resolution();
  if (drawing.width != r || drawing.height != r)
    throw ServiceError(400, "drawing must be " + std::to_string(r) + "x" + std::to_string(r) + " pixels, got " +
                                std::to_string(drawing.width) + "x" + std::to_string(drawing.height));
  std::lock_guard lock(s->mutex);
  if (s->views.empty() && !ViewpointId(view).is_corner())
    throw ServiceError(400, "the first drawing must come from a 3/4 corner view (ids 0-7), got " +
                                std::to_string(view));
  ViewSet views = s->views;
  auto it = std::find_if(views.begin(), views.end(), [&](const ViewInput& v) { return v.view == view; });
  if (it != views.end())
    it->drawing = drawing;
  else
    views.push_back({drawing, camera(view), view});

  WorldGrid grid;
  if (views.size() == 1 && s->views.empty()) {
    grid = predict_single(model_, drawing, views.front().camera, config_.frame, config_.resolution);
  } else if (config_.incremental && s->version > 0) {
    FusionOptions opt;
    opt.iterations = 1;
    grid = fuse_from(model_, views, s->grid, opt).grid;
  } else {
    FusionOptions opt;
    opt.iterations = config_.iterations;
    grid = fuse(model_, views, config_.frame, config_.resolution, opt).grid;
  }
  s->views = std::move(views);
  s->grid = std::move(grid);
  return ++s->version;
}

SessionSnapshot SessionStore::snapshot(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  SessionSnapshot out{s->id, s->version, {}, s->grid};
  for (const ViewInput& v : s->views) out.views.push_back(v.view);
  return out;
}

void SessionStore::remove(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (!sessions_.erase(id)) throw ServiceError(404, "no session '" + id + "'");
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

nlohmann::json viewpoints_json(const GridFrame& frame) {
  nlohmann::json out = nlohmann::json::array();
  for (const ViewpointInfo& info : viewpoint_catalog()) {
    out.push_back({{"id", info.id},
                   {"label", info.label},
                   {"kind", info.kind == ViewKind::Corner ? "corner" : "accidental"},
                   {"azimuth_deg", info.azimuth_deg},
                   {"elevation_deg", info.elevation_deg},
                   {"camera", camera_to_json(viewpoint_camera(ViewpointId(info.id), frame))}});
  }
  return out;
}

// --- HTTP -----------------------------------------------------------------------------------

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  nlohmann::json body = {{"error", message}};
  if (status == 503) {
    body["retry_after_s"] = 5;
    res.set_header("Retry-After", "5");
  }
  res.set_content(body.dump(), "application/json");
}

int parse_view(const httplib::Request& req, int fallback) {
  if (!req.has_param("view")) {
    if (fallback >= 0) return fallback;
    throw ServiceError(400, "missing 'view' parameter");
  }
  const std::string v = req.get_param_value("view");
  try {
    std::size_t used = 0;
    const int id = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    if (id < 0 || id >= ViewpointId::kCount) throw ServiceError(400, "viewpoint id must lie in [0, 12]");
    return id;
  } catch (const std::logic_error&) {
    throw ServiceError(400, "bad viewpoint id '" + v + "'");
  }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status, e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

HttpService::HttpService(Model model, ServiceConfig config)
    : store_(std::move(model), std::move(config)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::routes() {
  httplib::Server& srv = *server_;
  srv.Post("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
             const std::string id = store_.create();
             res.status = 201;
             res.set_content(nlohmann::json{{"id", id}, {"version", 0}}.dump(), "application/json");
           }));
  srv.Post(R"(/sessions/([^/]+)/drawings)", guarded([this](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             const int view = parse_view(req, -1);
             LineDrawing drawing;
             try {
               drawing = decode_drawing_png(req.body);
             } catch (const Error& e) {
               throw ServiceError(400, std::string("bad drawing image: ") + e.what());
             }
             const int version = store_.submit(id, drawing, view);
             res.set_content(nlohmann::json{{"id", id}, {"version", version}}.dump(), "application/json");
           }));
  srv.Get(R"(/sessions/([^/]+)/prediction)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const SessionSnapshot snap = store_.snapshot(req.matches[1]);
            if (snap.version == 0) throw ServiceError(409, "no prediction yet: submit a drawing first");
            const std::string format = req.has_param("format") ? req.get_param_value("format") : "voxels";
            res.set_header("X-Version", std::to_string(snap.version));
            if (format == "voxels") {
              res.set_content(encode_vxg(snap.grid), "application/octet-stream");
            } else if (format == "mesh") {
              try {
                res.set_content(format_obj(extract_mesh(snap.grid)), "text/plain");
              } catch (const Error& e) {
                throw ServiceError(422, std::string("no surface to mesh: ") + e.what());
              }
            } else if (format == "preview") {
              const int view = parse_view(req, snap.views.empty() ? 0 : snap.views.back());
              const int size = store_.config().preview_size;
              res.set_content(encode_preview_png(raycast_preview(snap.grid, store_.camera(view), size, size)),
                              "image/png");
            } else {
              throw ServiceError(400, "format must be voxels, mesh or preview");
            }
          }));
  srv.Get("/viewpoints", guarded([this](const httplib::Request&, httplib::Response& res) {
            res.set_content(viewpoints_json(store_.config().frame).dump(), "application/json");
          }));
  srv.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
               store_.remove(req.matches[1]);
               res.status = 204;
             }));
}

bool HttpService::listen(const std::string& host, int port) { return server_->listen(host, port); }
int HttpService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool HttpService::listen_after_bind() { return server_->listen_after_bind(); }
void HttpService::stop() {
  if (server_) server_->stop();
}
void HttpService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace voxsketch
