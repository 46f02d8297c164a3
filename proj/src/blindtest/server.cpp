#include "gist/blindtest/server.hpp"

#include <httplib.h>

#include <cstdio>
#include <set>

#include "gist/corpus.hpp"
#include "gist/error.hpp"
#include "gist/image_io.hpp"

namespace gist::blindtest {

using nlohmann::json;

namespace {

int http_status(Errc c) {
  switch (c) {
    case Errc::UnknownSession:
    case Errc::UnknownItem: return 404;
    case Errc::DuplicateResponse:
    case Errc::SessionComplete: return 409;
    case Errc::SessionIncomplete: return 403;
    case Errc::PoolTooSmall: return 422;
    case Errc::ParseError:
    case Errc::UnknownKey:
    case Errc::InvalidArgument: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_json(res, http_status(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", "ParseError"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

}  // namespace

BlindTestServer::BlindTestServer(BlindTestService& service, std::optional<std::filesystem::path> static_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}, {"Cache-Control", "no-store"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 201, service_.create(body_json(req)));
  }));
  s.Get(R"(/sessions/([A-Za-z0-9]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service_.status(req.matches[1]));
  }));
  s.Get(R"(/sessions/([A-Za-z0-9]+)/items/([A-Za-z0-9]+)/image)",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          bool orientation = false;
          const auto png = service_.image(req.matches[1], req.matches[2], orientation);
          res.set_header("X-Item-Kind", orientation ? "orientation" : "test");
          res.set_content(std::string(png.begin(), png.end()), "image/png");
        }));
  s.Get(R"(/sessions/([A-Za-z0-9]+)/next)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service_.next(req.matches[1]));
  }));
  s.Post(R"(/sessions/([A-Za-z0-9]+)/responses)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = body_json(req);
    if (!body.is_object() || !body.contains("item_id") || !body.contains("label"))
      throw Error(Errc::ParseError, "expected {item_id, label}");
    send_json(res, 200, service_.respond(req.matches[1], body.at("item_id").get<std::string>(), body.at("label").get<std::string>()));
  }));
  s.Get(R"(/sessions/([A-Za-z0-9]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service_.report(req.matches[1]));
  }));
  if (static_dir) s.set_mount_point("/", static_dir->string());
}

BlindTestServer::~BlindTestServer() { stop(); }

int BlindTestServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw Error(Errc::Io, "cannot bind " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) throw Error(Errc::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void BlindTestServer::listen() { server_->listen_after_bind(); }

void BlindTestServer::stop() {
  if (server_) server_->stop();
}

void BlindTestServer::wait_until_ready() const { server_->wait_until_ready(); }

ServeConfig parse_serve_config(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  static const std::set<std::string> known{"real_archive", "synthetic_archive", "state_dir", "static_dir", "host", "port"};
  if (!j.is_object()) throw Error(Errc::ParseError, "serve config must be an object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error(Errc::UnknownKey, "unknown serve key '" + key + "'");
  if (!j.contains("real_archive") || !j.contains("synthetic_archive"))
    throw Error(Errc::ParseError, "serve config needs real_archive and synthetic_archive");
  ServeConfig cfg;
  // Relative paths are taken relative to the config file.
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p; };
  try {
    cfg.real_archive = resolve(j.at("real_archive").get<std::string>());
    cfg.synthetic_archive = resolve(j.at("synthetic_archive").get<std::string>());
    if (j.contains("state_dir")) cfg.state_dir = resolve(j.at("state_dir").get<std::string>());
    if (j.contains("static_dir")) cfg.static_dir = resolve(j.at("static_dir").get<std::string>());
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return cfg;
}

int serve(const ServeConfig& cfg) {
  BlindTestService service(corpus::read_dataset(cfg.real_archive).records, corpus::read_dataset(cfg.synthetic_archive).records,
                           cfg.state_dir);
  BlindTestServer server(service, cfg.static_dir);
  const int port = server.bind(cfg.host, cfg.port);
  std::fprintf(stderr, "blind test service on http://%s:%d (%zu sessions restored)\n", cfg.host.c_str(), port, service.replayed());
  server.listen();
  return 0;
}

}  // namespace gist::blindtest
