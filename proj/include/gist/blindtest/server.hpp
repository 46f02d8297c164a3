#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "gist/blindtest/service.hpp"

namespace httplib {
class Server;
}

namespace gist::blindtest {

// HTTP front end:
//   POST /sessions                               {config} -> {session_id, n_items, orientation_ids}
//   GET  /sessions/{id}                          -> {session_id, n_items, answered, complete, orientation_ids}
//   GET  /sessions/{id}/items/{item_id}/image    -> image/png (X-Item-Kind: test | orientation)
//   GET  /sessions/{id}/next                     -> {item_id, index, total} | {complete: true, total}
//   POST /sessions/{id}/responses                {item_id, label} -> {accepted, remaining}
//   GET  /sessions/{id}/report                   -> report, 403 until complete
// Errors are {"error": code, "message": text}.
class BlindTestServer {
 public:
  explicit BlindTestServer(BlindTestService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~BlindTestServer();

  // Returns the bound port (an ephemeral one when port == 0).
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  BlindTestService& service_;
  std::unique_ptr<httplib::Server> server_;
};

struct ServeConfig {
  std::filesystem::path real_archive;
  std::filesystem::path synthetic_archive;
  std::optional<std::filesystem::path> state_dir;
  std::optional<std::filesystem::path> static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
};

ServeConfig parse_serve_config(const std::filesystem::path& path);

// Loads both archives, replays state and serves until interrupted.
int serve(const ServeConfig& cfg);

}  // namespace gist::blindtest
