#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "gist/blindtest/session.hpp"

namespace gist::blindtest {

// Session store over fixed real/synthetic pools. Every session is mirrored to
// an append-only JSONL event log (create, then one line per response) under
// state_dir, and logs found there at construction are replayed.
class BlindTestService {
 public:
  BlindTestService(std::vector<ImageRecord> real_pool, std::vector<ImageRecord> synth_pool,
                   std::optional<std::filesystem::path> state_dir = std::nullopt);

  // Seed drawn from random_device when absent.
  nlohmann::json create(const SessionConfig& config, bool seeded);
  nlohmann::json create(const nlohmann::json& request);

  nlohmann::json status(const std::string& session_id) const;
  nlohmann::json next(const std::string& session_id) const;
  nlohmann::json respond(const std::string& session_id, const std::string& item_id, const std::string& label);
  nlohmann::json report(const std::string& session_id) const;

  // PNG bytes of a test or orientation item; `orientation` tells which.
  std::vector<std::uint8_t> image(const std::string& session_id, const std::string& item_id, bool& orientation) const;

  std::vector<std::string> session_ids() const;
  std::size_t replayed() const { return replayed_; }

  // Server-side snapshot (includes truths); never sent to clients.
  BlindTestSession snapshot(const std::string& session_id) const;

 private:
  struct Entry {
    mutable std::mutex mu;
    BlindTestSession session;
    std::filesystem::path log;
  };

  std::shared_ptr<Entry> find(const std::string& session_id) const;
  void replay(const std::filesystem::path& log);
  void append(const Entry& e, const nlohmann::json& event) const;
  std::string pool_fingerprint() const;

  std::vector<ImageRecord> real_, synth_;
  std::optional<std::filesystem::path> state_dir_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
  std::size_t replayed_ = 0;
};

nlohmann::json to_json(const BlindTestReport& r);

}  // namespace gist::blindtest
