#include "gist/blindtest/service.hpp"

#include <fstream>
#include <random>

#include "gist/error.hpp"
#include "gist/image_io.hpp"

namespace gist::blindtest {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string new_session_id() {
  std::random_device rd;
  static const char* hex = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 4; ++i) {
    std::uint32_t v = rd();
    for (int k = 0; k < 8; ++k, v >>= 4) id.push_back(hex[v & 15]);
  }
  return id;
}

json orientation_ids(const BlindTestSession& s) {
  json ids = json::array();
  for (const auto& o : s.orientation) ids.push_back(o.item_id);
  return ids;
}

}  // namespace

json to_json(const BlindTestReport& r) {
  return json{{"accuracy", r.accuracy},
              {"precision", r.precision},
              {"recall", r.recall},
              {"positive_class", r.positive_class},
              {"confusion",
               {{"real_judged_real", r.confusion(0, 0)},
                {"real_judged_synthetic", r.confusion(0, 1)},
                {"synthetic_judged_real", r.confusion(1, 0)},
                {"synthetic_judged_synthetic", r.confusion(1, 1)}}},
              {"n_items", r.confusion.sum()}};
}

BlindTestService::BlindTestService(std::vector<ImageRecord> real_pool, std::vector<ImageRecord> synth_pool,
                                   std::optional<fs::path> state_dir)
    : real_(std::move(real_pool)), synth_(std::move(synth_pool)), state_dir_(std::move(state_dir)) {
  if (!state_dir_) return;
  fs::create_directories(*state_dir_);
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(*state_dir_))
    if (e.path().extension() == ".jsonl") logs.push_back(e.path());
  std::sort(logs.begin(), logs.end());
  for (const auto& p : logs) replay(p);
}

std::string BlindTestService::pool_fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    h = (h ^ 0xff) * 1099511628211ull;
  };
  for (const auto& r : real_) mix(r.id + ":" + std::to_string(r.label.value_or(-1)));
  mix("|");
  for (const auto& r : synth_) mix(r.id);
  return std::to_string(real_.size()) + "/" + std::to_string(synth_.size()) + "/" + std::to_string(h);
}

void BlindTestService::replay(const fs::path& log) {
  std::ifstream in(log);
  std::string line;
  std::shared_ptr<Entry> entry;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json ev;
    try {
      ev = json::parse(line);
    } catch (const json::exception&) {
      break;  // torn final line from a crash
    }
    const auto kind = ev.value("event", std::string());
    if (kind == "create") {
      if (ev.value("pools", std::string()) != pool_fingerprint())
        throw Error(Errc::CorruptArchive, log.string() + " was recorded against different image pools");
      SessionConfig cfg;
      cfg.n_real = ev.at("n_real");
      cfg.n_synth = ev.at("n_synth");
      cfg.n_orientation = ev.at("n_orientation");
      cfg.seed = ev.at("seed");
      entry = std::make_shared<Entry>();
      entry->session = create_session(real_, synth_, cfg, ev.at("session_id"));
      entry->session.created_at = ev.at("created_at");
      entry->log = log;
    } else if (kind == "response" && entry) {
      submit_response(entry->session, ev.at("item_id"), truth_from_string(ev.at("label")));
    }
  }
  if (entry) {
    sessions_[entry->session.session_id] = entry;
    ++replayed_;
  }
}

void BlindTestService::append(const Entry& e, const json& event) const {
  if (e.log.empty()) return;
  std::ofstream out(e.log, std::ios::app);
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::Io, "cannot append to " + e.log.string());
}

std::shared_ptr<BlindTestService::Entry> BlindTestService::find(const std::string& session_id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::UnknownSession, "no session '" + session_id + "'");
  return it->second;
}

json BlindTestService::create(const SessionConfig& config, bool seeded) {
  SessionConfig cfg = config;
  if (!seeded) cfg.seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) | std::random_device{}();
  auto entry = std::make_shared<Entry>();
  std::string id;
  {
    std::shared_lock lock(mu_);
    do id = new_session_id();
    while (sessions_.count(id));
  }
  entry->session = create_session(real_, synth_, cfg, id);
  if (state_dir_) entry->log = *state_dir_ / (id + ".jsonl");
  append(*entry, json{{"event", "create"},
                      {"session_id", id},
                      {"n_real", cfg.n_real},
                      {"n_synth", cfg.n_synth},
                      {"n_orientation", cfg.n_orientation},
                      {"seed", cfg.seed},
                      {"created_at", entry->session.created_at},
                      {"pools", pool_fingerprint()}});
  {
    std::unique_lock lock(mu_);
    sessions_[id] = entry;
  }
  return json{{"session_id", id}, {"n_items", entry->session.items.size()}, {"orientation_ids", orientation_ids(entry->session)}};
}

json BlindTestService::create(const json& request) {
  if (!request.is_object()) throw Error(Errc::ParseError, "session config must be an object");
  for (const auto& [key, _] : request.items())
    if (key != "n_real" && key != "n_synth" && key != "n_orientation" && key != "seed")
      throw Error(Errc::UnknownKey, "unknown session key '" + key + "'");
  SessionConfig cfg;
  try {
    cfg.n_real = request.value("n_real", cfg.n_real);
    cfg.n_synth = request.value("n_synth", cfg.n_synth);
    cfg.n_orientation = request.value("n_orientation", cfg.n_orientation);
    if (request.contains("seed")) cfg.seed = request.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return create(cfg, request.contains("seed"));
}

json BlindTestService::status(const std::string& session_id) const {
  auto e = find(session_id);
  std::lock_guard lock(e->mu);
  const auto& s = e->session;
  return json{{"session_id", s.session_id},
              {"n_items", s.items.size()},
              {"answered", s.responses.size()},
              {"complete", s.complete()},
              {"orientation_ids", orientation_ids(s)}};
}

json BlindTestService::next(const std::string& session_id) const {
  auto e = find(session_id);
  std::lock_guard lock(e->mu);
  const auto n = next_item(e->session);
  if (n.complete) return json{{"complete", true}, {"total", n.total}};
  return json{{"item_id", n.item_id}, {"index", n.index}, {"total", n.total}};
}

json BlindTestService::respond(const std::string& session_id, const std::string& item_id, const std::string& label) {
  auto e = find(session_id);
  const Truth t = truth_from_string(label);
  std::lock_guard lock(e->mu);
  // Validate against a copy first so a failed log append leaves no trace.
  BlindTestSession trial = e->session;
  const Ack ack = submit_response(trial, item_id, t);
  append(*e, json{{"event", "response"}, {"item_id", item_id}, {"label", label}});
  e->session = std::move(trial);
  return json{{"accepted", ack.accepted}, {"remaining", ack.remaining}};
}

json BlindTestService::report(const std::string& session_id) const {
  auto e = find(session_id);
  std::lock_guard lock(e->mu);
  return to_json(score_session(e->session));
}

std::vector<std::uint8_t> BlindTestService::image(const std::string& session_id, const std::string& item_id,
                                                  bool& orientation) const {
  auto e = find(session_id);
  std::lock_guard lock(e->mu);
  if (const Item* it = e->session.find_item(item_id)) {
    orientation = false;
    return io::encode_png(it->truth == Truth::Real ? real_[it->pool_index].image : synth_[it->pool_index].image);
  }
  if (const Item* it = e->session.find_orientation(item_id)) {
    orientation = true;
    return io::encode_png(real_[it->pool_index].image);
  }
  throw Error(Errc::UnknownItem, "no item '" + item_id + "'");
}

std::vector<std::string> BlindTestService::session_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

BlindTestSession BlindTestService::snapshot(const std::string& session_id) const {
  auto e = find(session_id);
  std::lock_guard lock(e->mu);
  return e->session;
}

}  // namespace gist::blindtest
