#include "gist/blindtest/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gist/error.hpp"

namespace gist::blindtest {

namespace {

std::string random_id(std::mt19937_64& rng, std::set<std::string>& used) {
  static const char* hex = "0123456789abcdef";
  for (;;) {
    std::uint64_t v = rng();
    std::string id(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) id[static_cast<std::size_t>(i)] = hex[v & 15];
    if (used.insert(id).second) return id;
  }
}

// Largest-remainder allocation of n over the label strata of `pool`.
std::map<int, int> stratum_quotas(const std::map<int, std::vector<std::size_t>>& strata, std::size_t pool_size, int n) {
  struct Q {
    int key;
    int count;
    double rem;
  };
  std::vector<Q> qs;
  int assigned = 0;
  for (const auto& [key, members] : strata) {
    const double exact = static_cast<double>(n) * static_cast<double>(members.size()) / static_cast<double>(pool_size);
    const int base = static_cast<int>(std::floor(exact));
    qs.push_back({key, base, exact - base});
    assigned += base;
  }
  std::vector<std::size_t> order(qs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return qs[a].rem > qs[b].rem; });
  for (std::size_t i = 0; assigned < n && i < order.size(); ++i) {
    Q& q = qs[order[i]];
    if (static_cast<std::size_t>(q.count) < strata.at(q.key).size()) {
      ++q.count;
      ++assigned;
    }
  }
  std::map<int, int> out;
  for (const auto& q : qs) out[q.key] = q.count;
  return out;
}

}  // namespace

std::string to_string(Truth t) { return t == Truth::Real ? "real" : "synthetic"; }

Truth truth_from_string(const std::string& s) {
  if (s == "real") return Truth::Real;
  if (s == "synthetic") return Truth::Synthetic;
  throw Error(Errc::InvalidArgument, "label must be \"real\" or \"synthetic\"");
}

const Item* BlindTestSession::find_item(const std::string& id) const {
  for (const auto& it : items)
    if (it.item_id == id) return &it;
  return nullptr;
}

const Item* BlindTestSession::find_orientation(const std::string& id) const {
  for (const auto& it : orientation)
    if (it.item_id == id) return &it;
  return nullptr;
}

BlindTestSession create_session(const std::vector<ImageRecord>& real_pool, const std::vector<ImageRecord>& synth_pool,
                                const SessionConfig& config, std::string session_id) {
  if (config.n_real < 0 || config.n_synth < 0 || config.n_orientation < 0 || config.n_real + config.n_synth < 1)
    throw Error(Errc::InvalidArgument, "session needs at least one test item");
  const auto need_real = static_cast<std::size_t>(config.n_real + config.n_orientation);
  if (real_pool.size() < need_real)
    throw Error(Errc::PoolTooSmall, "real pool has " + std::to_string(real_pool.size()) + " images, " +
                                        std::to_string(need_real) + " needed (test + orientation)");
  if (synth_pool.size() < static_cast<std::size_t>(config.n_synth))
    throw Error(Errc::PoolTooSmall, "synthetic pool has " + std::to_string(synth_pool.size()) + " images, " +
                                        std::to_string(config.n_synth) + " needed");

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> real_order(real_pool.size());
  std::iota(real_order.begin(), real_order.end(), 0);
  std::shuffle(real_order.begin(), real_order.end(), rng);

  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i : real_order) strata[real_pool[i].label.value_or(-1)].push_back(i);
  const auto quotas = stratum_quotas(strata, real_pool.size(), config.n_orientation);
  std::set<std::size_t> oriented;
  std::vector<std::size_t> orientation_idx;
  for (const auto& [key, members] : strata)
    for (int i = 0; i < quotas.at(key); ++i) {
      orientation_idx.push_back(members[static_cast<std::size_t>(i)]);
      oriented.insert(members[static_cast<std::size_t>(i)]);
    }
  std::shuffle(orientation_idx.begin(), orientation_idx.end(), rng);

  std::vector<Item> items;
  for (std::size_t i : real_order) {
    if (items.size() == static_cast<std::size_t>(config.n_real)) break;
    if (!oriented.count(i)) items.push_back({{}, Truth::Real, i});
  }
  std::vector<std::size_t> synth_order(synth_pool.size());
  std::iota(synth_order.begin(), synth_order.end(), 0);
  std::shuffle(synth_order.begin(), synth_order.end(), rng);
  for (int i = 0; i < config.n_synth; ++i) items.push_back({{}, Truth::Synthetic, synth_order[static_cast<std::size_t>(i)]});
  std::shuffle(items.begin(), items.end(), rng);

  // Ids come from a separate stream drawn after shuffling, so they carry no
  // information about truth or pool position.
  std::mt19937_64 id_rng(config.seed ^ 0x5EC7E7B11D5ull);
  std::set<std::string> used;
  for (auto& it : items) it.item_id = random_id(id_rng, used);

  BlindTestSession s;
  s.session_id = std::move(session_id);
  s.config = config;
  s.items = std::move(items);
  for (std::size_t i : orientation_idx) s.orientation.push_back({random_id(id_rng, used), Truth::Real, i});
  s.created_at = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  return s;
}

Ack submit_response(BlindTestSession& session, const std::string& item_id, Truth label) {
  if (session.complete()) throw Error(Errc::SessionComplete, "session " + session.session_id + " is complete");
  if (!session.find_item(item_id)) throw Error(Errc::UnknownItem, "no test item '" + item_id + "'");
  if (session.responses.count(item_id)) throw Error(Errc::DuplicateResponse, "item '" + item_id + "' already answered");
  session.responses[item_id] = label;
  Ack a;
  a.remaining = static_cast<int>(session.items.size() - session.responses.size());
  a.complete = a.remaining == 0;
  return a;
}

NextItem next_item(const BlindTestSession& session) {
  NextItem n;
  n.total = static_cast<int>(session.items.size());
  for (std::size_t i = 0; i < session.items.size(); ++i)
    if (!session.responses.count(session.items[i].item_id)) {
      n.item_id = session.items[i].item_id;
      n.index = static_cast<int>(i);
      return n;
    }
  n.complete = true;
  n.index = n.total;
  return n;
}

BlindTestReport report_from_confusion(const Eigen::Matrix2i& c) {
  const int total = c.sum();
  if (total < 1) throw Error(Errc::EmptyConfusion, "no judgments");
  BlindTestReport r;
  r.confusion = c;
  r.accuracy = static_cast<double>(c(0, 0) + c(1, 1)) / total;
  const int judged_real = c(0, 0) + c(1, 0);
  const int actual_real = c(0, 0) + c(0, 1);
  r.precision = judged_real > 0 ? static_cast<double>(c(0, 0)) / judged_real : 0.0;
  r.recall = actual_real > 0 ? static_cast<double>(c(0, 0)) / actual_real : 0.0;
  return r;
}

BlindTestReport score_session(const BlindTestSession& session) {
  if (!session.complete()) throw Error(Errc::SessionIncomplete, "session " + session.session_id + " still has unanswered items");
  Eigen::Matrix2i c = Eigen::Matrix2i::Zero();
  for (const auto& it : session.items) {
    const Truth judged = session.responses.at(it.item_id);
    c(it.truth == Truth::Real ? 0 : 1, judged == Truth::Real ? 0 : 1) += 1;
  }
  return report_from_confusion(c);
}

}  // namespace gist::blindtest
