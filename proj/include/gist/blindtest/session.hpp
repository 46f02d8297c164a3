#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gist/image.hpp"

namespace gist::blindtest {

enum class Truth { Real, Synthetic };

std::string to_string(Truth t);  // "real" / "synthetic"
Truth truth_from_string(const std::string& s);  // throws InvalidArgument

struct Item {
  std::string item_id;  // opaque, independent of truth
  Truth truth = Truth::Real;
  std::size_t pool_index = 0;  // index into the real or synthetic pool
};

struct SessionConfig {
  int n_real = 50;
  int n_synth = 50;
  int n_orientation = 20;
  std::uint64_t seed = 0;
};

struct BlindTestSession {
  std::string session_id;
  SessionConfig config;
  std::vector<Item> items;        // presentation order
  std::vector<Item> orientation;  // disclosed real examples
  std::map<std::string, Truth> responses;
  std::int64_t created_at = 0;  // unix seconds

  bool complete() const { return responses.size() == items.size(); }
  const Item* find_item(const std::string& id) const;
  const Item* find_orientation(const std::string& id) const;
};

struct Ack {
  bool accepted = true;
  int remaining = 0;
  bool complete = false;
};

struct NextItem {
  bool complete = false;
  std::string item_id;
  int index = 0;
  int total = 0;
};

struct BlindTestReport {
  double accuracy = 0.0, precision = 0.0, recall = 0.0;
  // rows actual (real, synthetic), columns judged (real, synthetic)
  Eigen::Matrix2i confusion = Eigen::Matrix2i::Zero();
  std::string positive_class = "real";
};

// Orientation reals are drawn first, stratified by label, then test reals
// from the remaining pool, so the two never overlap. Everything except
// session_id/created_at is a function of (pool sizes, labels, config).
BlindTestSession create_session(const std::vector<ImageRecord>& real_pool, const std::vector<ImageRecord>& synth_pool,
                                const SessionConfig& config, std::string session_id = {});

Ack submit_response(BlindTestSession& session, const std::string& item_id, Truth label);

NextItem next_item(const BlindTestSession& session);

BlindTestReport score_session(const BlindTestSession& session);

// Scores from the 2x2 confusion matrix; precision is 0 when nothing was
// judged real.
BlindTestReport report_from_confusion(const Eigen::Matrix2i& confusion);

}  // namespace gist::blindtest
