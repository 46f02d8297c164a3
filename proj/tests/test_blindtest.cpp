#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <thread>

#include "gist/blindtest/server.hpp"
#include "gist/blindtest/service.hpp"
#include "gist/blindtest/session.hpp"
#include "gist/corpus.hpp"
#include "gist/error.hpp"
#include "support.hpp"

// After Eigen: resolv.h, pulled in here, defines a _res macro.
#include <httplib.h>

using namespace gist;
using namespace gist::blindtest;
using gist::testing::TempDir;
using nlohmann::json;

namespace {

std::vector<ImageRecord> pool(int n, std::uint64_t seed) { return corpus::generate_toy_corpus(n, 32, 2, seed); }

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidArgument;
}

SessionConfig cfg(int r, int s, int o, std::uint64_t seed) {
  SessionConfig c;
  c.n_real = r;
  c.n_synth = s;
  c.n_orientation = o;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Session, Cardinalities) {
  const auto real = pool(200, 1), synth = pool(200, 2);
  const auto s = create_session(real, synth, cfg(50, 50, 20, 0), "abc");
  EXPECT_EQ(s.items.size(), 100u);
  EXPECT_EQ(s.orientation.size(), 20u);
  EXPECT_EQ(std::count_if(s.items.begin(), s.items.end(), [](const Item& i) { return i.truth == Truth::Real; }), 50);
  std::set<std::string> ids;
  for (const auto& i : s.items) ids.insert(i.item_id);
  for (const auto& i : s.orientation) ids.insert(i.item_id);
  EXPECT_EQ(ids.size(), 120u);

  const auto small = create_session(pool(10, 1), pool(5, 2), cfg(5, 5, 5, 0));
  EXPECT_EQ(small.items.size(), 10u);
  EXPECT_EQ(code_of([&] { create_session(pool(60, 1), synth, cfg(50, 50, 20, 0)); }), Errc::PoolTooSmall);
  EXPECT_EQ(code_of([&] { create_session(real, pool(10, 2), cfg(50, 50, 20, 0)); }), Errc::PoolTooSmall);
}

TEST(Session, OrientationDisjointAndStratified) {
  const auto real = pool(100, 1), synth = pool(100, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = create_session(real, synth, cfg(50, 50, 20, seed));
    std::set<std::size_t> shown;
    int per_label[2] = {0, 0};
    for (const auto& o : s.orientation) {
      EXPECT_EQ(o.truth, Truth::Real);
      shown.insert(o.pool_index);
      per_label[*real[o.pool_index].label]++;
    }
    EXPECT_EQ(per_label[0], 10);
    EXPECT_EQ(per_label[1], 10);
    for (const auto& i : s.items)
      if (i.truth == Truth::Real) EXPECT_FALSE(shown.count(i.pool_index));
  }
}

TEST(Session, Reproducible) {
  const auto real = pool(100, 1), synth = pool(100, 2);
  const auto a = create_session(real, synth, cfg(30, 30, 10, 9), "a");
  const auto b = create_session(real, synth, cfg(30, 30, 10, 9), "b");
  ASSERT_EQ(a.items.size(), b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    EXPECT_EQ(a.items[i].item_id, b.items[i].item_id);
    EXPECT_EQ(a.items[i].truth, b.items[i].truth);
    EXPECT_EQ(a.items[i].pool_index, b.items[i].pool_index);
  }
  const auto c = create_session(real, synth, cfg(30, 30, 10, 10), "c");
  bool differs = false;
  for (std::size_t i = 0; i < a.items.size(); ++i) differs |= a.items[i].truth != c.items[i].truth;
  EXPECT_TRUE(differs);
}

TEST(Session, PresentationOrderIsUnbiased) {
  const auto real = pool(100, 1), synth = pool(100, 2);
  double total = 0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = create_session(real, synth, cfg(50, 50, 20, seed));
    for (std::size_t i = 0; i < s.items.size(); ++i)
      if (s.items[i].truth == Truth::Real) {
        total += static_cast<double>(i) / static_cast<double>(s.items.size() - 1);
        ++count;
      }
  }
  const double mean = total / count;
  EXPECT_GE(mean, 0.45);
  EXPECT_LE(mean, 0.55);
}

TEST(Session, ResponseRules) {
  auto s = create_session(pool(20, 1), pool(20, 2), cfg(2, 2, 2, 0));
  EXPECT_EQ(code_of([&] { submit_response(s, "nope", Truth::Real); }), Errc::UnknownItem);
  EXPECT_EQ(code_of([&] { submit_response(s, s.orientation[0].item_id, Truth::Real); }), Errc::UnknownItem);
  auto ack = submit_response(s, s.items[0].item_id, Truth::Real);
  EXPECT_TRUE(ack.accepted);
  EXPECT_EQ(ack.remaining, 3);
  EXPECT_EQ(code_of([&] { submit_response(s, s.items[0].item_id, Truth::Synthetic); }), Errc::DuplicateResponse);
  EXPECT_EQ(s.responses.at(s.items[0].item_id), Truth::Real);
  EXPECT_EQ(code_of([&] { score_session(s); }), Errc::SessionIncomplete);
  auto n = next_item(s);
  EXPECT_EQ(n.item_id, s.items[1].item_id);
  EXPECT_EQ(n.index, 1);
  for (std::size_t i = 1; i < 4; ++i) ack = submit_response(s, s.items[i].item_id, Truth::Synthetic);
  EXPECT_TRUE(ack.complete);
  EXPECT_TRUE(next_item(s).complete);
  EXPECT_EQ(code_of([&] { submit_response(s, s.items[0].item_id, Truth::Real); }), Errc::SessionComplete);
}

TEST(Scoring, HandExample) {
  Eigen::Matrix2i c;
  c << 29, 21, 24, 26;
  const auto r = report_from_confusion(c);
  EXPECT_NEAR(r.accuracy, 0.55, 1e-12);
  EXPECT_NEAR(r.precision, 29.0 / 53.0, 1e-12);
  EXPECT_NEAR(r.recall, 0.58, 1e-12);
  EXPECT_EQ(r.positive_class, "real");
}

TEST(Scoring, AllJudgedReal) {
  auto s = create_session(pool(100, 1), pool(100, 2), cfg(50, 50, 0, 3));
  for (const auto& i : s.items) submit_response(s, i.item_id, Truth::Real);
  const auto r = score_session(s);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(Scoring, TruthfulJudge) {
  auto s = create_session(pool(100, 1), pool(100, 2), cfg(20, 30, 0, 3));
  for (const auto& i : s.items) submit_response(s, i.item_id, i.truth);
  const auto r = score_session(s);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.confusion(0, 0), 20);
  EXPECT_EQ(r.confusion(1, 1), 30);
}

TEST(Service, ReplaysLogs) {
  TempDir dir;
  const auto real = pool(40, 1), synth = pool(40, 2);
  std::string id;
  std::vector<std::string> answered;
  {
    BlindTestService svc(real, synth, dir.path());
    id = svc.create(cfg(5, 5, 4, 1), true).at("session_id");
    const auto snap = svc.snapshot(id);
    for (int i = 0; i < 3; ++i) {
      svc.respond(id, snap.items[static_cast<std::size_t>(i)].item_id, i % 2 ? "real" : "synthetic");
      answered.push_back(snap.items[static_cast<std::size_t>(i)].item_id);
    }
  }
  // Simulate a crash mid-write.
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) std::ofstream(e.path(), std::ios::app) << "{\"event\":\"resp";
  BlindTestService again(real, synth, dir.path());
  EXPECT_EQ(again.replayed(), 1u);
  const auto st = again.status(id);
  EXPECT_EQ(st.at("answered"), 3);
  const auto snap = again.snapshot(id);
  for (const auto& a : answered) EXPECT_TRUE(snap.responses.count(a));
  EXPECT_EQ(again.next(id).at("index"), 3);
}

TEST(Service, RejectsBadRequests) {
  BlindTestService svc(pool(40, 1), pool(40, 2));
  EXPECT_EQ(code_of([&] { svc.status("missing"); }), Errc::UnknownSession);
  EXPECT_EQ(code_of([&] { svc.create(json{{"n_real", 100}}); }), Errc::PoolTooSmall);
  EXPECT_THROW(svc.create(json{{"colour", 1}}), Error);
  const std::string id = svc.create(cfg(2, 2, 2, 0), true).at("session_id");
  const auto item = svc.snapshot(id).items[0].item_id;
  EXPECT_THROW(svc.respond(id, item, "maybe"), Error);
  EXPECT_EQ(svc.status(id).at("answered"), 0);
}

namespace {

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    service_ = std::make_unique<BlindTestService>(pool(40, 1), pool(40, 2));
    server_ = std::make_unique<BlindTestServer>(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->listen(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  static void expect_blind(const std::string& body) {
    std::string lower = body;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    EXPECT_EQ(lower.find("real"), std::string::npos) << body;
    EXPECT_EQ(lower.find("synth"), std::string::npos) << body;
    EXPECT_EQ(lower.find("truth"), std::string::npos) << body;
  }

  std::unique_ptr<BlindTestService> service_;
  std::unique_ptr<BlindTestServer> server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_F(Http, FullSessionWithoutLeakingTruth) {
  auto res = client_->Post("/sessions", R"({"n_real":3,"n_synth":3,"n_orientation":2,"seed":4})", "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  expect_blind(res->body);
  const auto created = json::parse(res->body);
  const std::string id = created.at("session_id");
  EXPECT_EQ(created.at("n_items"), 6);
  ASSERT_EQ(created.at("orientation_ids").size(), 2u);

  const std::string orient = created.at("orientation_ids")[0];
  res = client_->Get("/sessions/" + id + "/items/" + orient + "/image");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("X-Item-Kind"), "orientation");

  res = client_->Get("/sessions/" + id + "/report");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 403);

  for (int i = 0; i < 6; ++i) {
    res = client_->Get("/sessions/" + id + "/next");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    expect_blind(res->body);
    const auto nx = json::parse(res->body);
    EXPECT_EQ(nx.at("index"), i);
    const std::string item = nx.at("item_id");

    res = client_->Get("/sessions/" + id + "/items/" + item + "/image");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(res->get_header_value("X-Item-Kind"), "test");
    EXPECT_EQ(res->body.substr(1, 3), "PNG");

    res = client_->Get("/sessions/" + id);
    ASSERT_TRUE(res);
    expect_blind(res->body);

    const json body{{"item_id", item}, {"label", i < 4 ? "real" : "synthetic"}};
    res = client_->Post("/sessions/" + id + "/responses", body.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200) << res->body;
    if (i < 5) expect_blind(res->body);
    EXPECT_EQ(json::parse(res->body).at("remaining"), 5 - i);

    if (i == 0) {
      res = client_->Post("/sessions/" + id + "/responses", body.dump(), "application/json");
      ASSERT_TRUE(res);
      EXPECT_EQ(res->status, 409);
    }
  }

  res = client_->Get("/sessions/" + id + "/next");
  ASSERT_TRUE(res);
  EXPECT_TRUE(json::parse(res->body).at("complete").get<bool>());

  res = client_->Get("/sessions/" + id + "/report");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto rep = json::parse(res->body);
  const auto expected = to_json(score_session(service_->snapshot(id)));
  EXPECT_EQ(rep, expected);
  EXPECT_EQ(rep.at("n_items"), 6);

  const json late{{"item_id", created.at("orientation_ids")[1]}, {"label", "real"}};
  res = client_->Post("/sessions/" + id + "/responses", late.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 409);
}

TEST_F(Http, ErrorStatuses) {
  auto res = client_->Get("/sessions/deadbeef");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_TRUE(json::parse(res->body).contains("error"));

  res = client_->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = client_->Post("/sessions", R"({"n_real":500})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);

  res = client_->Post("/sessions", R"({"n_real":2,"n_synth":2,"n_orientation":0})", "application/json");
  ASSERT_TRUE(res);
  const std::string id = json::parse(res->body).at("session_id");
  res = client_->Get("/sessions/" + id + "/items/ffff/image");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  res = client_->Post("/sessions/" + id + "/responses", R"({"item_id":"ffff","label":"real"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  res = client_->Get("/sessions/" + id + "/report");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 403);
}
