// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "mad/service.hpp"
#include "support/small_data.hpp"

using namespace mad;
using json = nlohmann::json;

namespace {

std::shared_ptr<const Model> shared_model() {
  static const std::shared_ptr<const Model> model = [] {
    const Dataset d = test::small_dataset(8, 2, 2);
    TrainConfig c = test::small_config(2);
    return std::make_shared<const Model>(train(d, c).model);
  }();
  return model;
}

/// Fake monotonic clock advanced by hand.
struct FakeClock {
  std::chrono::steady_clock::time_point now{};
  SessionManager::Clock fn() {
    return [this] { return now; };
  }
};

class HttpService : public ::testing::Test {
 protected:
  void SetUp() override {
    ServiceOptions opts;
    opts.max_body_bytes = 256;
    manager_ = std::make_unique<SessionManager>(shared_model(), opts);
    install_routes(server_, *manager_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  std::string new_session() {
    auto res = client_->Post("/api/sessions", "", "application/json");
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body)["session_id"];
  }
  httplib::Result say(const std::string& id, const std::string& text) {
    return client_->Post("/api/sessions/" + id + "/turns", json{{"utterance", text}}.dump(),
                         "application/json");
  }

  httplib::Server server_;
  std::unique_ptr<SessionManager> manager_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST(SessionManager, ErrorsCarryHttpStatus) {
  SessionManager m(shared_model());
  try {
    m.submit("nope", "hi");
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 404);
  }
  const std::string id = m.create();
  try {
    m.submit(id, "  \t");
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 400);
  }
  EXPECT_THROW(m.remove("nope"), ServiceError);
}

TEST(SessionManager, FreshSessionHasEmptyTranscriptAndUniqueId) {
  SessionManager m(shared_model());
  std::set<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.insert(m.create());
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_EQ(m.size(), 20u);
  const auto t = m.transcript(*ids.begin());
  EXPECT_TRUE(t["turns"].empty());
}

TEST(SessionManager, IdenticalInputsGiveIdenticalResults) {
  SessionManager m(shared_model());
  const std::string a = m.create(), b = m.create();
  for (const char* u : {"i want italian food", "in the north please", "cheap"}) {
    EXPECT_EQ(m.submit(a, u), m.submit(b, u));
  }
  const auto ta = m.transcript(a)["turns"];
  ASSERT_EQ(ta.size(), 3u);
  EXPECT_EQ(ta[0]["system_prev"], "");
  // The previous system utterance fed to turn t is the verbalized act of t-1.
  EXPECT_EQ(ta[1]["system_prev"], ta[0]["system_utterance"]);
  EXPECT_EQ(ta[2]["turn"], 3);
}

TEST(SessionManager, TurnPayloadIsWellFormed) {
  SessionManager m(shared_model());
  const auto& o = shared_model()->ontology();
  const auto r = m.submit(m.create(), "book a table for four in the west");
  const auto& att = r["attention"];
  ASSERT_EQ(att.size(), o.slot_count());
  for (const auto& row : att) {
    ASSERT_EQ(row.size(), r["tokens"].size());
    double s = 0;
    for (double x : row) s += x;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  for (double g : r["gates"]) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
  double total = 0;
  for (const auto& e : r["act_type_dist"]) total += e["p"].get<double>();
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(r["mask_probs"].size(), o.slot_count());
  EXPECT_EQ(r["values_topk"]["Cuisine"].size(), 3u);
  EXPECT_TRUE(r["system_utterance"].is_string());
}

TEST(SessionManager, WireValuesRoundTripAtFullPrecision) {
  auto model = shared_model();
  SessionManager m(model);
  const std::string u = "i would like cheap food";
  const json wire = json::parse(m.submit(m.create(), u).dump());
  TurnTrace trace;
  model->step(model->initial_state(), u, "", &trace);
  for (std::size_t i = 0; i < trace.attention.rows(); ++i) {
    for (std::size_t j = 0; j < trace.attention.cols(); ++j) {
      EXPECT_EQ(wire["attention"][i][j].get<double>(), trace.attention.at(i, j));
    }
  }
  for (std::size_t i = 0; i < trace.gates.size(); ++i) {
    EXPECT_EQ(wire["gates"][i].get<double>(), trace.gates[i]);
  }
}

TEST(SessionManager, IdleSessionsExpireAfterTtl) {
  FakeClock clock;
  ServiceOptions opts;
  opts.ttl = std::chrono::seconds(60);
  SessionManager m(shared_model(), opts, clock.fn());
  const std::string old_id = m.create();
  clock.now += std::chrono::seconds(45);
  const std::string young = m.create();
  clock.now += std::chrono::seconds(30);
  EXPECT_EQ(m.expire_idle(), 1u);
  EXPECT_THROW(m.transcript(old_id), ServiceError);
  EXPECT_NO_THROW(m.transcript(young));  // also refreshes it
  clock.now += std::chrono::seconds(59);
  EXPECT_EQ(m.expire_idle(), 0u);
}

TEST_F(HttpService, SessionLifecycle) {
  const std::string id = new_session();
  auto t = client_->Get("/api/sessions/" + id);
  ASSERT_EQ(t->status, 200);
  EXPECT_TRUE(json::parse(t->body)["turns"].empty());

  auto r = say(id, "i want italian food");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["turn"], 1);

  t = client_->Get("/api/sessions/" + id);
  EXPECT_EQ(json::parse(t->body)["turns"].size(), 1u);

  EXPECT_EQ(client_->Delete("/api/sessions/" + id)->status, 204);
  EXPECT_EQ(client_->Get("/api/sessions/" + id)->status, 404);
  EXPECT_EQ(client_->Delete("/api/sessions/" + id)->status, 404);
}

TEST_F(HttpService, BadRequestsMapToStatusCodes) {
  const std::string id = new_session();
  EXPECT_EQ(say("ffff", "hello")->status, 404);
  EXPECT_EQ(say(id, "   ")->status, 400);
  auto r = client_->Post("/api/sessions/" + id + "/turns", "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_TRUE(json::parse(r->body).contains("error"));
  EXPECT_EQ(client_->Post("/api/sessions/" + id + "/turns", R"({"utterance": 3})",
                          "application/json")->status,
            400);
  EXPECT_EQ(say(id, std::string(400, 'a'))->status, 413);
  EXPECT_EQ(client_->Get("/api/nothing")->status, 404);
}

TEST_F(HttpService, ModelInfoAndDocs) {
  auto m = client_->Get("/api/model");
  ASSERT_EQ(m->status, 200);
  const json info = json::parse(m->body);
  EXPECT_EQ(info["variant"], "MAD");
  EXPECT_EQ(info["ontology_hash"], shared_model()->ontology().hash());
  EXPECT_EQ(info["slots"].size(), shared_model()->ontology().slot_count());
  EXPECT_EQ(info["m"], 16);

  auto d = client_->Get("/api/docs");
  ASSERT_EQ(d->status, 200);
  EXPECT_NE(d->body.find("/api/sessions"), std::string::npos);
  EXPECT_EQ(client_->Get("/")->status, 200);
}
