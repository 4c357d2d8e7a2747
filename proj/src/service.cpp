// SPDX-License-Identifier: Apache-2.0
#include "mad/service.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "httplib.h"

#include "mad/datagen.hpp"
#include "mad/rng.hpp"

namespace mad {

namespace {

using json = nlohmann::ordered_json;

json tensor_array(const Tensor& t) {
  if (t.empty()) return nullptr;
  if (t.rank() == 1) return t.values();
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

json act_json(const Ontology& o, const DialogueAct& act) {
  json mask = json::object(), values = json::object();
  for (std::size_t i = 0; i < o.slot_count(); ++i) {
    mask[o.slots[i].name] = act.mask[i];
    if (act.mask[i] == 1 && act.values[i]) {
      values[o.slots[i].name] = o.slots[i].values[*act.values[i]];
    }
  }
  return json{{"type", o.act_types[act.type]}, {"mask", mask}, {"values", values}};
}

constexpr const char* kDocs = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>MAD API</title></head><body>
<h1>Dialogue manager API</h1>
<p>All bodies are UTF-8 JSON. Request bodies are limited to 8 KiB (413 otherwise).</p>
<table border="1" cellpadding="4">
<tr><th>Method</th><th>Path</th><th>Body</th><th>Response</th></tr>
<tr><td>POST</td><td>/api/sessions</td><td>none</td><td>201 {"session_id"}</td></tr>
<tr><td>POST</td><td>/api/sessions/{id}/turns</td><td>{"utterance": string}</td>
<td>200 TurnResult; 400 empty or malformed; 404 unknown session</td></tr>
<tr><td>GET</td><td>/api/sessions/{id}</td><td></td><td>200 {"session_id", "turns": [TurnResult]}</td></tr>
<tr><td>DELETE</td><td>/api/sessions/{id}</td><td></td><td>204; 404 unknown session</td></tr>
<tr><td>GET</td><td>/api/model</td><td></td><td>200 ontology, dimensions, variant</td></tr>
</table>
<h2>TurnResult</h2>
<pre>
turn                  1-based turn index
user, system_prev     user utterance and the verbalized previous system act
tokens, truncated     utterance tokens the model attended over
slots                 slot names (row order of every per-slot array)
act                   {"type", "mask": {slot: 0|1}, "values": {slot: value}}
system_utterance      verbalized predicted act (next turn's system_prev)
act_type_dist         [{"type", "p"}] over all act types
mask_probs            [p] per slot; mask = p &gt; 0.5
gates                 [beta] per slot, or null without value memory
attention             [[alpha]] slots x tokens, or null without attention
value_dists           [[p]] per slot over its value list
values_topk           {slot: [{"value", "p"}]} top 3 per slot
read_value, read_external   memory read vectors
</pre>
<p>Errors are {"error": message} with the matching status code.</p>
</body></html>
)";

constexpr const char* kNoUi = R"(<!doctype html>
<html><body><p>No UI bundle configured. See <a href="/api/docs">/api/docs</a>.</p></body></html>
)";

}  // namespace

json turn_result_json(const Model& model, std::size_t turn, const std::string& user,
                      const std::string& system_prev, const TurnTrace& trace,
                      std::size_t top_k) {
  const Ontology& o = model.ontology();
  json slots = json::array();
  for (const auto& s : o.slots) slots.push_back(s.name);
  json dist = json::array();
  for (std::size_t k = 0; k < o.act_count(); ++k) {
    dist.push_back(json{{"type", o.act_types[k]}, {"p", trace.heads.act_type[k]}});
  }
  json value_dists = json::array();
  json topk = json::object();
  for (std::size_t i = 0; i < o.slot_count(); ++i) {
    const Tensor& v = trace.heads.values[i];
    value_dists.push_back(v.values());
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    json top = json::array();
    for (std::size_t k = 0; k < std::min(top_k, idx.size()); ++k) {
      top.push_back(json{{"value", o.slots[i].values[idx[k]]}, {"p", v[idx[k]]}});
    }
    topk[o.slots[i].name] = top;
  }
  json r;
  r["turn"] = turn;
  r["user"] = user;
  r["system_prev"] = system_prev;
  r["tokens"] = trace.tokens;
  r["truncated"] = trace.truncated;
  r["slots"] = slots;
  r["act"] = act_json(o, trace.act);
  r["system_utterance"] = verbalize_act(o, trace.act);
  r["act_type_dist"] = dist;
  r["mask_probs"] = trace.heads.mask.values();
  r["gates"] = tensor_array(trace.gates);
  r["attention"] = tensor_array(trace.attention);
  r["value_dists"] = value_dists;
  r["values_topk"] = topk;
  r["read_value"] = tensor_array(trace.read_value);
  r["read_external"] = tensor_array(trace.read_external);
  return r;
}

json model_info_json(const Model& model) {
  const Ontology& o = model.ontology();
  json slots = json::array();
  for (const auto& s : o.slots) slots.push_back(json{{"name", s.name}, {"values", s.values}});
  const ModelConfig& c = model.config();
  return json{{"variant", c.variant_name()},
              {"ontology_hash", o.hash()},
              {"slots", slots},
              {"da_types", o.act_types},
              {"ask_slot", o.ask_slot ? json(o.slots[*o.ask_slot].name) : json(nullptr)},
              {"m", c.m},
              {"n_e", c.n_e},
              {"max_tokens", c.max_tokens},
              {"vocab_size", model.vocab().size()},
              {"mask_head_inputs", c.mask_inputs == MaskHeadInputs::kProse ? "prose" : "formula"}};
}

SessionManager::SessionManager(std::shared_ptr<const Model> model, ServiceOptions options,
                               Clock clock)
    : model_(std::move(model)),
      options_(std::move(options)),
      clock_(clock ? std::move(clock) : Clock(&std::chrono::steady_clock::now)),
      salt_(std::random_device{}() ^
            static_cast<std::uint64_t>(
                std::chrono::system_clock::now().time_since_epoch().count())) {}

std::string SessionManager::create() {
  expire_idle();
  auto entry = std::make_shared<Entry>();
  entry->state = model_->initial_state();
  entry->touched = clock_();
  std::lock_guard lock(mutex_);
  char id[24];
  std::snprintf(id, sizeof id, "%016llx",
                static_cast<unsigned long long>(splitmix64(salt_ + ++counter_)));
  sessions_.emplace(id, std::move(entry));
  return id;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

json SessionManager::submit(const std::string& id, const std::string& utterance) {
  expire_idle();
  auto entry = find(id);
  if (utterance.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ServiceError(400, "utterance must not be empty");
  }
  std::lock_guard lock(entry->mutex);
  TurnTrace trace;
  const std::string prev = entry->last_system;
  entry->state = model_->step(entry->state, utterance, prev, &trace);
  json result = turn_result_json(*model_, entry->state.turn, utterance, prev, trace,
                                 options_.top_k);
  entry->last_system = verbalize_act(model_->ontology(), trace.act);
  entry->turns.push_back(result);
  entry->touched = clock_();
  return result;
}

json SessionManager::transcript(const std::string& id) {
  expire_idle();
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  entry->touched = clock_();
  return json{{"session_id", id}, {"turns", entry->turns}};
}

void SessionManager::remove(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (sessions_.erase(id) == 0) throw ServiceError(404, "unknown session '" + id + "'");
}

std::size_t SessionManager::expire_idle() {
  const auto now = clock_();
  std::lock_guard lock(mutex_);
  std::size_t dropped = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock entry_lock(it->second->mutex, std::try_to_lock);
    // A session with a turn in flight is by definition not idle.
    if (entry_lock.owns_lock() && now - it->second->touched > options_.ttl) {
      entry_lock.unlock();
      it = sessions_.erase(it);
      ++dropped;
    } else {
      ++it;
    }
  }
  return dropped;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void install_routes(httplib::Server& server, SessionManager& sessions) {
  const std::size_t limit = sessions.options().max_body_bytes;
  server.set_payload_max_length(limit);

  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [send](auto&& fn) {
    return [fn, send](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const ServiceError& e) {
        send(res, e.status(), json{{"error", e.what()}});
      } catch (const std::exception& e) {
        send(res, 500, json{{"error", e.what()}});
      }
    };
  };

  server.Post("/api/sessions", guarded([&sessions, send](const httplib::Request&,
                                                         httplib::Response& res) {
    send(res, 201, json{{"session_id", sessions.create()}});
  }));

  server.Post(R"(/api/sessions/([^/]+)/turns)",
              guarded([&sessions, send, limit](const httplib::Request& req,
                                                httplib::Response& res) {
                if (req.body.size() > limit) throw ServiceError(413, "request body too large");
                json body;
                try {
                  body = json::parse(req.body);
                } catch (const json::parse_error&) {
                  throw ServiceError(400, "body must be JSON {\"utterance\": string}");
                }
                if (!body.is_object() || !body.contains("utterance") ||
                    !body["utterance"].is_string()) {
                  throw ServiceError(400, "body must be JSON {\"utterance\": string}");
                }
                send(res, 200, sessions.submit(req.matches[1], body["utterance"]));
              }));

  server.Get(R"(/api/sessions/([^/]+))",
             guarded([&sessions, send](const httplib::Request& req, httplib::Response& res) {
               send(res, 200, sessions.transcript(req.matches[1]));
             }));

  server.Delete(R"(/api/sessions/([^/]+))",
                guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                  sessions.remove(req.matches[1]);
                  res.status = 204;
                }));

  server.Get("/api/model", guarded([&sessions, send](const httplib::Request&,
                                                      httplib::Response& res) {
    send(res, 200, sessions.model_info());
  }));

  server.Get("/api/docs", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(kDocs, "text/html; charset=utf-8");
  });

  const std::string& dir = sessions.options().static_dir;
  if (dir.empty() || !server.set_mount_point("/", dir)) {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kNoUi, "text/html; charset=utf-8");
    });
  }

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const char* msg = res.status == 413 ? "request body too large" : "not found";
      res.set_content(json{{"error", msg}}.dump(), "application/json");
    }
  });
}

void serve(SessionManager& sessions, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, sessions);
  if (!server.listen(host, port)) {
    throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace mad
