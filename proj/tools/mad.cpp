// SPDX-License-Identifier: Apache-2.0
//
// mad: data generation, training, evaluation, a terminal REPL, a sweep
// harness and the HTTP service in one binary.
//
// Settings resolve as flags > --config file > built-in defaults; every
// command prints the resolved settings (including the seed) to stderr before
// it starts, so stdout stays a clean report.
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mad/corpus_io.hpp"
#include "mad/datagen.hpp"
#include "mad/error.hpp"
#include "mad/evaluation.hpp"
#include "mad/model_io.hpp"
#include "mad/service.hpp"
#include "mad/sweep.hpp"
#include "mad/training.hpp"

namespace {

using namespace mad;

// Flat "key=value" file; '#' starts a comment.
std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", n);
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct GenOptions {
  std::string domain = "restaurant";
  std::string task = "1";
  std::size_t train = 1000, dev = 1000, test = 1000;
  std::uint64_t seed = 42;
  std::size_t cities = 174;
  std::size_t dates = 100;
  std::string out = "data";
  std::string config;
};

struct TrainOptions {
  std::string data = "data";
  std::string out = "model.madm";
  std::string config;
  std::uint64_t seed = 42;
  std::vector<std::string> ablations;
  std::vector<std::string> sets;
  bool json = false;
};

struct EvalOptions {
  std::string model = "model.madm";
  std::string data = "data";
  std::string split = "test";
  bool json = false;
};

struct ServeOptions {
  std::string model = "model.madm";
  std::string data = "data";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::size_t ttl_minutes = 30;
};

struct SweepOptions {
  std::string data = "data";
  std::string config;
  std::string key = "n_e";
  std::vector<std::string> values{"3", "4", "5", "6", "7", "8", "9"};
  std::string format = "jsonl";
  std::string out;
  std::uint64_t seed = 42;
  std::vector<std::string> ablations;
  std::vector<std::string> sets;
};

void apply_ablations(TrainConfig& c, const std::vector<std::string>& ablations) {
  for (const auto& a : ablations) {
    if (a == "sm") {
      c.model.no_value_memory = true;
    } else if (a == "attn") {
      c.model.no_attention = true;
    } else if (a == "em") {
      c.model.no_external_memory = true;
    } else if (a == "rnn") {
      c.rnn_only = true;
    } else {
      throw ConfigError("unknown ablation '" + a + "' (expected sm, attn, em or rnn)");
    }
  }
}

void apply_sets(TrainConfig& c, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
  }
}

TrainConfig resolve_train_config(const std::string& file, const CLI::Option* seed_opt,
                                 std::uint64_t seed,
                                 const std::vector<std::string>& ablations,
                                 const std::vector<std::string>& sets) {
  TrainConfig c;
  if (!file.empty()) c = parse_config(read_text_file(file), c);
  if (seed_opt->count() > 0) c.seed = seed;
  apply_ablations(c, ablations);
  apply_sets(c, sets);
  c.validate();
  return c;
}

void print_resolved(const std::string& command, const std::string& text) {
  std::cerr << "# " << command << " resolved settings\n" << text << std::flush;
}

int cmd_gen(const GenOptions& o, const CLI::App& app) {
  GenConfig g;
  // Config file first, flags second.
  std::map<std::string, std::string> file;
  if (!o.config.empty()) file = read_kv_file(o.config);
  auto pick = [&](const char* flag, const std::string& key, const std::string& value) {
    if (app.get_option(flag)->count() > 0) return value;
    if (auto it = file.find(key); it != file.end()) return it->second;
    return value;
  };
  auto to_count = [](const std::string& key, const std::string& v) -> std::size_t {
    try {
      std::size_t used = 0;
      const unsigned long long n = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ConfigError("bad value for " + key + ": '" + v + "'");
    }
  };
  for (const auto& [k, v] : file) {
    static const char* known[] = {"domain", "task", "train", "dev", "test",
                                  "seed",   "cities", "dates"};
    if (std::find(std::begin(known), std::end(known), k) == std::end(known)) {
      throw ConfigError("unknown gen config key '" + k + "'");
    }
  }
  g.domain = parse_domain(pick("--domain", "domain", o.domain));
  g.task = parse_task(pick("--task", "task", o.task));
  g.sizes.train = to_count("train", pick("--train", "train", std::to_string(o.train)));
  g.sizes.dev = to_count("dev", pick("--dev", "dev", std::to_string(o.dev)));
  g.sizes.test = to_count("test", pick("--test", "test", std::to_string(o.test)));
  g.seed = to_count("seed", pick("--seed", "seed", std::to_string(o.seed)));
  g.flight.cities = to_count("cities", pick("--cities", "cities", std::to_string(o.cities)));
  g.flight.dates = to_count("dates", pick("--dates", "dates", std::to_string(o.dates)));

  std::ostringstream s;
  s << "domain=" << to_string(g.domain) << "\ntask=" << to_string(g.task)
    << "\ntrain=" << g.sizes.train << "\ndev=" << g.sizes.dev << "\ntest=" << g.sizes.test
    << "\nseed=" << g.seed << "\n";
  if (g.domain == Domain::kFlight) {
    s << "cities=" << g.flight.cities << "\ndates=" << g.flight.dates << "\n";
  }
  s << "out=" << o.out << "\n";
  print_resolved("gen", s.str());

  const Ontology ontology = build_ontology(g);
  Dataset data{ontology, generate_corpus(ontology, g)};
  write_dataset(o.out, data);
  std::cout << "wrote " << data.corpus.train.size() << "/" << data.corpus.dev.size() << "/"
            << data.corpus.test.size() << " sessions to " << o.out << " (ontology "
            << ontology.hash() << ")\n";
  return 0;
}

int cmd_train(const TrainOptions& o, const CLI::App& app) {
  const TrainConfig config =
      resolve_train_config(o.config, app.get_option("--seed"), o.seed, o.ablations, o.sets);
  print_resolved("train", config_to_text(config) + "data=" + o.data + "\nout=" + o.out + "\n");
  const Dataset data = read_dataset(o.data);
  TrainResult result = train(data, config, [&](const EpochLog& log) {
    if (o.json) {
      std::cout << log.to_json() << "\n" << std::flush;
    } else {
      std::cout << "epoch " << log.epoch << " " << log.stage << " gamma=" << log.gamma
                << " lambda=" << log.lambda << " train_loss=" << std::fixed
                << std::setprecision(4) << log.train_loss << " dev_loss=" << log.dev_loss
                << " dev_turn_acc=" << log.dev_overall_turn_acc << std::defaultfloat
                << std::setprecision(6) << "\n"
                << std::flush;
    }
  });
  save_model(o.out, result.model);
  std::cerr << "best epoch "
            << (result.best_epoch ? std::to_string(*result.best_epoch) : "none")
            << "; model written to " << o.out << "\n";
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  print_resolved("eval", "model=" + o.model + "\ndata=" + o.data + "\nsplit=" + o.split +
                             "\nseed=none\n");
  const Ontology ontology = read_ontology(std::filesystem::path(o.data) / "ontology.json");
  const auto split = read_dataset_split(o.data, o.split, ontology);
  const Model model = load_model(o.model, ontology);
  MetricsReport report = evaluate(model, ontology, split);
  report.info["split"] = o.split;
  report.info["model"] = o.model;
  std::cout << (o.json ? report.to_json() : report.to_lines());
  return 0;
}

std::string bar(double p, std::size_t width = 20) {
  const auto filled = static_cast<std::size_t>(std::lround(std::clamp(p, 0.0, 1.0) * width));
  return std::string(filled, '#') + std::string(width - filled, '.');
}

std::string fixed3(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

void render_turn(const Model& model, const TurnTrace& trace, std::ostream& out) {
  const Ontology& o = model.ontology();
  out << "  tokens: ";
  for (const auto& t : trace.tokens) out << t << ' ';
  if (trace.truncated) out << "(truncated)";
  out << "\n  act: " << o.act_types[trace.act.type];
  for (std::size_t i = 0; i < o.slot_count(); ++i) {
    if (trace.act.mask[i] && trace.act.values[i]) {
      out << " " << o.slots[i].name << "=" << o.slots[i].values[*trace.act.values[i]];
    }
  }
  out << "\n  system: " << verbalize_act(o, trace.act) << "\n";
  std::size_t name_width = 0;
  for (const auto& s : o.slots) name_width = std::max(name_width, s.name.size());
  for (std::size_t i = 0; i < o.slot_count(); ++i) {
    out << "  " << std::left << std::setw(static_cast<int>(name_width)) << o.slots[i].name
        << std::right;
    if (!trace.gates.empty()) {
      out << " beta " << bar(trace.gates[i]) << " " << fixed3(trace.gates[i]);
    }
    out << " mask " << fixed3(trace.heads.mask[i]);
    if (!trace.attention.empty()) {
      // Top three tokens by attention weight, ties to the earlier token.
      const std::size_t n = trace.attention.cols();
      std::vector<std::size_t> idx(n);
      for (std::size_t j = 0; j < n; ++j) idx[j] = j;
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return trace.attention.at(i, a) > trace.attention.at(i, b);
      });
      out << " attn";
      for (std::size_t k = 0; k < std::min<std::size_t>(3, n); ++k) {
        const std::string tok =
            idx[k] < trace.tokens.size() ? trace.tokens[idx[k]] : std::string("?");
        out << " " << tok << ":" << fixed3(trace.attention.at(i, idx[k]));
      }
    }
    out << "\n";
  }
}

int cmd_interact(const EvalOptions& o) {
  print_resolved("interact", "model=" + o.model + "\ndata=" + o.data + "\nseed=none\n");
  const Ontology ontology = read_ontology(std::filesystem::path(o.data) / "ontology.json");
  const Model model = load_model(o.model, ontology);
  std::cout << "type an utterance; ':reset' starts a new session, ':quit' exits\n";
  DialogueMemoryState state = model.initial_state();
  std::string prev;
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    if (line == ":quit") break;
    if (line == ":reset") {
      state = model.initial_state();
      prev.clear();
      std::cout << "(new session)\n";
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TurnTrace trace;
    state = model.step(state, line, prev, &trace);
    std::cout << "turn " << state.turn << "\n";
    render_turn(model, trace, std::cout);
    prev = verbalize_act(ontology, trace.act);
  }
  return 0;
}

int cmd_serve(const ServeOptions& o) {
  print_resolved("serve", "model=" + o.model + "\ndata=" + o.data + "\nhost=" + o.host +
                              "\nport=" + std::to_string(o.port) + "\nttl_minutes=" +
                              std::to_string(o.ttl_minutes) + "\nstatic=" + o.static_dir +
                              "\nseed=none\n");
  const Ontology ontology = read_ontology(std::filesystem::path(o.data) / "ontology.json");
  auto model = std::make_shared<const Model>(load_model(o.model, ontology));
  ServiceOptions options;
  options.ttl = std::chrono::minutes(o.ttl_minutes);
  options.static_dir = o.static_dir;
  SessionManager sessions(model, options);
  std::cerr << "listening on http://" << o.host << ":" << o.port << "\n";
  serve(sessions, o.host, o.port);
  return 0;
}

int cmd_sweep(const SweepOptions& o, const CLI::App& app) {
  if (o.format != "jsonl" && o.format != "csv") {
    throw ConfigError("--format must be jsonl or csv");
  }
  const TrainConfig base =
      resolve_train_config(o.config, app.get_option("--seed"), o.seed, o.ablations, o.sets);
  std::string values;
  for (const auto& v : o.values) values += (values.empty() ? "" : ",") + v;
  print_resolved("sweep", config_to_text(base) + "sweep_key=" + o.key + "\nsweep_values=" +
                              values + "\nformat=" + o.format + "\n");
  const Dataset data = read_dataset(o.data);
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out, std::ios::binary);
    if (!file) throw Error("cannot open " + o.out + " for writing");
  }
  std::ostream& out = o.out.empty() ? std::cout : file;
  if (o.format == "csv") out << sweep_csv_header(data.ontology);
  run_sweep(data, base, o.key, o.values, [&](const SweepRow& row) {
    out << (o.format == "csv" ? sweep_csv_row(row) : sweep_jsonl_row(row)) << std::flush;
  });
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const HashMismatchError*>(&e)) return "hash_mismatch";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  return "runtime";
}

// Collapses a message to a single line.
std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-augmented dialogue manager"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic corpus and its ontology");
  g->add_option("--domain", gen.domain, "restaurant or flight")
      ->check(CLI::IsMember({"restaurant", "flight"}))
      ->capture_default_str();
  g->add_option("--task", gen.task, "Restaurant task mode: 1, 2 or full")
      ->check(CLI::IsMember({"1", "2", "full"}))
      ->capture_default_str();
  g->add_option("--train", gen.train, "Training sessions")->capture_default_str();
  g->add_option("--dev", gen.dev, "Development sessions")->capture_default_str();
  g->add_option("--test", gen.test, "Test sessions")->capture_default_str();
  g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  g->add_option("--cities", gen.cities, "Flight city count")->capture_default_str();
  g->add_option("--dates", gen.dates, "Flight date count")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->capture_default_str();
  g->add_option("--config", gen.config, "key=value file (flags win)");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a model on a generated corpus");
  t->add_option("--data", tr.data, "Corpus directory")->capture_default_str();
  t->add_option("--out,--model", tr.out, "Model output path")->capture_default_str();
  t->add_option("--config", tr.config, "key=value training config (flags win)");
  t->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  t->add_option("--ablation", tr.ablations, "sm, attn, em or rnn (repeatable)")
      ->check(CLI::IsMember({"sm", "attn", "em", "rnn"}));
  t->add_option("--set", tr.sets, "Override one config key, key=value (repeatable)");
  t->add_flag("--json", tr.json, "Epoch log as JSON lines");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score a model on a corpus split");
  e->add_option("--model", ev.model, "Model file")->capture_default_str();
  e->add_option("--data", ev.data, "Corpus directory")->capture_default_str();
  e->add_option("--split", ev.split, "train, dev or test")
      ->check(CLI::IsMember({"train", "dev", "test"}))
      ->capture_default_str();
  e->add_flag("--json", ev.json, "Report as JSON");

  EvalOptions in;
  auto* i = app.add_subcommand("interact", "Terminal REPL with per-turn memory read-outs");
  i->add_option("--model", in.model, "Model file")->capture_default_str();
  i->add_option("--data", in.data, "Corpus directory holding ontology.json")
      ->capture_default_str();

  ServeOptions sv;
  auto* s = app.add_subcommand("serve", "HTTP inference service");
  s->add_option("--model", sv.model, "Model file")->capture_default_str();
  s->add_option("--data", sv.data, "Corpus directory holding ontology.json")
      ->capture_default_str();
  s->add_option("--host", sv.host, "Bind address")->capture_default_str();
  s->add_option("--port", sv.port, "TCP port")->check(CLI::Range(1, 65535))->capture_default_str();
  s->add_option("--static", sv.static_dir, "UI bundle directory served under /");
  s->add_option("--ttl", sv.ttl_minutes, "Idle session lifetime in minutes")
      ->capture_default_str();

  SweepOptions sw;
  auto* w = app.add_subcommand("sweep", "Train one model per value of a config key");
  w->add_option("--data", sw.data, "Corpus directory")->capture_default_str();
  w->add_option("--config", sw.config, "Base training config (flags win)");
  w->add_option("--key", sw.key, "Config key to vary")->capture_default_str();
  w->add_option("--values", sw.values, "Values to try")
      ->delimiter(',')
      ->capture_default_str();
  w->add_option("--format", sw.format, "jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "csv"}))
      ->capture_default_str();
  w->add_option("--out", sw.out, "Table output path (default stdout)");
  w->add_option("--seed", sw.seed, "Training seed")->capture_default_str();
  w->add_option("--ablation", sw.ablations, "sm, attn, em or rnn (repeatable)")
      ->check(CLI::IsMember({"sm", "attn", "em", "rnn"}));
  w->add_option("--set", sw.sets, "Override one config key, key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: usage: " << one_line(err.what()) << "\n";
    return 2;
  }

  try {
    if (*g) return cmd_gen(gen, *g);
    if (*t) return cmd_train(tr, *t);
    if (*e) return cmd_eval(ev);
    if (*i) return cmd_interact(in);
    if (*s) return cmd_serve(sv);
    if (*w) return cmd_sweep(sw, *w);
  } catch (const std::exception& err) {
    std::cerr << "error: " << error_kind(err) << ": " << one_line(err.what()) << "\n";
    return 1;
  }
  return 1;
}
