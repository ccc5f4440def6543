#pragma once

// Subcommands of the causalac tool. `run` takes the arguments after the
// program name and reports through the given streams, so tests can drive it
// in-process.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "causalac/causalac.hpp"

namespace causalac::cli {

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kCheckFailed = 3 };

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw Error("cannot write '" + path + "'");
}

// Path or "-" for the input stream, read at most once.
struct Input {
  std::istream& in;
  bool used = false;
  std::string read(const std::string& path) {
    if (path != "-") return read_file(path);
    if (used) throw Error("standard input requested twice");
    used = true;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

inline std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline std::string general17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string assignment_text(const CausalGraph& g, const std::vector<std::size_t>& vars,
                                   const std::vector<int>& state) {
  std::string s;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    if (k) s += ',';
    s += g.name(vars[k]) + "=" + std::to_string(state[vars[k]]);
  }
  return s;
}

// Parts separated by ';'. Each part is `outcome` or `outcome@intervention`.
inline Event parse_event(const CausalGraph& g, const std::string& text) {
  std::vector<std::variant<Observational, Interventional>> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) {
    auto at = part.find('@');
    if (at == std::string::npos) {
      parts.emplace_back(Observational{parse_assignment(g, part)});
    } else {
      parts.emplace_back(Interventional{parse_assignment(g, part.substr(0, at)),
                                        parse_assignment(g, part.substr(at + 1))});
    }
  }
  if (parts.empty()) return Observational{};
  if (parts.size() == 1) {
    return std::visit([](const auto& p) -> Event { return p; }, parts.front());
  }
  return Counterfactual{std::move(parts)};
}

// {"parameters":[{"name":..., "table":[...]}, ...]}; every variable listed.
inline Parameterization parse_parameters(const CausalGraph& g, const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(std::string("parameter document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("parameters") || !doc["parameters"].is_array()) {
    throw ModelError("parameter document must hold a \"parameters\" array");
  }
  std::vector<std::vector<double>> tables(g.size());
  std::vector<char> seen(g.size(), 0);
  for (const auto& entry : doc["parameters"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() ||
        !entry.contains("table") || !entry["table"].is_array()) {
      throw ModelError("each parameter entry needs a name and a table");
    }
    const std::size_t v = g.index_of(entry["name"].get<std::string>());
    if (seen[v]) throw ModelError("parameters of " + g.name(v) + " given twice");
    seen[v] = 1;
    for (const auto& x : entry["table"]) {
      if (!x.is_number()) throw ModelError("non-numeric parameter for " + g.name(v));
      tables[v].push_back(x.get<double>());
    }
  }
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (!seen[v]) throw ModelError("no parameters for " + g.name(v));
  }
  return Parameterization(g, std::move(tables));
}

inline nlohmann::json parameters_json(const Parameterization& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t v = 0; v < p.graph().size(); ++v) {
    arr.push_back({{"name", p.graph().name(v)}, {"table", p.table(v)}});
  }
  return {{"parameters", arr}};
}

inline std::string stats_report(const CircuitStats& s) {
  std::ostringstream os;
  os << "nodes " << s.nodes << '\n'
     << "edges " << s.edges << '\n'
     << "adds " << s.adds << '\n'
     << "muls " << s.muls << '\n'
     << "thetas " << s.thetas << '\n'
     << "lambdas " << s.lambdas << '\n'
     << "constants " << s.constants << '\n'
     << "depth " << s.depth << '\n'
     << "width " << s.width << '\n'
     << "thinned ";
  if (s.thinned.empty()) os << '-';
  for (std::size_t k = 0; k < s.thinned.size(); ++k) os << (k ? "," : "") << s.thinned[k];
  os << '\n';
  return os.str();
}

inline OrderHeuristic parse_heuristic(const std::string& h) {
  if (h == "min-fill") return OrderHeuristic::kMinFill;
  if (h == "min-degree") return OrderHeuristic::kMinDegree;
  if (h == "given") return OrderHeuristic::kGiven;
  throw Error("unknown heuristic '" + h + "'");
}

struct CheckOutcome {
  std::size_t events = 0;
  double max_deviation = 0.0;
};

// Circuit against world enumeration on every full observational event and
// on every full outcome under each single-variable intervention.
inline CheckOutcome check_scm(const Scm& scm, const CompileOptions& opts) {
  const CausalGraph& g = scm.graph();
  Circuit c = compile_graph(g, opts).circuit;
  Parameterization p = Parameterization::from_scm(scm);
  const std::vector<std::size_t> endo = g.endogenous_variables();
  std::vector<int> cards;
  for (std::size_t v : endo) cards.push_back(g.card(v));
  CheckOutcome out;
  auto each_full = [&](auto&& fn) {
    std::vector<int> digits(endo.size(), 0);
    do {
      Assignment a;
      for (std::size_t k = 0; k < endo.size(); ++k) a[endo[k]] = digits[k];
      fn(a);
    } while (causalac::detail::advance(digits, cards));
  };
  auto note = [&](double circuit, double oracle) {
    ++out.events;
    out.max_deviation = std::max(out.max_deviation, std::abs(circuit - oracle));
  };
  Factor<double> joint = joint_distribution(scm, endo);
  std::size_t k = 0;
  each_full([&](const Assignment& e) { note(evaluate(c, p, e), joint[k++]); });
  for (std::size_t v : endo) {
    for (int x = 0; x < g.card(v); ++x) {
      Assignment z{{v, x}};
      Factor<double> sub = joint_distribution(mutilate(scm, z), endo);
      std::size_t j = 0;
      each_full([&](const Assignment& y) { note(causal_effect(c, p, z, y), sub[j++]); });
    }
  }
  return out;
}

inline Scm require_scm(const ModelDocument& doc) {
  if (!doc.complete()) throw ModelError("model lacks priors or mechanisms");
  return doc.to_scm();
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Compile causal graphs into arithmetic circuits and query them."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  detail::Input input{in};

  // gen
  auto* gen = app.add_subcommand("gen", "Write a model document");
  std::string family = "hypertension", fill = "none";
  GenSpec spec;
  gen->add_option("--family", family,
                  "hypertension | chain | collider | semi-markov | grid | grid-plus | random.\n"
                  "grid(n): U_X->X_i, U_Y->Y_j, X_i->Z_i_j<-Y_j.\n"
                  "grid-plus(n): grid(n) plus Z_i_j->Z_i_(j+1) and Z_i_n->Z_(i+1)_1.")
      ->check(CLI::IsMember({"hypertension", "chain", "collider", "semi-markov", "grid", "grid-plus", "random"}));
  gen->add_option("--n", spec.n, "Grid size")->check(CLI::Range(1, 64));
  gen->add_option("--vars", spec.vars, "Endogenous variables (random family)")->check(CLI::Range(1, 64));
  gen->add_option("--max-parents", spec.max_parents, "Parent limit (random family)")->check(CLI::Range(0, 16));
  gen->add_option("--exo-card", spec.exo_card, "Cardinality of U_X and U_Y (grid families)")
      ->check(CLI::Range(2, 1 << 16));
  gen->add_option("--fill", fill, "none | random | paper (hypertension only)")
      ->check(CLI::IsMember({"none", "random", "paper"}));
  gen->add_option("--seed", spec.seed, "Random seed");

  // compile
  auto* comp = app.add_subcommand("compile", "Compile a model into a circuit document");
  std::string model_path = "-", heuristic = "min-fill", order_text, out_path;
  CompileOptions copts;
  bool no_thin = false, want_stats = false, want_tree = false;
  comp->add_option("--model", model_path, "Model document (default: stdin)");
  comp->add_option("--heuristic", heuristic, "min-fill | min-degree | given")
      ->check(CLI::IsMember({"min-fill", "min-degree", "given"}));
  comp->add_option("--order", order_text, "Comma-separated elimination order (implies --heuristic given)");
  comp->add_option("--replica-cap", copts.replica_cap, "Maximum copies per mechanism")->check(CLI::Range(1, 64));
  comp->add_flag("--no-thin", no_thin, "Compile the plain jointree");
  comp->add_flag("--stats", want_stats, "Print the stats report (the circuit goes to --out if given)");
  comp->add_flag("--jointree", want_tree, "Print the jointree dump instead of the circuit");
  comp->add_option("--out", out_path, "Write the circuit document to this file");

  // query
  auto* query = app.add_subcommand("query", "Evaluate a probability");
  std::string circuit_path, params_path, given, intervention, cond;
  query->add_option("--model", model_path, "Model document (default: stdin)");
  query->add_option("--circuit", circuit_path, "Circuit document (default: compile the model)");
  query->add_option("--params", params_path, "Parameter document (default: the model's tables)");
  query->add_option("--given", given, "Outcome, e.g. X=0,Y=0");
  query->add_option("--do", intervention, "Intervention, e.g. X=1");
  query->add_option("--cond", cond, "Observational condition");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit parameters by EM");
  std::string data_path;
  EmOptions eopts;
  int restarts = 1;
  bool project = false, want_trace = false;
  fit->add_option("--model", model_path, "Model document (default: stdin)");
  fit->add_option("--data", data_path, "CSV dataset")->required();
  fit->add_option("--restarts", restarts, "Random starting points")->check(CLI::Range(1, 100000));
  fit->add_option("--max-iters", eopts.max_iters, "Iteration limit")->check(CLI::Range(0, 10000000));
  fit->add_option("--tol", eopts.tol, "Log-likelihood improvement threshold");
  fit->add_option("--seed", eopts.seed, "Random seed");
  fit->add_flag("--project", project, "Round endogenous tables to 0/1 after each step (experimental)");
  fit->add_flag("--no-thin", no_thin, "Use the plain circuit even with --project");
  fit->add_flag("--trace", want_trace, "Include the log-likelihood trace");

  // worlds
  auto* worlds = app.add_subcommand("worlds", "Print the world table");
  std::string event_text, given_text;
  bool want_prob = false;
  worlds->add_option("--model", model_path, "Model document (default: stdin)");
  worlds->add_option("--event", event_text, "Event: parts joined by ';', each OUTCOME or OUTCOME@INTERVENTION");
  worlds->add_flag("--probability", want_prob, "Print the event probability only");
  worlds->add_option("--given", given_text, "Print Pr(event | given) with 4 decimals");

  // check
  auto* check = app.add_subcommand("check", "Compare the circuit with world enumeration");
  int random_models = 0;
  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  check->add_option("--model", model_path, "Model document (default: stdin)");
  check->add_option("--random", random_models, "Check this many random models instead")->check(CLI::Range(0, 1000000));
  check->add_option("--seed", seed, "Seed of the random models");
  check->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 256u));
  check->add_flag("--no-thin", no_thin, "Compile the plain jointree");

  // stats
  auto* stats = app.add_subcommand("stats", "Print widths and circuit sizes");
  stats->add_option("--model", model_path, "Model document (default: stdin)");
  stats->add_option("--replica-cap", copts.replica_cap, "Maximum copies per mechanism")->check(CLI::Range(1, 64));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      static const std::map<std::string, Family> fam{
          {"hypertension", Family::kHypertension}, {"chain", Family::kChain},
          {"collider", Family::kCollider},         {"semi-markov", Family::kSemiMarkov},
          {"grid", Family::kGrid},                 {"grid-plus", Family::kGridPlus},
          {"random", Family::kRandom}};
      spec.family = fam.at(family);
      spec.fill = fill == "none" ? Fill::kNone : fill == "random" ? Fill::kRandom : Fill::kPaper;
      out << to_json(generate(spec)) << '\n';
      return kOk;
    }

    if (check->parsed() && random_models > 0) {
      model_path.clear();
    }
    ModelDocument doc = model_path.empty() ? ModelDocument{} : parse_model(input.read(model_path));
    const CausalGraph& g = doc.graph;

    if (comp->parsed()) {
      copts.thin = !no_thin;
      copts.heuristic = detail::parse_heuristic(heuristic);
      if (!order_text.empty()) {
        copts.heuristic = OrderHeuristic::kGiven;
        copts.order = parse_order(g, order_text);
      } else if (copts.heuristic == OrderHeuristic::kGiven) {
        throw Error("--heuristic given needs --order");
      }
      CompilationResult r = compile_graph(g, copts);
      const std::string text = serialize(r.circuit);
      if (!out_path.empty()) detail::write_file(out_path, text);
      if (want_tree) out << r.jointree.dump();
      if (want_stats) out << detail::stats_report(r.stats);
      if (!want_tree && !want_stats && out_path.empty()) out << text;
      return kOk;
    }

    if (query->parsed()) {
      if (given.empty() && !cond.empty()) throw Error("--cond needs --given");
      if (!intervention.empty() && !cond.empty()) {
        throw Error("--cond with --do is a counterfactual query; use the worlds subcommand");
      }
      Parameterization p = params_path.empty() ? Parameterization::from_scm(detail::require_scm(doc))
                                               : detail::parse_parameters(g, input.read(params_path));
      Circuit c = circuit_path.empty() ? compile_graph(g).circuit : deserialize(input.read(circuit_path));
      const Assignment y = parse_assignment(g, given);
      double value;
      if (!intervention.empty()) {
        value = causal_effect(c, p, parse_assignment(g, intervention), y);
      } else if (!cond.empty()) {
        const Assignment e = parse_assignment(g, cond);
        const double denom = evaluate(c, p, e);
        if (denom == 0.0) throw UndefinedEstimand("conditioning event has probability 0");
        Assignment joint = e;
        for (const auto& [v, x] : y) {
          auto it = joint.find(v);
          if (it != joint.end() && it->second != x) {
            out << detail::fixed(0.0, 12) << '\n';
            return kOk;
          }
          joint[v] = x;
        }
        value = evaluate(c, p, joint) / denom;
      } else {
        value = evaluate(c, p, y);
      }
      out << detail::fixed(value, 12) << '\n';
      return kOk;
    }

    if (fit->parsed()) {
      Dataset data = parse_csv(g, detail::read_file(data_path));
      CompileOptions o;
      o.thin = project && !no_thin;
      Circuit c = compile_graph(g, o).circuit;
      eopts.deterministic_projection = project;
      EmResult r = em_fit_restarts(c, g, data, eopts, restarts);
      nlohmann::json j = detail::parameters_json(r.params);
      j["log_likelihood"] = r.trace.back();
      j["converged"] = r.converged;
      j["iterations"] = r.trace.size() - 1;
      if (!r.flags.empty()) j["unchanged_rows"] = r.flags;
      if (want_trace) j["trace"] = r.trace;
      out << j.dump(2) << '\n';
      return kOk;
    }

    if (worlds->parsed()) {
      Scm scm = detail::require_scm(doc);
      if (!given_text.empty()) {
        if (event_text.empty()) throw Error("--given needs --event");
        Event ev = detail::parse_event(g, event_text);
        Event cond_ev = detail::parse_event(g, given_text);
        std::vector<std::variant<Observational, Interventional>> parts;
        for (const Event* e : {&ev, &cond_ev}) {
          if (const auto* cf = std::get_if<Counterfactual>(e)) {
            parts.insert(parts.end(), cf->parts.begin(), cf->parts.end());
          } else if (const auto* ob = std::get_if<Observational>(e)) {
            parts.emplace_back(*ob);
          } else {
            parts.emplace_back(std::get<Interventional>(*e));
          }
        }
        const double denom = event_probability(scm, cond_ev);
        if (denom == 0.0) throw UndefinedEstimand("conditioning event has probability 0");
        out << detail::fixed(event_probability(scm, Counterfactual{parts}) / denom, 4) << '\n';
        return kOk;
      }
      if (want_prob) {
        out << detail::fixed(event_probability(scm, detail::parse_event(g, event_text)), 12) << '\n';
        return kOk;
      }
      std::vector<World> all = enumerate_worlds(scm);
      std::vector<char> keep(all.size(), 1);
      if (!event_text.empty()) {
        keep.assign(all.size(), 0);
        for (std::size_t w : worlds_of_event(scm, detail::parse_event(g, event_text))) keep[w] = 1;
      }
      const auto exo = g.exogenous_variables();
      const auto endo = g.endogenous_variables();
      out << "exogenous\tprobability\tendogenous\n";
      for (const World& w : all) {
        if (!keep[w.index]) continue;
        out << detail::assignment_text(g, exo, w.state) << '\t' << detail::general17(w.probability) << '\t'
            << detail::assignment_text(g, endo, w.state) << '\n';
      }
      return kOk;
    }

    if (check->parsed()) {
      CompileOptions o;
      o.thin = !no_thin;
      std::vector<Scm> models;
      if (random_models > 0) {
        for (int k = 0; k < random_models; ++k) {
          std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(k)};
          std::mt19937_64 rng(ss);
          models.push_back(random_scm(rng));
        }
      } else {
        models.push_back(detail::require_scm(doc));
      }
      std::vector<detail::CheckOutcome> results(models.size());
      std::vector<std::string> errors(models.size());
      std::vector<std::thread> pool;
      const unsigned n_threads = std::min<unsigned>(threads, static_cast<unsigned>(models.size()));
      for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t k = t; k < models.size(); k += n_threads) {
            try {
              results[k] = detail::check_scm(models[k], o);
            } catch (const std::exception& e) {
              errors[k] = e.what();
            }
          }
        });
      }
      for (auto& th : pool) th.join();
      for (std::size_t k = 0; k < models.size(); ++k) {
        if (!errors[k].empty()) throw Error("model " + std::to_string(k) + ": " + errors[k]);
      }
      std::size_t events = 0;
      double worst = 0.0;
      for (const auto& r : results) {
        events += r.events;
        worst = std::max(worst, r.max_deviation);
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3e", worst);
      out << "models " << models.size() << '\n' << "events " << events << '\n' << "max_deviation " << buf << '\n';
      const bool ok = worst < 1e-9;
      out << (ok ? "ok" : "FAILED") << '\n';
      return ok ? kOk : kCheckFailed;
    }

    if (stats->parsed()) {
      CompileOptions plain;
      plain.thin = false;
      CompileOptions thinned;
      thinned.replica_cap = copts.replica_cap;
      CompilationResult a = compile_graph(g, plain);
      CompilationResult b = compile_graph(g, thinned);
      out << "variables " << g.size() << '\n'
          << "edges " << g.edge_count() << '\n'
          << "order_width " << elimination_order(g, OrderHeuristic::kMinFill).width << '\n'
          << "unthinned_width " << a.stats.width << '\n'
          << "thinned_width " << b.stats.width << '\n'
          << "unthinned_nodes " << a.stats.nodes << '\n'
          << "thinned_nodes " << b.stats.nodes << '\n';
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  }
  return kUsage;
}

}  // namespace causalac::cli
