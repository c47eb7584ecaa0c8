#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "evagraph/gnn.hpp"
#include "evagraph/grph_io.hpp"
#include "evagraph/results.hpp"

namespace evagraph::cli {

namespace {

using nlohmann::json;

// Flags recorded so that only explicitly given ones override the config.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& desc) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(flag, *value, desc);
    items_.emplace_back(opt, [value, pointer](json& j) { j[json::json_pointer(pointer)] = *value; });
    return opt;
  }

  void apply(json& j) const {
    for (const auto& [opt, fn] : items_) {
      if (opt->count() > 0) fn(j);
    }
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> items_;
};


std::string format_eps(double eps) {
  std::ostringstream s;
  s << eps;
  return s.str();
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unlabeled") return Split::unlabeled;
  throw ConfigError("unknown node set '" + s + "'");
}

std::vector<NodeId> target_nodes(const Graph& g, const std::string& which) {
  if (which == "all") {
    std::vector<NodeId> all(g.num_nodes());
    for (NodeId v = 0; v < all.size(); ++v) all[v] = v;
    return all;
  }
  return g.nodes_in(parse_split(which));
}

json train_defaults() {
  const TrainConfig t;
  return {{"graph", ""},
          {"model", to_string(t.kind)},
          {"seed", t.seed},
          {"lr", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"epochs", t.max_epochs},
          {"patience", t.patience},
          {"dropout", t.dropout},
          {"hidden", t.hidden},
          {"out", ""},
          {"report", ""}};
}

json sbm_defaults() {
  const SbmParams p;
  return {{"blocks", p.blocks},
          {"block_size", p.block_size},
          {"p_in", p.p_in},
          {"p_out", p.p_out},
          {"features", p.feature_dim},
          {"signal", p.signal},
          {"noise", p.noise},
          {"train", p.train_fraction},
          {"val", p.val_fraction},
          {"test", p.test_fraction},
          {"seed", p.seed},
          {"out", ""}};
}

std::string text_of(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("missing " + what + " path");
  if (!std::filesystem::exists(path)) throw IoError(what + " file not found: " + path);
}

int cmd_train(const json& cfg) {
  require_file(cfg.at("graph").get<std::string>(), "graph");
  const auto out = cfg.at("out").get<std::string>();
  if (out.empty()) throw ConfigError("train needs --out");
  const Graph g = grph::load_graph(cfg.at("graph").get<std::string>());
  TrainConfig t;
  t.kind = parse_model_kind(cfg.at("model").get<std::string>());
  t.seed = cfg.at("seed").get<std::uint64_t>();
  t.learning_rate = cfg.at("lr").get<double>();
  t.weight_decay = cfg.at("weight_decay").get<double>();
  t.max_epochs = cfg.at("epochs").get<int>();
  t.patience = cfg.at("patience").get<int>();
  t.dropout = cfg.at("dropout").get<double>();
  t.hidden = cfg.at("hidden").get<int>();
  TrainReport rep;
  const auto w = train(g, t, &rep);
  save_weights(out, w);
  json doc = {{"config", cfg},
              {"epochs_run", rep.epochs_run},
              {"best_epoch", rep.best_epoch},
              {"train_accuracy", rep.train_accuracy},
              {"val_accuracy", rep.val_accuracy},
              {"test_accuracy", rep.test_accuracy}};
  auto report = cfg.at("report").get<std::string>();
  if (report.empty()) report = out + ".report.json";
  write_result(report, doc);
  std::cout << "train " << rep.train_accuracy << " val " << rep.val_accuracy << " test " << rep.test_accuracy
            << " (best epoch " << rep.best_epoch << ")\n";
  return 0;
}

std::filesystem::path result_path(const json& cfg, const json& doc) {
  const auto out = cfg.value("out", std::string{});
  if (!out.empty()) return out;
  std::ostringstream name;
  name << cfg.at("dataset").get<std::string>() << '_' << cfg.at("model").get<std::string>() << '_'
       << doc.at("objective").get<std::string>() << '_' << cfg.at("mode").get<std::string>() << "_eps"
       << format_eps(cfg.at("epsilon").get<double>()) << "_seed" << cfg.at("seed").get<std::uint64_t>();
  if (doc.contains("target")) name << "_node" << doc.at("target").get<NodeId>();
  name << ".json";
  const auto dir = cfg.value("results_dir", std::string{});
  return (dir.empty() ? results_root() : std::filesystem::path(dir)) / name.str();
}

int cmd_attack(json cfg, const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  if (seeds.size() > 1 && cfg.value("out", std::string{}).size() > 0) {
    throw ConfigError("--out names a single file; drop it to sweep several seeds");
  }
  std::vector<json> runs;
  if (seeds.empty()) {
    runs.push_back(cfg);
  } else {
    for (auto s : seeds) {
      json c = cfg;
      c["seed"] = s;
      runs.push_back(std::move(c));
    }
  }
  std::vector<std::string> lines(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        const auto doc = run_attack_config(runs[i]);
        const auto path = result_path(doc.at("config"), doc);
        write_result(path, doc);
        const auto metric = doc.at("primary_metric").get<std::string>();
        std::ostringstream line;
        line << "seed " << doc.at("seed") << ' ' << metric << ' ' << doc.at("clean_metrics").at(metric) << " -> "
             << doc.at("attacked_metrics").at(metric) << " flips " << doc.at("flips").size();
        if (doc.contains("minimal_budget")) line << " minimal_budget " << doc.at("minimal_budget");
        line << " [" << path.string() << "]";
        lines[i] = line.str();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, runs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& l : lines) std::cout << l << '\n';
  return 0;
}

int cmd_report(const std::vector<std::string>& patterns, const std::string& csv_out, const std::string& plot_out) {
  std::vector<std::filesystem::path> files;
  for (const auto& p : patterns) {
    const auto matched = expand_glob(p);
    files.insert(files.end(), matched.begin(), matched.end());
  }
  const auto rows = load_rows(files);
  const auto csv = rows_to_csv(rows);
  if (csv_out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(csv_out);
    if (!out) throw IoError("cannot write " + csv_out);
    out << csv;
  }
  if (!plot_out.empty()) write_result(plot_out, plot_series(rows));
  return 0;
}

int cmd_synth(const json& cfg) {
  const auto out = cfg.at("out").get<std::string>();
  if (out.empty()) throw ConfigError("synth needs --out");
  const Graph g = make_sbm(sbm_from_json(cfg));
  g.validate();
  grph::save_graph(out, g);
  std::cout << "nodes " << g.num_nodes() << " edges " << g.num_edges() << " features " << g.num_features()
            << " classes " << g.num_classes() << '\n';
  return 0;
}

}  // namespace

std::filesystem::path results_root() {
  if (const char* env = std::getenv("EVAGRAPH_RESULTS_DIR"); env && *env) return env;
  return "results";
}

json default_attack_config() {
  const GAConfig ga;
  const FitnessSpec fs;
  const auto& sp = fs.smoothing;
  return {{"graph", ""},
          {"weights", ""},
          {"dataset", ""},
          {"model", ""},
          {"mode", "global"},
          {"objective", to_string(fs.kind)},
          {"epsilon", 0.05},
          {"e_loc", nullptr},
          {"k_dc", 1},
          {"node", nullptr},
          {"max_budget", 10},
          {"targets", "test"},
          {"trials", nullptr},
          {"seed", 0},
          {"out", ""},
          {"results_dir", ""},
          {"ga",
           {{"population", ga.population},
            {"steps", ga.steps},
            {"mutation_rate", ga.mutation_rate},
            {"tournament_size", ga.tournament_size},
            {"crossover_joints", ga.crossover_joints},
            {"mutation", to_string(ga.mutation)},
            {"elites", nullptr},
            {"t_warm", ga.t_warm},
            {"projection_attempts", ga.projection_attempts},
            {"workers", ga.workers}}},
          {"fitness",
           {{"alpha", fs.alpha},
            {"p_plus", sp.p_plus},
            {"p_minus", sp.p_minus},
            {"samples_attack", sp.samples_attack},
            {"samples_final", sp.samples_final},
            {"pbar", sp.pbar},
            {"lambda", sp.lambda}}}};
}

json load_config(const std::filesystem::path& path) {
  const auto text = text_of(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("malformed config " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw FormatError("config " + path.string() + " is not a JSON object");
  if (doc.contains("config") && doc.contains("attacked_metrics")) return doc.at("config");
  return doc;
}

json merge_config(json base, const json& patch) {
  if (!patch.is_object()) return patch;
  if (!base.is_object()) base = json::object();
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    base[it.key()] = merge_config(base.contains(it.key()) ? base[it.key()] : json(), it.value());
  }
  return base;
}

GAConfig ga_from_json(const json& cfg) {
  const auto& g = cfg.at("ga");
  GAConfig ga;
  ga.population = g.at("population").get<std::size_t>();
  ga.steps = g.at("steps").get<std::size_t>();
  ga.mutation_rate = g.at("mutation_rate").get<double>();
  ga.tournament_size = g.at("tournament_size").get<std::size_t>();
  ga.crossover_joints = g.at("crossover_joints").get<std::size_t>();
  ga.mutation = parse_mutation_kind(g.at("mutation").get<std::string>());
  if (!g.at("elites").is_null()) ga.elite_count = g.at("elites").get<std::size_t>();
  ga.t_warm = g.at("t_warm").get<std::size_t>();
  ga.projection_attempts = g.at("projection_attempts").get<std::size_t>();
  ga.workers = g.at("workers").get<std::size_t>();
  ga.seed = cfg.at("seed").get<std::uint64_t>();
  ga.validate();
  return ga;
}

FitnessSpec fitness_from_json(const json& cfg) {
  const auto& f = cfg.at("fitness");
  FitnessSpec fs;
  fs.kind = parse_fitness_kind(cfg.at("objective").get<std::string>());
  fs.alpha = f.at("alpha").get<double>();
  fs.smoothing.p_plus = f.at("p_plus").get<double>();
  fs.smoothing.p_minus = f.at("p_minus").get<double>();
  fs.smoothing.samples_attack = f.at("samples_attack").get<std::size_t>();
  fs.smoothing.samples_final = f.at("samples_final").get<std::size_t>();
  fs.smoothing.pbar = f.at("pbar").get<double>();
  fs.smoothing.lambda = f.at("lambda").get<double>();
  fs.validate();
  return fs;
}

SbmParams sbm_from_json(const json& cfg) {
  SbmParams p;
  p.blocks = cfg.at("blocks").get<std::size_t>();
  p.block_size = cfg.at("block_size").get<std::size_t>();
  p.p_in = cfg.at("p_in").get<double>();
  p.p_out = cfg.at("p_out").get<double>();
  p.feature_dim = cfg.at("features").get<std::size_t>();
  p.signal = cfg.at("signal").get<double>();
  p.noise = cfg.at("noise").get<double>();
  p.train_fraction = cfg.at("train").get<double>();
  p.val_fraction = cfg.at("val").get<double>();
  p.test_fraction = cfg.at("test").get<double>();
  p.seed = cfg.at("seed").get<std::uint64_t>();
  return p;
}

json run_attack_config(const json& given) {
  json cfg = given;
  const auto graph_path = cfg.at("graph").get<std::string>();
  const auto weights_path = cfg.at("weights").get<std::string>();
  const auto mode = cfg.at("mode").get<std::string>();
  const std::optional<double> e_loc =
      cfg.at("e_loc").is_null() ? std::nullopt : std::optional<double>(cfg.at("e_loc").get<double>());
  if (mode == "local" && !e_loc) throw ConfigError("--mode local requires --e-loc");
  if (mode != "local" && e_loc) throw ConfigError("--e-loc only applies to --mode local");
  if (mode == "targeted" && cfg.at("node").is_null()) throw ConfigError("--mode targeted requires --node");
  if (mode != "global" && mode != "local" && mode != "targeted" && mode != "dnc" && mode != "random") {
    throw ConfigError("unknown mode '" + mode + "'");
  }
  require_file(graph_path, "graph");
  require_file(weights_path, "weights");

  const Graph g = grph::load_graph(graph_path);
  const ModelWeights w = load_weights(weights_path);
  if (cfg.at("dataset").get<std::string>().empty()) cfg["dataset"] = std::filesystem::path(graph_path).stem().string();
  if (cfg.at("model").get<std::string>().empty()) cfg["model"] = to_string(w.kind);
  if (parse_model_kind(cfg.at("model").get<std::string>()) != w.kind) {
    throw ConfigError("config model does not match the weights file");
  }
  const auto ga = ga_from_json(cfg);
  const auto spec = fitness_from_json(cfg);
  const double epsilon = cfg.at("epsilon").get<double>();

  AttackResult res;
  if (mode == "targeted") {
    res = attack_targeted(g, w, cfg.at("node").get<NodeId>(), cfg.at("max_budget").get<std::uint64_t>(), ga);
  } else {
    const auto scope = AttackScope::make(g, target_nodes(g, cfg.at("targets").get<std::string>()), epsilon, e_loc);
    if (mode == "dnc") {
      const auto plan = plan_dnc(g, scope, cfg.at("k_dc").get<std::size_t>(), ga.seed);
      res = attack_dnc(g, w, scope, plan, spec, ga);
    } else if (mode == "random") {
      const std::size_t trials = cfg.at("trials").is_null()
                                     ? ga.population + ga.steps * (ga.population - ga.elites())
                                     : cfg.at("trials").get<std::size_t>();
      res = attack_random_baseline(g, w, scope, spec, trials, ga.seed);
    } else if (spec.kind == FitnessKind::certified_ratio) {
      res = attack_certificate(g, w, scope, spec.smoothing, ga);
    } else if (spec.kind == FitnessKind::conformal_coverage || spec.kind == FitnessKind::conformal_set_size) {
      res = attack_conformal(g, w, scope, spec.alpha, spec.kind, ga);
    } else if (mode == "local") {
      res = attack_local(g, w, scope, spec, ga);
    } else {
      res = attack_global(g, w, scope, spec, ga);
    }
  }
  return result_to_json(res, cfg);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Evolutionary adversarial attacks on graph structure"};
  app.require_subcommand(1);

  Overrides train_ov;
  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "Train a GCN or MLP and write its weights");
  train_cmd->add_option("--config", train_config, "JSON config file");
  train_ov.add<std::string>(train_cmd, "--graph", "/graph", "Graph container");
  train_ov.add<std::string>(train_cmd, "--model", "/model", "gcn or mlp");
  train_ov.add<std::uint64_t>(train_cmd, "--seed", "/seed", "Random seed");
  train_ov.add<double>(train_cmd, "--lr", "/lr", "Learning rate");
  train_ov.add<double>(train_cmd, "--weight-decay", "/weight_decay", "L2 penalty on weight matrices");
  train_ov.add<int>(train_cmd, "--epochs", "/epochs", "Maximum epochs");
  train_ov.add<int>(train_cmd, "--patience", "/patience", "Early-stopping patience");
  train_ov.add<double>(train_cmd, "--dropout", "/dropout", "Dropout rate");
  train_ov.add<int>(train_cmd, "--hidden", "/hidden", "Hidden units");
  train_ov.add<std::string>(train_cmd, "--out", "/out", "Weights output path");
  train_ov.add<std::string>(train_cmd, "--report", "/report", "Training report path");

  Overrides attack_ov;
  std::string attack_config;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  auto* attack_cmd = app.add_subcommand("attack", "Run an attack and write a result JSON per seed");
  attack_cmd->add_option("--config", attack_config, "JSON config file or an earlier result file");
  attack_cmd->add_option("--seed", seeds, "Seed; several values run a sweep");
  attack_cmd->add_option("--jobs", jobs, "Concurrent runs in a seed sweep")->check(CLI::PositiveNumber);
  attack_ov.add<std::string>(attack_cmd, "--graph", "/graph", "Graph container");
  attack_ov.add<std::string>(attack_cmd, "--weights", "/weights", "Weights container");
  attack_ov.add<std::string>(attack_cmd, "--dataset", "/dataset", "Dataset name for reports");
  attack_ov.add<std::string>(attack_cmd, "--mode", "/mode", "global, local, targeted, dnc or random");
  attack_ov.add<std::string>(attack_cmd, "--objective", "/objective",
                             "accuracy, ce, tanh-margin, conformal-coverage, conformal-size or certified-ratio");
  attack_ov.add<double>(attack_cmd, "--epsilon", "/epsilon", "Budget fraction of incident edges");
  attack_ov.add<double>(attack_cmd, "--e-loc", "/e_loc", "Local budget fraction");
  attack_ov.add<std::size_t>(attack_cmd, "--k-dc", "/k_dc", "Divide-and-conquer chunks");
  attack_ov.add<NodeId>(attack_cmd, "--node", "/node", "Target node");
  attack_ov.add<std::uint64_t>(attack_cmd, "--max-budget", "/max_budget", "Largest targeted budget");
  attack_ov.add<std::string>(attack_cmd, "--targets", "/targets", "Attacked node set: test, val, train, unlabeled, all");
  attack_ov.add<std::size_t>(attack_cmd, "--trials", "/trials", "Random-baseline trials");
  attack_ov.add<std::string>(attack_cmd, "--out", "/out", "Result path for a single run");
  attack_ov.add<std::string>(attack_cmd, "--results-dir", "/results_dir", "Directory for result files");
  attack_ov.add<std::size_t>(attack_cmd, "--population", "/ga/population", "Population size");
  attack_ov.add<std::size_t>(attack_cmd, "--steps", "/ga/steps", "Generations");
  attack_ov.add<double>(attack_cmd, "--mutation-rate", "/ga/mutation_rate", "Per-gene mutation probability");
  attack_ov.add<std::size_t>(attack_cmd, "--tournament", "/ga/tournament_size", "Tournament size");
  attack_ov.add<std::size_t>(attack_cmd, "--joints", "/ga/crossover_joints", "Crossover joints");
  attack_ov.add<std::string>(attack_cmd, "--mutation", "/ga/mutation", "uniform, targeted or adaptive");
  attack_ov.add<std::size_t>(attack_cmd, "--elites", "/ga/elites", "Elite count");
  attack_ov.add<std::size_t>(attack_cmd, "--t-warm", "/ga/t_warm", "Warmup generations with random projection");
  attack_ov.add<std::size_t>(attack_cmd, "--workers", "/ga/workers", "Evaluation threads per run");
  attack_ov.add<double>(attack_cmd, "--alpha", "/fitness/alpha", "Conformal miscoverage level");
  attack_ov.add<double>(attack_cmd, "--p-plus", "/fitness/p_plus", "Smoothing addition probability");
  attack_ov.add<double>(attack_cmd, "--p-minus", "/fitness/p_minus", "Smoothing deletion probability");
  attack_ov.add<std::size_t>(attack_cmd, "--samples-attack", "/fitness/samples_attack", "Smoothing samples during search");
  attack_ov.add<std::size_t>(attack_cmd, "--samples-final", "/fitness/samples_final", "Smoothing samples for the report");
  attack_ov.add<double>(attack_cmd, "--pbar", "/fitness/pbar", "Certification threshold");
  attack_ov.add<double>(attack_cmd, "--lambda", "/fitness/lambda", "Accuracy penalty in the certificate fitness");

  std::vector<std::string> patterns;
  std::string csv_out;
  std::string plot_out;
  auto* report_cmd = app.add_subcommand("report", "Merge result files into a CSV table");
  report_cmd->add_option("results", patterns, "Result files or glob patterns")->required();
  report_cmd->add_option("--csv", csv_out, "CSV output path (default stdout)");
  report_cmd->add_option("--plot", plot_out, "Plot-data JSON output path");

  Overrides synth_ov;
  std::string synth_config;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic stochastic block model graph");
  synth_cmd->add_option("--config", synth_config, "JSON config file");
  synth_ov.add<std::size_t>(synth_cmd, "--blocks", "/blocks", "Blocks (classes)");
  synth_ov.add<std::size_t>(synth_cmd, "--block-size", "/block_size", "Nodes per block");
  synth_ov.add<double>(synth_cmd, "--p-in", "/p_in", "Intra-block edge probability");
  synth_ov.add<double>(synth_cmd, "--p-out", "/p_out", "Inter-block edge probability");
  synth_ov.add<std::size_t>(synth_cmd, "--features", "/features", "Feature dimension");
  synth_ov.add<double>(synth_cmd, "--signal", "/signal", "Scale of class means");
  synth_ov.add<double>(synth_cmd, "--noise", "/noise", "Feature noise standard deviation");
  synth_ov.add<double>(synth_cmd, "--train", "/train", "Train fraction");
  synth_ov.add<double>(synth_cmd, "--val", "/val", "Validation fraction");
  synth_ov.add<double>(synth_cmd, "--test", "/test", "Test fraction");
  synth_ov.add<std::uint64_t>(synth_cmd, "--seed", "/seed", "Random seed");
  synth_ov.add<std::string>(synth_cmd, "--out", "/out", "Output container");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      json cfg = train_defaults();
      if (!train_config.empty()) cfg = merge_config(cfg, load_config(train_config));
      train_ov.apply(cfg);
      return cmd_train(cfg);
    }
    if (*attack_cmd) {
      json cfg = default_attack_config();
      if (!attack_config.empty()) cfg = merge_config(cfg, load_config(attack_config));
      attack_ov.apply(cfg);
      return cmd_attack(cfg, seeds, jobs);
    }
    if (*report_cmd) return cmd_report(patterns, csv_out, plot_out);
    if (*synth_cmd) {
      json cfg = sbm_defaults();
      if (!synth_config.empty()) cfg = merge_config(cfg, load_config(synth_config));
      synth_ov.apply(cfg);
      return cmd_synth(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: bad config value: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace evagraph::cli
