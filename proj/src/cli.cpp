#include "fsnc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsnc/gradcheck.hpp"
#include "fsnc/io.hpp"
#include "fsnc/metrics.hpp"
#include "fsnc/pretrain.hpp"
#include "fsnc/protocol.hpp"
#include "fsnc/rng.hpp"
#include "fsnc/trainers.hpp"
#include "json.hpp"

namespace fsnc {

namespace {

void check(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

std::string dataset_name(const std::string& dir) {
  std::filesystem::path p(dir);
  if (!p.has_filename()) p = p.parent_path();  // tolerate a trailing slash
  const std::string name = p.filename().string();
  return name.empty() ? dir : name;
}

// Shortest round-trip decimal rendering, reused for CSV so numbers match the
// JSON outputs byte for byte.
std::string render(double v) { return nlohmann::json(v).dump(); }

// ---------------------------------------------------------------- options ---

// Everything the model-running commands share.  Command-line flags override
// config-file values; dotted primary names give INI files their sections.
struct RunOptions {
  std::string data_dir;
  std::string out_path;
  std::string checkpoint;
  std::string method = "tlp-infonce";
  std::string ce_supervision = "base";  // base = train+dev classes, or train
  std::uint64_t seed = 0;
  ProtocolConfig protocol;
  PretrainConfig pretrain;
  ProbeConfig probe;
  MamlConfig maml;
};

void add_episode_options(CLI::App* cmd, EpisodeSpec& e) {
  cmd->add_option("--episode.n-way,--n-way", e.n_way, "classes per episode")
      ->capture_default_str()
      ->group("episode layout");
  cmd->add_option("--episode.k-shot,--k-shot", e.k_shot,
                  "labeled support nodes per class")
      ->capture_default_str()
      ->group("episode layout");
  cmd->add_option("--episode.m-query,--m-query", e.m_query,
                  "query nodes per class")
      ->capture_default_str()
      ->group("episode layout");
}

void add_protocol_options(CLI::App* cmd, ProtocolConfig& p) {
  add_episode_options(cmd, p.episode);
  cmd->add_option("--protocol.validate-every,--validate-every",
                  p.validate_every, "epochs between validation passes")
      ->capture_default_str()
      ->group("protocol");
  cmd->add_option("--protocol.num-tasks,--num-tasks", p.num_tasks,
                  "evaluation episodes per dev/test pass")
      ->capture_default_str()
      ->group("protocol");
  cmd->add_option("--protocol.patience,--patience", p.patience,
                  "failed validations before early stop")
      ->capture_default_str()
      ->group("protocol");
  cmd->add_option("--protocol.max-epochs,--max-epochs", p.max_epochs,
                  "training epoch budget")
      ->capture_default_str()
      ->group("protocol");
  cmd->add_option("--protocol.repeats,--repeats", p.num_repeats,
                  "independent repeats to aggregate")
      ->capture_default_str()
      ->group("protocol");
  cmd->add_option("--protocol.threads,--threads", p.num_threads,
                  "workers for episode evaluation")
      ->capture_default_str()
      ->group("protocol");
}

void add_model_options(CLI::App* cmd, PretrainConfig& p) {
  cmd->add_option("--model.hidden,--hidden", p.hidden_dim, "hidden layer width")
      ->capture_default_str()
      ->group("model");
  cmd->add_option("--model.out-dim,--out-dim", p.output_dim,
                  "embedding width")
      ->capture_default_str()
      ->group("model");
  cmd->add_option("--model.dropout,--dropout", p.dropout,
                  "hidden-layer dropout rate")
      ->capture_default_str()
      ->group("model");
  cmd->add_option("--model.lr,--lr", p.adam.lr, "optimizer learning rate")
      ->capture_default_str()
      ->group("model");
  cmd->add_option("--model.weight-decay,--weight-decay", p.adam.weight_decay,
                  "coupled L2 penalty")
      ->capture_default_str()
      ->group("model");
}

void add_pretrain_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--pretrain.temperature,--temperature",
                  o.pretrain.temperature, "contrastive temperature")
      ->capture_default_str()
      ->group("pretraining");
  cmd->add_option("--pretrain.lambda,--lambda", o.pretrain.lambda,
                  "joint mix weight on the self-supervised term")
      ->capture_default_str()
      ->group("pretraining");
  cmd->add_option("--pretrain.ema-decay,--ema-decay", o.pretrain.ema_decay,
                  "bootstrap target decay")
      ->capture_default_str()
      ->group("pretraining");
  cmd->add_option("--pretrain.edge-drop,--edge-drop",
                  o.pretrain.augment.edge_drop, "view-augmentation edge drop rate")
      ->capture_default_str()
      ->group("pretraining");
  cmd->add_option("--pretrain.feature-mask,--feature-mask",
                  o.pretrain.augment.feature_mask,
                  "view-augmentation feature column mask rate")
      ->capture_default_str()
      ->group("pretraining");
  cmd->add_option("--pretrain.ce-supervision,--ce-supervision",
                  o.ce_supervision,
                  "label set for supervised pretraining: base (train+dev) or train")
      ->capture_default_str()
      ->check(CLI::IsMember({"base", "train"}))
      ->group("pretraining");
}

void add_probe_options(CLI::App* cmd, ProbeConfig& p) {
  cmd->add_option("--probe.l2,--probe-l2", p.l2, "probe ridge strength")
      ->capture_default_str()
      ->group("probe");
  cmd->add_option("--probe.lr,--probe-lr", p.lr, "probe learning rate")
      ->capture_default_str()
      ->group("probe");
  cmd->add_option("--probe.max-iters,--probe-iters", p.max_iters,
                  "probe gradient-descent step budget")
      ->capture_default_str()
      ->group("probe");
  cmd->add_option("--probe.tol,--probe-tol", p.tol,
                  "probe gradient-infinity-norm stop")
      ->capture_default_str()
      ->group("probe");
  cmd->add_option("--probe.standardize,--probe-standardize", p.standardize,
                  "standardize probe inputs on the support set")
      ->capture_default_str()
      ->group("probe");
}

void add_maml_options(CLI::App* cmd, MamlConfig& m) {
  cmd->add_option("--maml.inner-steps,--inner-steps", m.inner_steps,
                  "adaptation steps per episode")
      ->capture_default_str()
      ->group("adaptation");
  cmd->add_option("--maml.inner-lr,--inner-lr", m.inner_lr,
                  "adaptation learning rate")
      ->capture_default_str()
      ->group("adaptation");
}

// CLI11 only consults config files on the root command, never on subcommands,
// so each subcommand takes a plain --config option and applies the file by
// hand: `[section]` + `key` (or a flat `section.key`) must name a known
// dotted option, values go through that option's own converter and
// validators, and anything already given on the command line keeps its
// command-line value.
std::shared_ptr<std::string> add_config_file(CLI::App* cmd) {
  auto path = std::make_shared<std::string>();
  cmd->add_option("--config", *path,
                  "INI file of option defaults (command-line flags win)");
  return path;
}

void apply_config_file(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  check(in.good(), "cannot open config file: " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI{}.from_config(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string key = item.fullname();
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    check(opt != nullptr, "unknown config key: " + key);
    if (opt->count() > 0) continue;  // set on the command line; file loses
    check(!item.inputs.empty(), "config key " + key + " has no value");
    try {
      for (const std::string& value : item.inputs) opt->add_result(value);
      opt->run_callback();
    } catch (const std::exception& e) {
      throw std::invalid_argument("config key " + key + ": " + e.what());
    }
  }
}

// Every range rule in one place so config-file values get the same scrutiny
// (and the same key names in error messages) as command-line flags.
void validate_episode(const EpisodeSpec& e) {
  check(e.n_way >= 2, "episode.n-way must be at least 2");
  check(e.k_shot >= 1, "episode.k-shot must be at least 1");
  check(e.m_query >= 1, "episode.m-query must be at least 1");
}

void validate_run_options(const RunOptions& o) {
  validate_episode(o.protocol.episode);
  check(o.protocol.validate_every >= 1, "protocol.validate-every must be at least 1");
  check(o.protocol.num_tasks >= 1, "protocol.num-tasks must be at least 1");
  check(o.protocol.patience >= 1, "protocol.patience must be at least 1");
  check(o.protocol.num_repeats >= 1, "protocol.repeats must be at least 1");
  check(o.protocol.num_threads >= 1, "protocol.threads must be at least 1");
  check(o.pretrain.hidden_dim >= 1, "model.hidden must be at least 1");
  check(o.pretrain.output_dim >= 1, "model.out-dim must be at least 1");
  check(o.pretrain.dropout >= 0.0 && o.pretrain.dropout < 1.0,
        "model.dropout must lie in [0, 1)");
  check(o.pretrain.adam.lr > 0.0, "model.lr must be positive");
  check(o.pretrain.adam.weight_decay >= 0.0,
        "model.weight-decay must be non-negative");
  check(o.pretrain.temperature > 0.0, "pretrain.temperature must be positive");
  check(o.pretrain.lambda >= 0.0 && o.pretrain.lambda <= 1.0,
        "pretrain.lambda must lie in [0, 1]");
  check(o.pretrain.ema_decay >= 0.0 && o.pretrain.ema_decay < 1.0,
        "pretrain.ema-decay must lie in [0, 1)");
  check(o.pretrain.augment.edge_drop >= 0.0 && o.pretrain.augment.edge_drop <= 1.0,
        "pretrain.edge-drop must lie in [0, 1]");
  check(o.pretrain.augment.feature_mask >= 0.0 &&
            o.pretrain.augment.feature_mask <= 1.0,
        "pretrain.feature-mask must lie in [0, 1]");
  check(o.probe.l2 >= 0.0, "probe.l2 must be non-negative");
  check(o.probe.lr > 0.0, "probe.lr must be positive");
  check(o.probe.max_iters >= 1, "probe.max-iters must be at least 1");
  check(o.probe.tol >= 0.0, "probe.tol must be non-negative");
  check(o.maml.inner_steps >= 1, "maml.inner-steps must be at least 1");
  check(o.maml.inner_lr > 0.0, "maml.inner-lr must be positive");
}

void echo_config(const CLI::App* cmd) {
  std::cerr << "# resolved configuration (" << cmd->get_name() << ")\n"
            << cmd->config_to_str(true, false);
}

// ------------------------------------------------------------- data access ---

GraphBundle load_dataset(const std::string& dir, LabelSplit* split) {
  GraphBundle g = load_bundle(dir);
  validate_bundle(g);
  *split = split_label_space(g, load_split_assignment(dir));
  return g;
}

void write_or_print(const std::string& out_path, const std::string& body) {
  if (out_path.empty()) {
    std::cout << body;
  } else {
    atomic_write_file(out_path, body);
    std::cerr << "wrote " << out_path << "\n";
  }
}

// Assembles the per-method configuration out of parsed options.
MethodConfig method_config(const RunOptions& o) {
  MethodConfig cfg;
  cfg.name = o.method;
  cfg.pretrain = o.pretrain;
  cfg.pretrain.ce_uses_dev = o.ce_supervision == "base";
  cfg.probe = o.probe;
  cfg.meta.episode = o.protocol.episode;
  cfg.meta.dropout = o.pretrain.dropout;
  cfg.meta.adam = o.pretrain.adam;
  cfg.meta.maml = o.maml;
  cfg.meta.maml.dropout = o.pretrain.dropout;
  cfg.meta.hidden_dim = o.pretrain.hidden_dim;
  cfg.meta.output_dim = o.pretrain.output_dim;
  return cfg;
}

// Loads an encoder checkpoint and insists it matches the dataset's features.
EncoderParams load_matching_checkpoint(const std::string& path,
                                       const GraphBundle& g) {
  EncoderParams enc = load_checkpoint(path);
  check(enc.w1.rows() == g.features.cols(),
        "checkpoint expects " + std::to_string(enc.w1.rows()) +
            "-dimensional features but the dataset has " +
            std::to_string(g.features.cols()));
  return enc;
}

// ------------------------------------------------------------- subcommands ---

void setup_generate(CLI::App& app, int&) {
  auto cmd = app.add_subcommand(
      "generate", "synthesize a stochastic-block-model dataset bundle");
  struct Options {
    SbmSpec sbm;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t train_count = 2, dev_count = 2;
    bool csv_features = false;
  };
  auto o = std::make_shared<Options>();
  cmd->add_option("--out", o->out, "bundle directory to create")->required();
  cmd->add_option("--classes", o->sbm.num_classes, "number of classes")
      ->capture_default_str();
  cmd->add_option("--nodes-per-class", o->sbm.nodes_per_class, "nodes per class")
      ->capture_default_str();
  cmd->add_option("--p-in", o->sbm.p_in, "within-class edge probability")
      ->capture_default_str();
  cmd->add_option("--p-out", o->sbm.p_out, "between-class edge probability")
      ->capture_default_str();
  cmd->add_option("--feature-dim", o->sbm.feature_dim, "feature width")
      ->capture_default_str();
  cmd->add_option("--separation", o->sbm.class_mean_separation,
                  "pairwise class-mean distance in noise units")
      ->capture_default_str();
  cmd->add_option("--noise-std", o->sbm.noise_std, "feature noise scale")
      ->capture_default_str();
  cmd->add_option("--train-count", o->train_count,
                  "lowest class ids assigned to the train pool")
      ->capture_default_str();
  cmd->add_option("--dev-count", o->dev_count,
                  "next class ids assigned to the dev pool")
      ->capture_default_str();
  cmd->add_flag("--csv-features", o->csv_features,
                "write features.csv instead of features.bin");
  cmd->add_option("--seed", o->seed, "generator seed")->capture_default_str();
  auto config = add_config_file(cmd);

  cmd->callback([cmd, o, config] {
    apply_config_file(cmd, *config);
    echo_config(cmd);
    check(o->sbm.num_classes >= 1, "classes must be at least 1");
    check(o->sbm.nodes_per_class >= 1, "nodes-per-class must be at least 1");
    check(o->sbm.p_in >= 0.0 && o->sbm.p_in <= 1.0, "p-in must lie in [0, 1]");
    check(o->sbm.p_out >= 0.0 && o->sbm.p_out <= 1.0, "p-out must lie in [0, 1]");
    check(o->sbm.noise_std > 0.0, "noise-std must be positive");
    check(o->sbm.class_mean_separation >= 0.0, "separation must be non-negative");
    check(o->train_count >= 1, "train-count must be at least 1");
    check(o->dev_count >= 1, "dev-count must be at least 1");
    check(o->train_count + o->dev_count < o->sbm.num_classes,
          "train-count + dev-count must leave at least one test class");

    const GraphBundle g = generate_sbm(o->sbm, o->seed);
    LabelSplit split;
    for (std::size_t c = 0; c < o->sbm.num_classes; ++c) {
      const int id = static_cast<int>(c);
      if (c < o->train_count)
        split.train_classes.push_back(id);
      else if (c < o->train_count + o->dev_count)
        split.dev_classes.push_back(id);
      else
        split.test_classes.push_back(id);
    }
    save_bundle(o->out, g, split, !o->csv_features);
    std::cerr << "wrote bundle " << o->out << ": " << g.labels.size()
              << " nodes, " << g.edges.size() << " edges, "
              << o->sbm.num_classes << " classes\n";
  });
}

void setup_pretrain(CLI::App& app, int&) {
  auto cmd = app.add_subcommand(
      "pretrain", "train an encoder on a bundle and save a checkpoint");
  auto o = std::make_shared<RunOptions>();
  auto objective = std::make_shared<std::string>("infonce");
  cmd->add_option("--data", o->data_dir, "dataset bundle directory")->required();
  cmd->add_option("--out", o->out_path, "checkpoint file to write")->required();
  cmd->add_option("--objective", *objective, "pretraining objective")
      ->capture_default_str()
      ->check(CLI::IsMember({"ce", "infonce", "jsd", "supcon", "joint", "bootstrap"}));
  cmd->add_option("--seed", o->seed, "training seed")->capture_default_str();
  cmd->add_option("--pretrain.epochs,--pretrain-epochs", o->pretrain.epochs,
                  "full-graph pretraining steps")
      ->capture_default_str()
      ->group("pretraining");
  add_model_options(cmd, o->pretrain);
  add_pretrain_options(cmd, *o);
  auto config = add_config_file(cmd);

  cmd->callback([cmd, o, objective, config] {
    apply_config_file(cmd, *config);
    echo_config(cmd);
    validate_run_options(*o);
    LabelSplit split;
    const GraphBundle g = load_dataset(o->data_dir, &split);
    PretrainConfig cfg = o->pretrain;
    cfg.objective = parse_objective(*objective);
    cfg.ce_uses_dev = o->ce_supervision == "base";
    const PretrainResult result = pretrain_encoder(g, split, cfg, o->seed);
    save_checkpoint(o->out_path, result.params);

    nlohmann::json meta;
    meta["dataset"] = dataset_name(o->data_dir);
    meta["objective"] = *objective;
    meta["epochs"] = cfg.epochs;
    meta["input_dim"] = g.features.cols();
    meta["hidden_dim"] = cfg.hidden_dim;
    meta["output_dim"] = cfg.output_dim;
    meta["seed"] = o->seed;
    meta["first_loss"] =
        result.epoch_losses.empty() ? 0.0 : result.epoch_losses.front();
    meta["final_loss"] =
        result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back();
    atomic_write_file(o->out_path + ".json", meta.dump(2) + "\n");
    std::cerr << "wrote " << o->out_path << " (and .json sidecar)\n";
  });
}

void setup_evaluate(CLI::App& app, int&) {
  auto cmd = app.add_subcommand(
      "evaluate", "run one method through the full episodic evaluation");
  auto o = std::make_shared<RunOptions>();
  cmd->add_option("--data", o->data_dir, "dataset bundle directory")->required();
  cmd->add_option("--method", o->method, "method to evaluate")
      ->capture_default_str()
      ->check(CLI::IsMember(known_methods()));
  cmd->add_option("--checkpoint", o->checkpoint,
                  "pretrained encoder (probe methods; skips pretraining)");
  cmd->add_option("--out", o->out_path, "results JSON file (default: stdout)");
  cmd->add_option("--seed", o->seed, "base seed")->capture_default_str();
  add_protocol_options(cmd, o->protocol);
  add_model_options(cmd, o->pretrain);
  add_pretrain_options(cmd, *o);
  add_probe_options(cmd, o->probe);
  add_maml_options(cmd, o->maml);
  auto config = add_config_file(cmd);

  cmd->callback([cmd, o, config] {
    apply_config_file(cmd, *config);
    echo_config(cmd);
    validate_run_options(*o);
    LabelSplit split;
    const GraphBundle g = load_dataset(o->data_dir, &split);
    const MethodConfig mcfg = method_config(*o);

    MethodSetup setup;
    if (!o->checkpoint.empty()) {
      check(is_probe_method(o->method),
            "--checkpoint only applies to probe methods, not " + o->method);
      const EncoderParams enc = load_matching_checkpoint(o->checkpoint, g);
      setup = prepare_method(g, split, mcfg, &enc);
    } else {
      setup = prepare_method(g, split, mcfg);
    }

    ProtocolConfig pcfg = o->protocol;
    pcfg.base_seed = o->seed;
    // The joint objective optimizes a blend, so its dev accuracy climbs more
    // slowly; it gets twice the early-stopping budget.
    if (o->method == "tlp-joint") pcfg.patience *= 2;
    const RunResult result = run_protocol(g, split, pcfg, o->method,
                                          dataset_name(o->data_dir), setup.factory);
    write_or_print(o->out_path, run_result_to_json(result));
  });
}

void setup_sweep_lambda(CLI::App& app, int&) {
  auto cmd = app.add_subcommand(
      "sweep-lambda",
      "evaluate the joint objective across a grid of mix weights");
  auto o = std::make_shared<RunOptions>();
  auto grid = std::make_shared<std::vector<double>>(
      std::vector<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  cmd->add_option("--data", o->data_dir, "dataset bundle directory")->required();
  cmd->add_option("--grid", *grid, "mix weights to evaluate")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--out", o->out_path, "results CSV file (default: stdout)");
  cmd->add_option("--seed", o->seed, "base seed")->capture_default_str();
  add_protocol_options(cmd, o->protocol);
  add_model_options(cmd, o->pretrain);
  add_pretrain_options(cmd, *o);
  add_probe_options(cmd, o->probe);
  auto config = add_config_file(cmd);

  cmd->callback([cmd, o, grid, config] {
    apply_config_file(cmd, *config);
    echo_config(cmd);
    o->method = "tlp-joint";
    validate_run_options(*o);
    check(!grid->empty(), "grid must name at least one mix weight");
    for (double l : *grid)
      check(l >= 0.0 && l <= 1.0, "grid values must lie in [0, 1]");

    LabelSplit split;
    const GraphBundle g = load_dataset(o->data_dir, &split);
    std::ostringstream csv;
    csv << "lambda,mean_accuracy,ci95,mean_nmi,mean_ari\n";
    for (double l : *grid) {
      MethodConfig mcfg = method_config(*o);
      mcfg.pretrain.lambda = l;
      const MethodSetup setup = prepare_method(g, split, mcfg);
      ProtocolConfig pcfg = o->protocol;
      pcfg.base_seed = o->seed;
      pcfg.patience *= 2;  // the joint objective's doubled stopping budget
      const RunResult r = run_protocol(g, split, pcfg, o->method,
                                       dataset_name(o->data_dir), setup.factory);
      csv << render(l) << ',' << render(r.mean_accuracy) << ','
          << render(r.ci95) << ',' << render(r.mean_nmi) << ','
          << render(r.mean_ari) << '\n';
      std::cerr << "lambda " << render(l) << ": accuracy "
                << render(r.mean_accuracy) << " +/- " << render(r.ci95) << "\n";
    }
    write_or_print(o->out_path, csv.str());
  });
}

void setup_cluster_eval(CLI::App& app, int&) {
  auto cmd = app.add_subcommand(
      "cluster-eval", "cluster checkpoint embeddings and score against labels");
  struct Options {
    std::string data_dir, checkpoint, out_path;
    std::string scope = "test";
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Options>();
  cmd->add_option("--data", o->data_dir, "dataset bundle directory")->required();
  cmd->add_option("--checkpoint", o->checkpoint, "pretrained encoder")->required();
  cmd->add_option("--scope", o->scope, "node set to cluster")
      ->capture_default_str()
      ->check(CLI::IsMember({"test", "all"}));
  cmd->add_option("--out", o->out_path, "scores JSON file (default: stdout)");
  cmd->add_option("--seed", o->seed, "clustering seed")->capture_default_str();
  auto config = add_config_file(cmd);

  cmd->callback([cmd, o, config] {
    apply_config_file(cmd, *config);
    echo_config(cmd);
    LabelSplit split;
    const GraphBundle g = load_dataset(o->data_dir, &split);
    const EncoderParams enc = load_matching_checkpoint(o->checkpoint, g);
    const Matrix z = embed_all(enc, g);

    std::vector<std::size_t> nodes;
    std::vector<int> labels;
    std::size_t k = 0;
    if (o->scope == "all") {
      for (std::size_t v = 0; v < g.labels.size(); ++v) {
        nodes.push_back(v);
        labels.push_back(g.labels[v]);
      }
      k = static_cast<std::size_t>(g.num_classes());
    } else {
      const std::vector<int>& test = split.test_classes;
      for (std::size_t v = 0; v < g.labels.size(); ++v) {
        if (std::find(test.begin(), test.end(), g.labels[v]) != test.end()) {
          nodes.push_back(v);
          labels.push_back(g.labels[v]);
        }
      }
      k = test.size();
    }
    const ClusteringScores scores = clustering_scores(
        z, nodes, labels, k, derive_seed(o->seed, {seed_ns::kClustering}));

    nlohmann::json j;
    j["dataset"] = dataset_name(o->data_dir);
    j["scope"] = o->scope;
    j["k"] = k;
    j["num_nodes"] = nodes.size();
    j["nmi"] = scores.nmi;
    j["ari"] = scores.ari;
    write_or_print(o->out_path, j.dump(2) + "\n");
  });
}

void setup_export_embeddings(CLI::App& app, int&) {
  auto cmd = app.add_subcommand(
      "export-embeddings", "embed every node with a checkpoint and save them");
  struct Options {
    std::string data_dir, checkpoint, out_path;
    std::string format = "csv";
  };
  auto o = std::make_shared<Options>();
  cmd->add_option("--data", o->data_dir, "dataset bundle directory")->required();
  cmd->add_option("--checkpoint", o->checkpoint, "pretrained encoder")->required();
  cmd->add_option("--out", o->out_path, "output file")->required();
  cmd->add_option("--format", o->format, "csv (node id + values) or fsnb")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "fsnb"}));
  auto config = add_config_file(cmd);

  cmd->callback([cmd, o, config] {
    apply_config_file(cmd, *config);
    echo_config(cmd);
    LabelSplit split;
    const GraphBundle g = load_dataset(o->data_dir, &split);
    const EncoderParams enc = load_matching_checkpoint(o->checkpoint, g);
    const Matrix z = embed_all(enc, g);
    if (o->format == "fsnb") {
      write_fsnb(o->out_path, z);
    } else {
      std::ostringstream csv;
      csv << "node";
      for (std::size_t c = 0; c < z.cols(); ++c) csv << ",e" << c;
      csv << '\n';
      char buf[32];
      for (std::size_t v = 0; v < z.rows(); ++v) {
        csv << v;
        for (std::size_t c = 0; c < z.cols(); ++c) {
          std::snprintf(buf, sizeof buf, "%.9g", z(v, c));
          csv << ',' << buf;
        }
        csv << '\n';
      }
      atomic_write_file(o->out_path, csv.str());
    }
    std::cerr << "wrote " << o->out_path << " (" << z.rows() << " x "
              << z.cols() << ")\n";
  });
}

void setup_gradcheck(CLI::App& app, int& exit_code) {
  auto cmd = app.add_subcommand(
      "gradcheck", "compare every analytic gradient against finite differences");
  struct Options {
    std::size_t draws = 20;
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
  };
  auto o = std::make_shared<Options>();
  cmd->add_option("--draws", o->draws, "random instances per gradient path")
      ->capture_default_str();
  cmd->add_option("--seed", o->seed, "audit seed")->capture_default_str();
  cmd->add_option("--tolerance", o->tolerance, "maximum relative error")
      ->capture_default_str();
  auto config = add_config_file(cmd);

  cmd->callback([cmd, o, config, &exit_code] {
    apply_config_file(cmd, *config);
    check(o->draws >= 1, "draws must be at least 1");
    check(o->tolerance > 0.0, "tolerance must be positive");
    bool ok = true;
    for (const GradientAuditResult& r : gradient_audit(o->draws, o->seed)) {
      const bool pass = r.worst < o->tolerance;
      ok = ok && pass;
      std::printf("%-22s max rel err %.3e  %s\n", r.name.c_str(), r.worst,
                  pass ? "ok" : "FAIL");
    }
    std::printf("gradient audit: %s (%zu draws per path, tolerance %g)\n",
                ok ? "PASS" : "FAIL", o->draws, o->tolerance);
    if (!ok) exit_code = 1;
  });
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"few-shot node classification workbench"};
  app.require_subcommand(1);
  int exit_code = 0;
  setup_generate(app, exit_code);
  setup_pretrain(app, exit_code);
  setup_evaluate(app, exit_code);
  setup_sweep_lambda(app, exit_code);
  setup_cluster_eval(app, exit_code);
  setup_export_embeddings(app, exit_code);
  setup_gradcheck(app, exit_code);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse problem
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}

}  // namespace fsnc
