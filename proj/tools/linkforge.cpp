#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "linkforge.hpp"

using namespace linkforge;

namespace {

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  std::optional<std::string> model;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> top_k;
  std::optional<double> train_fraction;
  std::optional<bool> inject;
  bool no_edges = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "key=value config file");
  cmd->add_option("--dataset", f.dataset, "dataset directory");
  cmd->add_option("--seed", f.seed, "first seed");
  cmd->add_option("--seeds", f.seeds, "number of consecutive seeds");
  cmd->add_option("--out", f.out, "output root");
  cmd->add_option("--model", f.model, "gcn | sage | gnn");
  cmd->add_option("--epochs", f.epochs, "maximum epochs");
  cmd->add_option("--top-k", f.top_k, "injections scored (0: twice the edge count)");
  cmd->add_option("--train-fraction", f.train_fraction, "fraction of edges kept for link training");
  cmd->add_option("--inject", f.inject, "enable link injection")->expected(0, 1)->default_str("true");
  cmd->add_flag("--no-edges", f.no_edges, "zero the training adjacency");
}

RunConfig resolve(const RunFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg.apply_text(read_file(f.config), f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.seeds) cfg.seeds = *f.seeds;
  if (f.out) cfg.out = *f.out;
  if (f.dataset) cfg.dataset = *f.dataset;
  if (f.model) cfg.model = *f.model;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.top_k) cfg.top_k = *f.top_k;
  if (f.train_fraction) cfg.train_fraction = *f.train_fraction;
  if (f.inject) cfg.inject = *f.inject;
  if (f.no_edges) cfg.no_edges = true;
  if (cfg.dataset.empty()) fail(ErrorKind::config, "no dataset given (--dataset or dataset= in the config)");
  return cfg;
}

void print_aggregate(const CommandResult& r) {
  for (const auto& row : r.aggregate.rows) {
    std::cout << row.metric << ": mean " << format_real(row.mean) << " std " << format_real(row.stddev) << " best "
              << format_real(row.best) << "\n";
  }
  std::cout << "runs written to " << r.run_root.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linkforge: graph neural networks with trainable link injection"};
  app.require_subcommand(1);

  RunFlags node_flags, link_flags;
  auto* train_node = app.add_subcommand("train-node", "node classification");
  add_run_flags(train_node, node_flags);
  auto* train_link = app.add_subcommand("train-link", "link prediction");
  add_run_flags(train_link, link_flags);

  std::string ckpt_path, eval_dataset;
  std::optional<std::size_t> eval_k;
  auto* eval = app.add_subcommand("eval-injection", "score a checkpoint's injection matrix");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval->add_option("--top-k", eval_k, "injections scored");

  std::string stats_dataset;
  auto* stats = app.add_subcommand("dataset-stats", "print dataset statistics");
  stats->add_option("dataset", stats_dataset, "dataset directory")->required();

  SbmSpec sbm;
  std::string sbm_out;
  auto* gen = app.add_subcommand("gen-sbm", "write a stochastic block model dataset");
  gen->add_option("--out", sbm_out, "output directory")->required();
  gen->add_option("--blocks", sbm.block_sizes, "block sizes")->delimiter(',');
  gen->add_option("--p-intra", sbm.p_intra);
  gen->add_option("--p-inter", sbm.p_inter);
  gen->add_option("--feature-dim", sbm.feature_dim);
  gen->add_option("--feature-noise", sbm.feature_noise);
  gen->add_option("--seed", sbm.seed);
  gen->add_option("--train-fraction", sbm.train_fraction);
  gen->add_option("--val-fraction", sbm.val_fraction);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_node) {
      const CommandResult r = cmd_train_node(resolve(node_flags), std::cerr);
      print_aggregate(r);
      return r.exit_code;
    }
    if (*train_link) {
      const CommandResult r = cmd_train_link(resolve(link_flags), std::cerr);
      print_aggregate(r);
      return r.exit_code;
    }
    if (*eval) {
      const EvalInjectionResult r = cmd_eval_injection(ckpt_path, eval_dataset, eval_k, std::cerr);
      std::cout << to_report(r.report).to_text();
      return kExitOk;
    }
    if (*stats) {
      std::cout << cmd_dataset_stats(stats_dataset);
      return kExitOk;
    }
    if (*gen) {
      sbm.validate();
      cmd_gen_sbm(sbm, sbm_out);
      std::cout << "wrote " << sbm_out << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
