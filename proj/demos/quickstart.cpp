// Trains a GCN with link injection on a small block model and prints the
// strongest injected links.

#include <iostream>

#include "linkforge.hpp"

using namespace linkforge;

int main() {
  SbmSpec spec;
  spec.seed = 7;
  const DatasetBundle data = generate_sbm(spec);
  const Graph& graph = data.graph;

  TrainConfig cfg;
  cfg.max_epochs = 300;
  cfg.early_stopping = false;
  cfg.optimizer.lr = 0.01;
  cfg.injection_optimizer.lr = 0.01;

  Model model = Model::make(LayerKind::gcn, graph.n_features(), 16, graph.n_classes, 2, cfg.seed);
  InjectionParam injection = InjectionParam::create(graph.n_nodes(), cfg.injection_init, cfg.seed);
  const TrainState state = train_node_clf(graph, data.masks, model, &injection, cfg);
  restore_best(state, model, &injection);

  const Matrix logits = predict_node_logits(graph, model, &injection, false);
  std::cout << "best val accuracy " << state.best_metric << " at epoch " << state.best_epoch << "\n";
  std::cout << "test accuracy " << masked_accuracy(logits, graph.labels, data.masks.test) << "\n";
  std::cout << "positive injections " << state.initial_snapshot->nonzero_count << " -> "
            << state.final_snapshot->nonzero_count << "\n";
  for (const RankedLink& l : top_k_injections(injection, 5).links) {
    std::cout << "  " << l.i << " - " << l.j << "  " << l.score << (graph.adjacency(l.i, l.j) > 0 ? "  (observed)" : "")
              << "\n";
  }
}
