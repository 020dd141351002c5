#pragma once

#include <filesystem>

#include "golfsig/data/swing.hpp"
#include "golfsig/prior/prior.hpp"

namespace golfsig::analysis {

enum class HeadMode { linear_probe, mlp_finetune };
enum class Task { sex, club, player, age };

const char* head_mode_name(HeadMode m);
HeadMode parse_head_mode(const std::string& s);
const char* task_name(Task t);
Task parse_task(const std::string& s);

struct HeadConfig {
  std::string mode = "linear-probe";
  std::string task = "sex";
  std::size_t hidden = 512;
  double dropout = 0.3;
  double lr_head = 5e-4;
  double lr_backbone = 5e-5;
  double weight_decay = 1e-5;
  std::size_t batch = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  /// Player classes with fewer swings are dropped.
  std::size_t min_class_samples = 3;

  void validate() const;
};

template <class V>
void describe(V& v, HeadConfig& c) {
  v("mode", c.mode);
  v("task", c.task);
  v("hidden", c.hidden);
  v("dropout", c.dropout);
  v("lr_head", c.lr_head);
  v("lr_backbone", c.lr_backbone);
  v("weight_decay", c.weight_decay);
  v("batch", c.batch);
  v("max_epochs", c.max_epochs);
  v("patience", c.patience);
  v("train_fraction", c.train_fraction);
  v("val_fraction", c.val_fraction);
  v("min_class_samples", c.min_class_samples);
}

/// Linear head, or linear - batchnorm - relu - dropout - linear. After
/// fold_batchnorm the batch-norm is merged into the first linear layer.
struct Head {
  HeadMode mode = HeadMode::linear_probe;
  Task task = Task::sex;
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  double dropout = 0.0;
  bool folded = false;
  std::vector<std::string> classes;  // empty for regression
  nn::ParameterStore params;
};

Head init_head(HeadMode mode, Task task, std::size_t inputs, std::size_t hidden, std::size_t outputs, double dropout,
               std::uint64_t seed);
nn::Var head_forward(nn::Graph& g, const Head& head, nn::Var features);
/// Evaluation-mode batch-norm merged into the preceding linear layer.
Head fold_batchnorm(const Head& head);

/// Mean-pooled contextual prior embeddings: batch x width.
nn::Var swing_features(nn::Graph& g, const prior::Prior& backbone, const std::vector<const tok::TokenGrid*>& grids);

struct Labels {
  std::vector<int> classes;      // per swing, -1 when excluded
  std::vector<double> values;    // age in years
  std::vector<std::string> names;
};
Labels make_labels(const std::vector<data::SwingRecord>& swings, Task task, std::size_t min_class_samples);

struct SplitIds {
  std::vector<std::size_t> train, val, test;
};
/// 70/15/15 by default: random for sex and club, stratified per player for
/// player, player-disjoint for age.
SplitIds split_for_task(const std::vector<data::SwingRecord>& swings, const Labels& labels, Task task,
                        double train_fraction, double val_fraction, std::uint64_t seed);

struct HeadResult {
  Head head;
  prior::Prior backbone;
  SplitIds split;
  /// Accuracy for classification, MAE in years for age.
  double test_metric = 0.0;
  /// Majority-class accuracy, or MAE of the training median.
  double baseline = 0.0;
  std::vector<double> val_curve;
  std::size_t excluded = 0;
};

HeadResult fit_head(const prior::Prior& backbone, const std::vector<data::SwingRecord>& swings,
                    const HeadConfig& config, std::uint64_t seed);

/// Predicted outputs (logits or age) for the given swings.
nn::NDArray predict_head(const Head& head, const prior::Prior& backbone, const std::vector<const tok::TokenGrid*>& grids);

struct Relevance {
  nn::NDArray map;  // T x parts
  double logit = 0.0;
};

/// Epsilon-rule relevance of each token for output `target`. Biases are
/// shared evenly among a layer's inputs so relevance is conserved. Heads with
/// unfolded batch-norm are refused.
Relevance lrp_relevance(const Head& head, const prior::Prior& backbone, const tok::TokenGrid& grid, std::size_t target,
                        double epsilon = 1e-6);

/// Relevance of the rows of `features` (n x d) whose mean feeds the head.
Relevance lrp_from_token_features(const Head& head, const nn::NDArray& token_features, std::size_t frames,
                                  std::size_t parts, std::size_t target, double epsilon = 1e-6);

void save_head(const Head& head, const std::filesystem::path& dir);
Head load_head(const std::filesystem::path& dir);

}  // namespace golfsig::analysis
