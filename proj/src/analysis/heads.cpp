#include "golfsig/analysis/heads.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>

#include "golfsig/nn/model_io.hpp"
#include "golfsig/nn/ops.hpp"
#include "golfsig/nn/optim.hpp"
#include "golfsig/util/error.hpp"
#include "golfsig/util/log.hpp"

namespace golfsig::analysis {

using nn::Graph;
using nn::LayerSpec;
using nn::NDArray;
using nn::Var;
using tok::TokenGrid;

namespace {

constexpr double kBatchNormEps = 1e-5;
constexpr std::size_t kFeatureChunk = 32;

bool is_regression(Task t) { return t == Task::age; }

double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<TokenGrid> grids_of(const std::vector<data::SwingRecord>& swings, std::size_t parts) {
  std::vector<TokenGrid> out;
  out.reserve(swings.size());
  for (const auto& s : swings) {
    if (s.tokens.empty()) throw ValidationError("swing " + s.id + " has no tokens; run tokenize first");
    if (s.tokens.size() % parts != 0)
      throw DimensionError("swing " + s.id + ": token count is not a multiple of " + std::to_string(parts));
    out.push_back({s.tokens.size() / parts, parts, s.tokens});
  }
  return out;
}

std::vector<const TokenGrid*> pick(const std::vector<TokenGrid>& grids, std::span<const std::size_t> ids) {
  std::vector<const TokenGrid*> out;
  for (auto i : ids) out.push_back(&grids[i]);
  return out;
}

// Eval-mode features for every grid, chunked to bound graph size.
NDArray all_features(const prior::Prior& backbone, const std::vector<const TokenGrid*>& grids) {
  const std::size_t w = backbone.config.transformer.width;
  NDArray out({grids.size(), w});
  for (std::size_t start = 0; start < grids.size(); start += kFeatureChunk) {
    const std::size_t end = std::min(grids.size(), start + kFeatureChunk);
    Graph g;
    std::vector<const TokenGrid*> chunk(grids.begin() + static_cast<std::ptrdiff_t>(start),
                                        grids.begin() + static_cast<std::ptrdiff_t>(end));
    const NDArray f = swing_features(g, backbone, chunk).value();
    std::copy_n(f.data(), f.size(), out.data() + start * w);
  }
  return out;
}

NDArray gather(const NDArray& x, std::span<const std::size_t> rows) {
  const std::size_t c = x.cols();
  NDArray out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(x.data() + rows[i] * c, c, out.data() + i * c);
  return out;
}

// Accuracy, or mean absolute error for regression.
double metric(const NDArray& out, const Labels& labels, std::span<const std::size_t> ids, Task task) {
  if (ids.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (is_regression(task)) {
      sum += std::abs(out(i, 0) - labels.values[ids[i]]);
    } else {
      const double* row = out.data() + i * out.cols();
      const auto best = std::max_element(row, row + out.cols()) - row;
      sum += best == labels.classes[ids[i]];
    }
  }
  return sum / static_cast<double>(ids.size());
}

std::string output_layer(const Head& h) { return h.mode == HeadMode::linear_probe ? "fc" : "fc2"; }
std::string input_layer(const Head& h) { return h.mode == HeadMode::linear_probe ? "fc" : "fc1"; }

// Per-channel mean and 1/std of the training features.
struct Standardizer {
  NDArray shift, inv_scale;

  Standardizer(const NDArray& f, std::span<const std::size_t> rows) : shift({f.cols()}), inv_scale({f.cols()}, 1.0) {
    const std::size_t c = f.cols();
    const double n = static_cast<double>(rows.size());
    for (auto r : rows)
      for (std::size_t j = 0; j < c; ++j) shift[j] += f(r, j) / n;
    NDArray var({c});
    for (auto r : rows)
      for (std::size_t j = 0; j < c; ++j) var[j] += (f(r, j) - shift[j]) * (f(r, j) - shift[j]) / n;
    for (std::size_t j = 0; j < c; ++j)
      if (var[j] > 1e-24) inv_scale[j] = 1.0 / std::sqrt(var[j]);
  }

  Var apply(Graph& g, Var x) const {
    NDArray neg(shift.shape());
    for (std::size_t j = 0; j < neg.size(); ++j) neg[j] = -shift[j] * inv_scale[j];
    return nn::add_row(nn::mul_row(x, g.constant(inv_scale)), g.constant(std::move(neg)));
  }

  // Moves the transform into the first linear layer so the head takes raw features.
  void fold_into(Head& h) const {
    auto& w = h.params.get(input_layer(h) + ".weight");
    auto& b = h.params.get(input_layer(h) + ".bias");
    for (std::size_t k = 0; k < w.cols(); ++k)
      for (std::size_t j = 0; j < w.rows(); ++j) {
        b[k] -= shift[j] * inv_scale[j] * w(j, k);
        w(j, k) *= inv_scale[j];
      }
  }
};

}  // namespace

const char* head_mode_name(HeadMode m) { return m == HeadMode::linear_probe ? "linear-probe" : "mlp-finetune"; }

HeadMode parse_head_mode(const std::string& s) {
  if (s == "linear-probe") return HeadMode::linear_probe;
  if (s == "mlp-finetune") return HeadMode::mlp_finetune;
  throw ConfigError("unknown head mode '" + s + "' (linear-probe, mlp-finetune)");
}

const char* task_name(Task t) {
  switch (t) {
    case Task::sex: return "sex";
    case Task::club: return "club";
    case Task::player: return "player";
    case Task::age: return "age";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  for (Task t : {Task::sex, Task::club, Task::player, Task::age})
    if (s == task_name(t)) return t;
  throw ConfigError("unknown task '" + s + "' (sex, club, player, age)");
}

void HeadConfig::validate() const {
  const auto m = parse_head_mode(mode);
  parse_task(task);
  if (m == HeadMode::mlp_finetune && hidden == 0) throw ConfigError("heads.hidden must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("heads.dropout must be in [0, 1)");
  if (lr_head <= 0.0 || lr_backbone < 0.0) throw ConfigError("heads: learning rates must be positive");
  if (batch == 0 || max_epochs == 0) throw ConfigError("heads: batch and max_epochs must be positive");
  if (train_fraction <= 0.0 || val_fraction <= 0.0 || train_fraction + val_fraction >= 1.0)
    throw ConfigError("heads: train and val fractions must be positive and leave a test share");
}

Head init_head(HeadMode mode, Task task, std::size_t inputs, std::size_t hidden, std::size_t outputs, double dropout,
               std::uint64_t seed) {
  if (inputs == 0 || outputs == 0) throw ConfigError("head: widths must be positive");
  Head h;
  h.mode = mode;
  h.task = task;
  h.inputs = inputs;
  h.outputs = outputs;
  h.dropout = dropout;
  Rng rng(seed);
  if (mode == HeadMode::linear_probe) {
    nn::init_layer(LayerSpec::linear(inputs, outputs), h.params, "fc", rng);
    h.folded = true;  // nothing to fold
  } else {
    if (hidden == 0) throw ConfigError("head: hidden width must be positive");
    h.hidden = hidden;
    nn::init_layer(LayerSpec::linear(inputs, hidden), h.params, "fc1", rng);
    nn::init_layer(LayerSpec::batchnorm(hidden), h.params, "bn", rng);
    nn::init_layer(LayerSpec::linear(hidden, outputs), h.params, "fc2", rng);
  }
  return h;
}

Var head_forward(Graph& g, const Head& h, Var x) {
  if (x.cols() != h.inputs)
    throw DimensionError("head: expected " + std::to_string(h.inputs) + " features, got " + std::to_string(x.cols()));
  if (h.mode == HeadMode::linear_probe)
    return nn::primitive_forward(g, LayerSpec::linear(h.inputs, h.outputs), x, h.params, "fc");
  auto y = nn::primitive_forward(g, LayerSpec::linear(h.inputs, h.hidden), x, h.params, "fc1");
  if (!h.folded) y = nn::primitive_forward(g, LayerSpec::batchnorm(h.hidden), y, h.params, "bn");
  y = nn::dropout(nn::relu(y), h.dropout);
  return nn::primitive_forward(g, LayerSpec::linear(h.hidden, h.outputs), y, h.params, "fc2");
}

Head fold_batchnorm(const Head& h) {
  if (h.folded) return h;
  Head out;
  out.mode = h.mode;
  out.task = h.task;
  out.inputs = h.inputs;
  out.hidden = h.hidden;
  out.outputs = h.outputs;
  out.dropout = h.dropout;
  out.classes = h.classes;
  out.folded = true;
  NDArray w = h.params.get("fc1.weight"), b = h.params.get("fc1.bias");
  const auto &gamma = h.params.get("bn.gamma"), &beta = h.params.get("bn.beta");
  const auto &mean = h.params.get("bn.running_mean"), &var = h.params.get("bn.running_var");
  for (std::size_t k = 0; k < h.hidden; ++k) {
    const double s = gamma[k] / std::sqrt(var[k] + kBatchNormEps);
    for (std::size_t j = 0; j < h.inputs; ++j) w(j, k) *= s;
    b[k] = (b[k] - mean[k]) * s + beta[k];
  }
  out.params.add("fc1.weight", std::move(w));
  out.params.add("fc1.bias", std::move(b));
  out.params.add("fc2.weight", h.params.get("fc2.weight"));
  out.params.add("fc2.bias", h.params.get("fc2.bias"));
  return out;
}

Var swing_features(Graph& g, const prior::Prior& backbone, const std::vector<const TokenGrid*>& grids) {
  if (grids.empty()) throw ValidationError("swing_features: no grids");
  const std::size_t P = backbone.config.parts;
  std::vector<Var> pieces;
  // Runs of equal length share one batched pass.
  for (std::size_t start = 0; start < grids.size();) {
    const std::size_t T = grids[start]->frames;
    std::size_t end = start;
    std::vector<int> ids;
    while (end < grids.size() && grids[end]->frames == T) {
      if (grids[end]->parts != P) throw DimensionError("swing_features: grid part count differs from the prior");
      ids.insert(ids.end(), grids[end]->codes.begin(), grids[end]->codes.end());
      ++end;
    }
    const std::size_t B = end - start;
    pieces.push_back(nn::segment_mean(prior::prior_hidden(g, backbone, ids, B, T), B, T * P));
    start = end;
  }
  return pieces.size() == 1 ? pieces.front() : nn::concat_rows(pieces);
}

Labels make_labels(const std::vector<data::SwingRecord>& swings, Task task, std::size_t min_class_samples) {
  Labels l;
  l.classes.assign(swings.size(), 0);
  l.values.resize(swings.size());
  for (std::size_t i = 0; i < swings.size(); ++i) l.values[i] = swings[i].player.age;
  switch (task) {
    case Task::sex:
      l.names = {data::sex_name(data::Sex::male), data::sex_name(data::Sex::female)};
      for (std::size_t i = 0; i < swings.size(); ++i) l.classes[i] = static_cast<int>(swings[i].player.sex);
      break;
    case Task::club:
      for (std::size_t c = 0; c < data::kClubCount; ++c) l.names.push_back(data::club_name(static_cast<data::Club>(c)));
      for (std::size_t i = 0; i < swings.size(); ++i) l.classes[i] = static_cast<int>(swings[i].club);
      break;
    case Task::player: {
      std::map<int, std::size_t> count;
      for (const auto& s : swings) ++count[s.player.id];
      std::map<int, int> index;
      for (const auto& [id, n] : count)
        if (n >= min_class_samples) {
          index[id] = static_cast<int>(l.names.size());
          l.names.push_back("player-" + std::to_string(id));
        }
      for (std::size_t i = 0; i < swings.size(); ++i) {
        auto it = index.find(swings[i].player.id);
        l.classes[i] = it == index.end() ? -1 : it->second;
      }
      break;
    }
    case Task::age: break;
  }
  return l;
}

SplitIds split_for_task(const std::vector<data::SwingRecord>& swings, const Labels& labels, Task task,
                        double train_fraction, double val_fraction, std::uint64_t seed) {
  Rng rng(seed);
  SplitIds s;
  // Train and val counts for n items, leaving at least one for each later split when possible.
  auto cut = [&](std::size_t n) {
    auto tr = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    auto va = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    if (n >= 3) {
      tr = std::clamp<std::size_t>(tr, 1, n - 2);
      va = std::clamp<std::size_t>(va, 1, n - 1 - tr);
    } else {
      tr = n;
      va = 0;
    }
    return std::pair{tr, va};
  };
  auto deal = [&](const std::vector<std::size_t>& items, std::size_t tr, std::size_t va,
                  const std::function<void(std::vector<std::size_t>&, std::size_t)>& put) {
    for (std::size_t k = 0; k < items.size(); ++k) put(k < tr ? s.train : k < tr + va ? s.val : s.test, items[k]);
  };
  auto push = [](std::vector<std::size_t>& v, std::size_t i) { v.push_back(i); };

  if (task == Task::age) {
    // Whole players go to one split so no player is seen in training and test.
    std::vector<int> players;
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < swings.size(); ++i) {
      if (labels.classes[i] < 0) continue;
      auto& m = members[swings[i].player.id];
      if (m.empty()) players.push_back(swings[i].player.id);
      m.push_back(i);
    }
    if (players.size() < 3) throw ValidationError("age split needs at least 3 players");
    std::sort(players.begin(), players.end());
    rng.shuffle(players.begin(), players.end());
    std::vector<std::size_t> order(players.size());
    std::iota(order.begin(), order.end(), 0);
    const auto [tr, va] = cut(players.size());
    deal(order, tr, va, [&](std::vector<std::size_t>& v, std::size_t k) {
      for (auto i : members[players[k]]) v.push_back(i);
    });
  } else if (task == Task::player) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < swings.size(); ++i)
      if (labels.classes[i] >= 0) by_class[labels.classes[i]].push_back(i);
    for (auto& [c, items] : by_class) {
      rng.shuffle(items.begin(), items.end());
      const auto [tr, va] = cut(items.size());
      deal(items, tr, va, push);
    }
  } else {
    std::vector<std::size_t> items;
    for (std::size_t i = 0; i < swings.size(); ++i)
      if (labels.classes[i] >= 0) items.push_back(i);
    rng.shuffle(items.begin(), items.end());
    const auto [tr, va] = cut(items.size());
    deal(items, tr, va, push);
  }
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

NDArray predict_head(const Head& head, const prior::Prior& backbone, const std::vector<const TokenGrid*>& grids) {
  const NDArray f = all_features(backbone, grids);
  Graph g;
  return head_forward(g, head, g.constant(f)).value();
}

HeadResult fit_head(const prior::Prior& backbone, const std::vector<data::SwingRecord>& swings,
                    const HeadConfig& config, std::uint64_t seed) {
  config.validate();
  const HeadMode mode = parse_head_mode(config.mode);
  const Task task = parse_task(config.task);
  const auto grids = grids_of(swings, backbone.config.parts);
  const Labels labels = make_labels(swings, task, config.min_class_samples);

  HeadResult r;
  r.backbone = backbone;
  r.excluded = static_cast<std::size_t>(std::count(labels.classes.begin(), labels.classes.end(), -1));
  if (r.excluded) spdlog::info("{}: {} swings excluded (classes under {} samples)", task_name(task), r.excluded,
                               config.min_class_samples);
  r.split = split_for_task(swings, labels, task, config.train_fraction, config.val_fraction,
                           Rng::derive(seed, 1).next_u64());
  const auto& sp = r.split;
  if (sp.train.empty() || sp.val.empty() || sp.test.empty())
    throw ValidationError(std::string(task_name(task)) + ": too few swings for a train/val/test split");

  const bool regression = is_regression(task);
  const std::size_t outputs = regression ? 1 : labels.names.size();
  if (!regression && outputs < 2) throw ValidationError(std::string(task_name(task)) + ": need at least two classes");
  r.head = init_head(mode, task, backbone.config.transformer.width, config.hidden, outputs, config.dropout,
                     Rng::derive(seed, 2).next_u64());
  r.head.classes = labels.names;

  std::vector<double> train_values;
  for (auto i : sp.train) train_values.push_back(labels.values[i]);
  if (regression) {
    auto& b = r.head.params.get(output_layer(r.head) + ".bias");
    b[0] = median(train_values);
  }

  // A frozen backbone gives fixed features, computed once.
  const bool finetune = mode == HeadMode::mlp_finetune && config.lr_backbone > 0.0;
  std::vector<const TokenGrid*> all;
  for (const auto& g : grids) all.push_back(&g);
  const NDArray frozen = all_features(backbone, all);
  // Fitted on the starting features; folded into the head at the end.
  const Standardizer norm(frozen, sp.train);
  auto evaluate = [&](const Head& h, const prior::Prior& bb, const std::vector<std::size_t>& ids) {
    Graph g;
    const NDArray f = finetune ? all_features(bb, pick(grids, ids)) : gather(frozen, ids);
    return metric(head_forward(g, h, norm.apply(g, g.constant(f))).value(), labels, ids, task);
  };

  Rng rng = Rng::derive(seed, 3);
  std::vector<std::size_t> order = sp.train;
  Head best_head = r.head;
  prior::Prior best_bb = r.backbone;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since = 0, iteration = 0;
  const nn::AdamConfig head_adam{.lr = config.lr_head, .weight_decay = config.weight_decay};
  const nn::AdamConfig bb_adam{.lr = config.lr_backbone, .weight_decay = config.weight_decay};
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::span<const std::size_t> ids(order.data() + start, std::min(config.batch, order.size() - start));
      // Batch statistics need two rows.
      if (ids.size() < 2 && mode == HeadMode::mlp_finetune) continue;
      Graph g(true, seed ^ (++iteration * 0x9E3779B97F4A7C15ULL));
      Var x = finetune ? swing_features(g, r.backbone, pick(grids, ids)) : g.constant(gather(frozen, ids));
      Var out = head_forward(g, r.head, norm.apply(g, x));
      Var loss;
      if (regression) {
        NDArray t({ids.size(), 1});
        for (std::size_t i = 0; i < ids.size(); ++i) t[i] = labels.values[ids[i]];
        loss = nn::l1_loss(out, g.constant(std::move(t)));
      } else {
        std::vector<int> t;
        for (auto i : ids) t.push_back(labels.classes[i]);
        loss = nn::cross_entropy(out, t);
      }
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingError("head training: non-finite loss at epoch " + std::to_string(epoch));
      g.backward(loss);
      nn::Gradients head_grads, bb_grads;
      for (auto& [name, grad] : g.parameter_gradients())
        (r.head.params.contains(name) ? head_grads : bb_grads)[name] = std::move(grad);
      nn::adam_step(r.head.params, head_grads, head_adam);
      if (finetune) nn::adam_step(r.backbone.params, bb_grads, bb_adam);
      r.head.params.apply_buffers(g.buffer_updates());
      loss_sum += lv;
      ++batches;
    }
    const double m = evaluate(r.head, r.backbone, sp.val);
    r.val_curve.push_back(m);
    spdlog::debug("{} epoch {} loss {:.4f} val {:.4f}", task_name(task), epoch, loss_sum / std::max<std::size_t>(batches, 1),
                  m);
    const double score = regression ? -m : m;
    if (score > best) {
      best = score;
      best_head = r.head;
      if (finetune) best_bb = r.backbone;
      since = 0;
    } else if (++since >= config.patience) {
      break;
    }
  }
  r.head = std::move(best_head);
  if (finetune) r.backbone = std::move(best_bb);
  r.test_metric = evaluate(r.head, r.backbone, sp.test);
  norm.fold_into(r.head);

  if (regression) {
    const double med = median(train_values);
    double e = 0.0;
    for (auto i : sp.test) e += std::abs(labels.values[i] - med);
    r.baseline = e / static_cast<double>(sp.test.size());
  } else {
    std::vector<std::size_t> count(outputs, 0);
    for (auto i : sp.train) ++count[static_cast<std::size_t>(labels.classes[i])];
    const auto major = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
    double hits = 0.0;
    for (auto i : sp.test) hits += labels.classes[i] == major;
    r.baseline = hits / static_cast<double>(sp.test.size());
  }
  return r;
}

Relevance lrp_from_token_features(const Head& head, const NDArray& H, std::size_t frames, std::size_t parts,
                                  std::size_t target, double eps) {
  if (!head.folded)
    throw ValidationError("lrp: head has unfolded batch-norm; call fold_batchnorm before computing relevance");
  const std::size_t n = H.rows(), d = H.cols();
  if (n != frames * parts || n == 0) throw DimensionError("lrp: feature rows must equal frames * parts");
  if (d != head.inputs) throw DimensionError("lrp: feature width differs from the head input");
  if (target >= head.outputs) throw ValidationError("lrp: target output out of range");

  struct Layer {
    const NDArray* w;
    const NDArray* b;
  };
  std::vector<Layer> layers;
  if (head.mode == HeadMode::linear_probe) {
    layers.push_back({&head.params.get("fc.weight"), &head.params.get("fc.bias")});
  } else {
    layers.push_back({&head.params.get("fc1.weight"), &head.params.get("fc1.bias")});
    layers.push_back({&head.params.get("fc2.weight"), &head.params.get("fc2.bias")});
  }

  std::vector<double> x(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x[j] += H(i, j);
  for (auto& v : x) v /= static_cast<double>(n);

  // Forward, keeping every layer's input and pre-activation.
  std::vector<std::vector<double>> inputs{x}, pre;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& in = inputs.back();
    const auto& w = *layers[l].w;
    std::vector<double> z(w.cols());
    for (std::size_t k = 0; k < z.size(); ++k) {
      z[k] = (*layers[l].b)[k];
      for (std::size_t j = 0; j < in.size(); ++j) z[k] += in[j] * w(j, k);
    }
    pre.push_back(z);
    if (l + 1 < layers.size()) {
      for (auto& v : z) v = std::max(v, 0.0);
      inputs.push_back(z);
    }
  }
  auto stab = [eps](double z) { return z + (z >= 0.0 ? eps : -eps); };

  Relevance rel;
  rel.logit = pre.back()[target];
  std::vector<double> R(head.outputs, 0.0);
  R[target] = rel.logit;
  // Epsilon rule; ReLU passes relevance through unchanged.
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& in = inputs[l];
    const auto& w = *layers[l].w;
    const auto& b = *layers[l].b;
    const double share = 1.0 / static_cast<double>(in.size());
    std::vector<double> down(in.size(), 0.0);
    for (std::size_t k = 0; k < R.size(); ++k) {
      if (R[k] == 0.0) continue;
      const double s = R[k] / stab(pre[l][k]);
      for (std::size_t j = 0; j < in.size(); ++j) down[j] += (in[j] * w(j, k) + b[k] * share) * s;
    }
    R = std::move(down);
  }
  // Mean pooling: row i contributed H(i, j) / n to x_j.
  rel.map = NDArray({frames, parts});
  for (std::size_t j = 0; j < d; ++j) {
    const double s = R[j] / stab(x[j]) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) rel.map[i] += H(i, j) * s;
  }
  return rel;
}

Relevance lrp_relevance(const Head& head, const prior::Prior& backbone, const TokenGrid& grid, std::size_t target,
                        double eps) {
  if (!head.folded)
    throw ValidationError("lrp: head has unfolded batch-norm; call fold_batchnorm before computing relevance");
  if (grid.parts != backbone.config.parts) throw DimensionError("lrp: grid part count differs from the prior");
  Graph g;
  const NDArray H =
      prior::prior_hidden(g, backbone, {grid.codes.begin(), grid.codes.end()}, 1, grid.frames).value();
  return lrp_from_token_features(head, H, grid.frames, grid.parts, target, eps);
}

void save_head(const Head& h, const std::filesystem::path& dir) {
  Json c{{"mode", head_mode_name(h.mode)}, {"task", task_name(h.task)}, {"inputs", h.inputs},
         {"hidden", h.hidden},            {"outputs", h.outputs},      {"dropout", h.dropout},
         {"folded", h.folded},            {"classes", h.classes}};
  nn::save_model(dir, "head", c, h.params);
}

Head load_head(const std::filesystem::path& dir) {
  auto loaded = nn::load_model(dir, "head");
  const Json& c = loaded.config;
  Head h;
  try {
    h.mode = parse_head_mode(c.at("mode").get<std::string>());
    h.task = parse_task(c.at("task").get<std::string>());
    h.inputs = c.at("inputs").get<std::size_t>();
    h.hidden = c.at("hidden").get<std::size_t>();
    h.outputs = c.at("outputs").get<std::size_t>();
    h.dropout = c.at("dropout").get<double>();
    h.folded = c.at("folded").get<bool>();
    h.classes = c.at("classes").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw FormatError(dir.string() + ": bad head config: " + e.what());
  }
  h.params = std::move(loaded.params);
  return h;
}

}  // namespace golfsig::analysis
