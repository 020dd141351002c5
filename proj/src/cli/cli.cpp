#include "golfsig/cli/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "golfsig/analysis/anomaly.hpp"
#include "golfsig/cli/config.hpp"
#include "golfsig/data/dataset.hpp"
#include "golfsig/io/gsmb.hpp"
#include "golfsig/util/error.hpp"
#include "golfsig/util/log.hpp"

namespace golfsig::cli {

namespace {

namespace fs = std::filesystem;
using data::SwingRecord;
using nn::NDArray;
using tok::TokenGrid;

constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;
constexpr std::size_t kChunk = 32;

void write_json(const fs::path& path, const Json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

TokenGrid grid_of(const SwingRecord& r) {
  if (r.tokens.empty()) throw ValidationError("swing " + r.id + " has no tokens; run tokenize first");
  return {r.tokens.size() / kin::kParts, kin::kParts, r.tokens};
}

std::vector<TokenGrid> grids_of(const std::vector<SwingRecord>& records) {
  std::vector<TokenGrid> out;
  for (const auto& r : records) out.push_back(grid_of(r));
  return out;
}

// Consecutive runs of equal length, at most kChunk long.
std::vector<std::pair<std::size_t, std::size_t>> chunks(const std::vector<SwingRecord>& records) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < records.size();) {
    std::size_t e = s + 1;
    while (e < records.size() && e - s < kChunk && records[e].frames() == records[s].frames()) ++e;
    out.emplace_back(s, e);
    s = e;
  }
  return out;
}

std::vector<TokenGrid> tokenize_records(const tok::Vqvae& m, const std::vector<SwingRecord>& records) {
  std::vector<TokenGrid> out;
  for (auto [s, e] : chunks(records)) {
    std::vector<const NDArray*> motions;
    for (std::size_t i = s; i < e; ++i) {
      if (!records[i].has_pose()) throw ValidationError("swing " + records[i].id + " has no pose to tokenize");
      motions.push_back(&records[i].motion.pose);
    }
    for (auto& g : tok::encode_batch(m, motions)) out.push_back(std::move(g));
  }
  return out;
}

double joint_angle_error(const kin::Skeleton& s, const NDArray& pred, const NDArray& gt) {
  return kin::mpjre(kin::extract_joint_angles(s, pred).angles, kin::extract_joint_angles(s, gt).angles);
}

std::vector<std::size_t> all_ids(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// Options shared by every pipeline command.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string data;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_data = true) {
  cmd->add_option("--config", c.config, "pipeline config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override a config key, key=value (repeatable)");
  if (needs_data) cmd->add_option("--data", c.data, "dataset directory (default: paths.data)");
  cmd->add_option("--out", c.out, "output directory")->required();
}

fs::path data_dir(const Common& c, const PipelineConfig& cfg) {
  const std::string d = c.data.empty() ? cfg.paths.data : c.data;
  if (d.empty()) throw ConfigError("no dataset: pass --data or set paths.data");
  if (!fs::exists(fs::path(d) / data::kManifestName)) throw FormatError(d + ": no " + data::kManifestName);
  return d;
}

}  // namespace

int run(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Golf swing pipeline: synthetic corpus, kinematics, events, tokens, prior and analysis."};
  app.name("golfsig");
  app.require_subcommand(1, 1);

  Common c;
  std::map<CLI::App*, std::function<void()>> handlers;
  auto command = [&](const char* name, const char* help, bool needs_data = true) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, c, needs_data);
    return cmd;
  };

  // gen
  std::size_t swings = 0;
  auto* gen = command("gen", "generate a synthetic swing corpus", false);
  gen->add_option("--swings", swings, "number of swings (overrides datagen.swings)");
  handlers[gen] = [&] {
    auto sets = c.sets;
    if (swings) sets.push_back("datagen.swings=" + std::to_string(swings));
    const auto cfg = load_config(c.config, sets);
    const auto skel = cfg.load_skeleton();
    const auto records =
        data::generate_corpus(skel, cfg.corpus(), cfg.stage_seed("gen"), cfg.generator(), cfg.placement());
    data::write_dataset(records, c.out);
    echo_config(cfg, c.out);
    write_json(fs::path(c.out) / "metrics.json", {{"swings", records.size()}, {"frames", cfg.datagen.frames}});
    spdlog::info("wrote {} swings to {}", records.size(), c.out);
  };

  // train-posenet
  auto* tpose = command("train-posenet", "train the sensor-to-pose network");
  handlers[tpose] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto skel = cfg.load_skeleton();
    const auto t = pose::train_posenet(records, cfg.posenet, cfg.stage_seed("posenet"));
    pose::save_posenet(t.model, c.out);
    std::vector<double> pe, re;
    for (auto i : t.val_ids) {
      const auto pred = pose::infer_sequence(t.model, records[i].sensor);
      pe.push_back(kin::mpjpe(pred, records[i].motion.pose, skel));
      re.push_back(joint_angle_error(skel, pred, records[i].motion.pose));
    }
    echo_config(cfg, c.out);
    write_json(fs::path(c.out) / "metrics.json", {{"val_mpjpe_cm", mean(pe)},
                                                  {"val_mpjre_deg", mean(re)},
                                                  {"train_loss", t.curve.train_loss},
                                                  {"val_loss", t.curve.val_loss},
                                                  {"drop_iteration", t.curve.drop_iteration}});
    spdlog::info("posenet: held-out MPJPE {:.2f} cm, MPJRE {:.2f} deg", mean(pe), mean(re));
  };

  // train-events
  auto* tev = command("train-events", "train the event detector");
  handlers[tev] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto t = events::train_event_detector(records, cfg.events, cfg.stage_seed("events"));
    events::save_event_model(t.model, c.out);
    std::vector<events::EventFrames> pred, truth;
    std::vector<std::size_t> lengths;
    for (auto i : t.val_ids) {
      pred.push_back(events::detect_events(t.model, records[i].motion.pose));
      truth.push_back(records[i].events);
      lengths.push_back(records[i].frames());
    }
    const double p = events::pce(pred, truth), base = events::random_pce(truth, lengths);
    echo_config(cfg, c.out);
    write_json(fs::path(c.out) / "metrics.json", {{"val_pce", p},
                                                  {"random_pce", base},
                                                  {"best_epoch", t.curve.best_epoch},
                                                  {"epochs", t.curve.epochs},
                                                  {"train_loss", t.curve.train_loss},
                                                  {"val_loss", t.curve.val_loss},
                                                  {"skipped", t.skipped}});
    spdlog::info("events: held-out PCE {:.1f} (random {:.1f})", p, base);
  };

  // train-vqvae
  bool single = false;
  auto* tvq = command("train-vqvae", "train the body-part tokenizer");
  tvq->add_flag("--single-codebook", single, "one codebook over the whole pose (ablation)");
  handlers[tvq] = [&] {
    auto sets = c.sets;
    if (single) sets.push_back("vqvae.single_codebook=true");
    const auto cfg = load_config(c.config, sets);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto t = tok::train_vqvae(records, cfg.load_skeleton(), cfg.vqvae, cfg.stage_seed("vqvae"));
    tok::save_vqvae(t.model, c.out);
    echo_config(cfg, c.out);
    const auto& cv = t.curve;
    write_json(fs::path(c.out) / "metrics.json",
               {{"initial_mpjpe_cm", cv.initial_mpjpe},
                {"final_mpjpe_cm", cv.mpjpe.empty() ? cv.initial_mpjpe : cv.mpjpe.back()},
                {"utilization", cv.utilization.empty() ? std::vector<double>{} : cv.utilization.back()},
                {"loss", cv.loss},
                {"mpjpe_cm", cv.mpjpe}});
  };

  // train-prior
  auto* tpr = command("train-prior", "train the masked token prior");
  handlers[tpr] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto grids = grids_of(data::read_dataset(data_dir(c, cfg)));
    const auto t = prior::train_prior(grids, cfg.prior, cfg.stage_seed("prior"));
    prior::save_prior(t.model, c.out);
    echo_config(cfg, c.out);
    write_json(fs::path(c.out) / "metrics.json",
               {{"val_masked_accuracy", t.curve.val_accuracy.empty() ? 0.0 : t.curve.val_accuracy.back()},
                {"train_loss", t.curve.train_loss},
                {"val_accuracy", t.curve.val_accuracy}});
  };

  // infer
  std::string model_dir, align = "root";
  auto* inf = command("infer", "predict poses from sensor data");
  inf->add_option("--model", model_dir, "posenet checkpoint")->required();
  inf->add_option("--align", align, "MPJPE alignment: root or procrustes");
  handlers[inf] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto alignment = kin::parse_alignment(align);
    auto records = data::read_dataset(data_dir(c, cfg));
    const auto skel = cfg.load_skeleton();
    const auto model = pose::load_posenet(model_dir);
    std::vector<double> pe, re;
    for (auto& r : records) {
      if (!r.has_sensor()) throw ValidationError("swing " + r.id + " has no sensor data");
      auto pred = pose::infer_sequence(model, r.sensor);
      if (r.has_pose()) {
        pe.push_back(kin::mpjpe(pred, r.motion.pose, skel, alignment));
        re.push_back(joint_angle_error(skel, pred, r.motion.pose));
      }
      r.motion.pose = std::move(pred);
      r.motion.root.reset();
      r.tokens.clear();
    }
    data::write_dataset(records, c.out);
    echo_config(cfg, c.out);
    Json m{{"swings", records.size()}, {"alignment", align}};
    if (!pe.empty()) {
      m["mpjpe_cm"] = mean(pe);
      m["mpjre_deg"] = mean(re);
    }
    write_json(fs::path(c.out) / "metrics.json", m);
  };

  // detect
  auto* det = command("detect", "detect swing events from poses");
  det->add_option("--model", model_dir, "event checkpoint")->required();
  handlers[det] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto model = events::load_event_model(model_dir);
    std::map<std::string, events::EventFrames> found;
    std::vector<events::EventFrames> pred, truth;
    std::vector<std::size_t> lengths;
    for (const auto& r : records) {
      if (!r.has_pose()) throw ValidationError("swing " + r.id + " has no pose");
      pred.push_back(events::detect_events(model, r.motion.pose));
      found[r.id] = pred.back();
      truth.push_back(r.events);
      lengths.push_back(r.frames());
    }
    echo_config(cfg, c.out);
    events::write_event_predictions(fs::path(c.out) / "events.json", found);
    write_json(fs::path(c.out) / "metrics.json",
               {{"pce", events::pce(pred, truth)}, {"random_pce", events::random_pce(truth, lengths)}});
  };

  // tokenize
  auto* tkz = command("tokenize", "encode poses into token grids");
  tkz->add_option("--model", model_dir, "vqvae checkpoint")->required();
  handlers[tkz] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    auto records = data::read_dataset(data_dir(c, cfg));
    const auto model = tok::load_vqvae(model_dir);
    if (model.parts() != kin::kParts) throw ValidationError("tokenize needs a " + std::to_string(kin::kParts) + "-part model");
    auto grids = tokenize_records(model, records);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].tokens = grids[i].codes;
    data::write_dataset(records, c.out);
    echo_config(cfg, c.out);
    write_json(fs::path(c.out) / "metrics.json",
               {{"utilization", tok::codebook_utilization(grids, model.config.fsq().codebook_size())}});
  };

  // detokenize
  auto* dtk = command("detokenize", "decode token grids into poses");
  dtk->add_option("--model", model_dir, "vqvae checkpoint")->required();
  handlers[dtk] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    auto records = data::read_dataset(data_dir(c, cfg));
    const auto skel = cfg.load_skeleton();
    const auto model = tok::load_vqvae(model_dir);
    std::vector<double> err;
    for (auto& r : records) {
      auto pose = tok::decode_tokens(model, grid_of(r));
      if (r.has_pose()) err.push_back(kin::mpjpe(pose, r.motion.pose, skel));
      r.motion.pose = std::move(pose);
      r.motion.root.reset();
    }
    data::write_dataset(records, c.out);
    echo_config(cfg, c.out);
    Json m{{"swings", records.size()}};
    if (!err.empty()) m["mpjpe_cm"] = mean(err);
    write_json(fs::path(c.out) / "metrics.json", m);
  };

  // score-tokens
  double threshold = 0.05;
  std::size_t top_k = 10;
  bool exact = false;
  auto* sct = command("score-tokens", "token probabilities and anomaly masks under the prior");
  sct->add_option("--model", model_dir, "prior checkpoint")->required();
  sct->add_option("--threshold", threshold, "anomaly probability threshold");
  sct->add_option("--top-k", top_k, "entries in each summary");
  sct->add_flag("--exact", exact, "mask each position on its own (slow)");
  handlers[sct] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto model = prior::load_prior(model_dir);
    const fs::path out(c.out);
    fs::create_directories(out);
    std::size_t flagged = 0, total = 0;
    double psum = 0.0;
    for (const auto& r : records) {
      const auto g = grid_of(r);
      const NDArray p = prior::token_probabilities(model, g, exact);
      const auto mask = analysis::threshold_mask(p, threshold);
      const auto n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
      io::write_gsmb(out / (r.id + ".prob.bin"), p);
      io::write_gsmb_u16(out / (r.id + ".anomaly.bin"), {g.frames, g.parts},
                         std::vector<std::uint16_t>(mask.begin(), mask.end()));
      analysis::write_anomaly_summary(out / (r.id + ".anomalies.json"), r.id,
                                      analysis::top_anomalies(g, p, mask, top_k), threshold, n);
      flagged += n;
      total += mask.size();
      for (double v : p.values()) psum += v;
    }
    echo_config(cfg, out);
    write_json(out / "metrics.json", {{"swings", records.size()},
                                      {"threshold", threshold},
                                      {"flagged_fraction", total ? double(flagged) / double(total) : 0.0},
                                      {"mean_probability", total ? psum / double(total) : 0.0}});
  };

  // score
  std::string reference, correlate = "age";
  std::size_t frames = 64;
  auto* sco = command("score", "distance of each swing to a reference database");
  sco->add_option("--reference", reference, "tokenized reference dataset (default: paths.reference)");
  sco->add_option("--frames", frames, "resampled length");
  sco->add_option("--correlate", correlate, "player attribute to correlate scores with: age or none");
  handlers[sco] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto queries = data::read_dataset(data_dir(c, cfg));
    const std::string ref = reference.empty() ? cfg.paths.reference : reference;
    if (ref.empty()) throw ConfigError("no reference database: pass --reference or set paths.reference");
    const auto db = grids_of(data::read_dataset(ref));
    if (correlate != "age" && correlate != "none") throw ConfigError("--correlate must be age or none");
    Json rows = Json::array();
    std::vector<double> scores, ages;
    for (const auto& r : queries) {
      scores.push_back(analysis::swing_score(grid_of(r), db, cfg.vqvae.fsq(), frames));
      ages.push_back(r.player.age);
      rows.push_back({{"id", r.id}, {"score", scores.back()}});
    }
    echo_config(cfg, c.out);
    write_json(fs::path(c.out) / "scores.json", rows);
    Json m{{"swings", queries.size()}, {"database", db.size()}, {"mean_score", mean(scores)}};
    if (correlate == "age") {
      try {
        const auto corr = analysis::pearson(scores, ages);
        m["pearson_age"] = {{"r", corr.r}, {"p", corr.p}};
      } catch (const ValidationError& e) {
        spdlog::warn("no correlation: {}", e.what());
      }
    }
    write_json(fs::path(c.out) / "metrics.json", m);
  };

  // inpaint
  std::size_t steps = 8;
  double temperature = 1.0;
  std::string vq_dir;
  auto* inp = command("inpaint", "replace anomalous tokens by sampling from the prior");
  inp->add_option("--model", model_dir, "prior checkpoint")->required();
  inp->add_option("--threshold", threshold, "anomaly probability threshold");
  inp->add_option("--steps", steps, "decoding rounds");
  inp->add_option("--temperature", temperature, "sampling temperature; 0 takes the most likely token");
  inp->add_option("--vqvae", vq_dir, "also decode repaired grids to poses with this tokenizer");
  handlers[inp] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    auto records = data::read_dataset(data_dir(c, cfg));
    const auto model = prior::load_prior(model_dir);
    std::optional<tok::Vqvae> vq;
    if (!vq_dir.empty()) vq = tok::load_vqvae(vq_dir);
    const fs::path out(c.out);
    fs::create_directories(out);
    const std::uint64_t seed = cfg.stage_seed("inpaint");
    std::size_t repaired = 0, improved = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto& r = records[i];
      const auto g = grid_of(r);
      const NDArray before = prior::token_probabilities(model, g);
      const auto mask = analysis::threshold_mask(before, threshold);
      io::write_gsmb_u16(out / (r.id + ".anomaly.bin"), {g.frames, g.parts},
                         std::vector<std::uint16_t>(mask.begin(), mask.end()));
      if (std::count(mask.begin(), mask.end(), 1) == 0) continue;
      Rng rng = Rng::derive(seed, i);
      const auto fixed = analysis::inpaint(model, g, mask, rng, {steps, temperature});
      const NDArray after = prior::token_probabilities(model, fixed);
      double pb = 0.0, pa = 0.0;
      for (std::size_t k = 0; k < mask.size(); ++k)
        if (mask[k]) {
          pb += before[k];
          pa += after[k];
        }
      ++repaired;
      improved += pa > pb;
      r.tokens = fixed.codes;
      if (vq) {
        r.motion.pose = tok::decode_tokens(*vq, fixed);
        r.motion.root.reset();
      }
    }
    data::write_dataset(records, out);
    echo_config(cfg, out);
    write_json(out / "metrics.json", {{"swings", records.size()},
                                      {"repaired", repaired},
                                      {"improved_fraction", repaired ? double(improved) / double(repaired) : 0.0}});
  };

  // probe
  std::string task, mode;
  auto* prb = command("probe", "fit a prediction head on prior features");
  prb->add_option("--model", model_dir, "prior checkpoint")->required();
  prb->add_option("--task", task, "sex, club, player or age (overrides heads.task)");
  prb->add_option("--mode", mode, "linear-probe or mlp-finetune (overrides heads.mode)");
  handlers[prb] = [&] {
    auto sets = c.sets;
    if (!task.empty()) sets.push_back("heads.task=\"" + task + "\"");
    if (!mode.empty()) sets.push_back("heads.mode=\"" + mode + "\"");
    const auto cfg = load_config(c.config, sets);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto backbone = prior::load_prior(model_dir);
    const auto r = analysis::fit_head(backbone, records, cfg.heads, cfg.stage_seed("heads." + cfg.heads.task));
    const fs::path out(c.out);
    analysis::save_head(r.head, out / "head");
    prior::save_prior(r.backbone, out / "backbone");
    echo_config(cfg, out);
    auto ids = [&](const std::vector<std::size_t>& v) {
      std::vector<std::string> s;
      for (auto i : v) s.push_back(records[i].id);
      return s;
    };
    write_json(out / "split.json", {{"train", ids(r.split.train)}, {"val", ids(r.split.val)}, {"test", ids(r.split.test)}});
    write_json(out / "metrics.json", {{"task", cfg.heads.task},
                                      {"mode", cfg.heads.mode},
                                      {"test_metric", r.test_metric},
                                      {"baseline", r.baseline},
                                      {"excluded", r.excluded},
                                      {"val_curve", r.val_curve}});
    spdlog::info("{} ({}): test {:.4f}, baseline {:.4f}", cfg.heads.task, cfg.heads.mode, r.test_metric, r.baseline);
  };

  // explain
  std::string head_dir, target;
  auto* exp = command("explain", "token relevance maps for a trained head");
  exp->add_option("--head", head_dir, "head checkpoint (probe output/head)")->required();
  exp->add_option("--model", model_dir, "backbone prior (probe output/backbone)")->required();
  exp->add_option("--target", target, "class name; default is each swing's predicted class");
  exp->add_option("--top-k", top_k, "entries in each summary");
  handlers[exp] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto backbone = prior::load_prior(model_dir);
    const auto head = analysis::fold_batchnorm(analysis::load_head(head_dir));
    std::optional<std::size_t> fixed;
    if (!target.empty()) {
      auto it = std::find(head.classes.begin(), head.classes.end(), target);
      if (it == head.classes.end()) throw ConfigError("--target: head has no class '" + target + "'");
      fixed = static_cast<std::size_t>(it - head.classes.begin());
    }
    const fs::path out(c.out);
    fs::create_directories(out);
    double worst = 0.0;
    for (const auto& r : records) {
      const auto g = grid_of(r);
      std::size_t t = fixed.value_or(0);
      if (!fixed && head.outputs > 1) {
        const NDArray logits = analysis::predict_head(head, backbone, {&g});
        t = static_cast<std::size_t>(std::max_element(logits.values().begin(), logits.values().end()) -
                                     logits.values().begin());
      }
      const auto rel = analysis::lrp_relevance(head, backbone, g, t);
      io::write_gsmb(out / (r.id + ".relevance.bin"), rel.map);
      double sum = 0.0;
      std::vector<std::size_t> order(rel.map.size());
      for (std::size_t k = 0; k < order.size(); ++k) {
        order[k] = k;
        sum += rel.map[k];
      }
      if (rel.logit != 0.0) worst = std::max(worst, std::abs(sum - rel.logit) / std::abs(rel.logit));
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rel.map[a] > rel.map[b]; });
      Json top = Json::array();
      for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k)
        top.push_back({{"frame", order[k] / g.parts}, {"part", order[k] % g.parts}, {"relevance", rel.map[order[k]]}});
      write_json(out / (r.id + ".relevance.json"),
                 {{"swing", r.id},
                  {"target", head.classes.empty() ? std::string(analysis::task_name(head.task)) : head.classes[t]},
                  {"logit", rel.logit},
                  {"relevance_sum", sum},
                  {"top", top}});
    }
    echo_config(cfg, out);
    write_json(out / "metrics.json", {{"swings", records.size()}, {"max_conservation_error", worst}});
  };

  // eval
  std::string pose_dir, ev_dir, prior_dir, eval_out;
  auto* ev = app.add_subcommand("eval", "metrics of checkpoints on a dataset");
  ev->add_option("--config", c.config, "pipeline config JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--set", c.sets, "override a config key, key=value (repeatable)");
  ev->add_option("--data", c.data, "dataset directory (default: paths.data)");
  ev->add_option("--out", eval_out, "also write metrics.json and the config echo here");
  ev->add_option("--posenet", pose_dir, "posenet checkpoint");
  ev->add_option("--events", ev_dir, "event checkpoint");
  ev->add_option("--vqvae", vq_dir, "vqvae checkpoint");
  ev->add_option("--prior", prior_dir, "prior checkpoint");
  ev->add_option("--align", align, "MPJPE alignment: root or procrustes");
  handlers[ev] = [&] {
    const auto cfg = load_config(c.config, c.sets);
    const auto alignment = kin::parse_alignment(align);
    const auto records = data::read_dataset(data_dir(c, cfg));
    const auto skel = cfg.load_skeleton();
    Json m = Json::object();
    if (!pose_dir.empty()) {
      const auto model = pose::load_posenet(pose_dir);
      std::vector<double> pe, re;
      for (const auto& r : records) {
        const auto pred = pose::infer_sequence(model, r.sensor);
        pe.push_back(kin::mpjpe(pred, r.motion.pose, skel, alignment));
        re.push_back(joint_angle_error(skel, pred, r.motion.pose));
      }
      m["mpjpe_cm"] = mean(pe);
      m["mpjre_deg"] = mean(re);
    }
    if (!ev_dir.empty()) {
      const auto model = events::load_event_model(ev_dir);
      std::vector<events::EventFrames> pred, truth;
      std::vector<std::size_t> lengths;
      for (const auto& r : records) {
        pred.push_back(events::detect_events(model, r.motion.pose));
        truth.push_back(r.events);
        lengths.push_back(r.frames());
      }
      m["pce"] = events::pce(pred, truth);
      m["random_pce"] = events::random_pce(truth, lengths);
    }
    std::vector<TokenGrid> grids;
    if (!vq_dir.empty()) {
      const auto model = tok::load_vqvae(vq_dir);
      m["reconstruction_mpjpe_cm"] = tok::reconstruction_mpjpe(model, records, all_ids(records.size()), skel);
      grids = tokenize_records(model, records);
      m["utilization"] = tok::codebook_utilization(grids, model.config.fsq().codebook_size());
    } else if (!records.empty() && !records.front().tokens.empty()) {
      grids = grids_of(records);
    }
    if (!prior_dir.empty()) {
      if (grids.empty()) throw ValidationError("eval --prior needs tokens in the dataset or --vqvae");
      const auto model = prior::load_prior(prior_dir);
      m["masked_accuracy"] = prior::masked_accuracy(model, grids, all_ids(grids.size()), cfg.stage_seed("eval"));
    }
    for (const auto& [k, v] : m.items()) {
      if (v.is_array()) {
        std::cout << k << ":";
        for (const auto& x : v) std::cout << ' ' << x.get<double>();
        std::cout << '\n';
      } else {
        std::cout << k << ": " << v.get<double>() << '\n';
      }
    }
    for (const auto& [k, v] : m.items())
      for (const auto& x : v.is_array() ? v : Json::array({v}))
        if (!std::isfinite(x.get<double>())) throw TrainingError("eval: non-finite " + k);
    if (!eval_out.empty()) {
      echo_config(cfg, eval_out);
      write_json(fs::path(eval_out) / "metrics.json", m);
    }
  };

  // report
  std::string run_dir, report_out;
  auto* rep = app.add_subcommand("report", "JSON and Markdown summary of a pipeline run");
  rep->add_option("--run", run_dir, "directory holding one output directory per stage")
      ->required()
      ->check(CLI::ExistingDirectory);
  rep->add_option("--out", report_out, "report directory")->required();
  handlers[rep] = [&] {
    std::vector<fs::path> stages;
    for (const auto& e : fs::directory_iterator(run_dir))
      if (e.is_directory() && fs::exists(e.path() / "metrics.json")) stages.push_back(e.path());
    std::sort(stages.begin(), stages.end());
    if (stages.empty()) throw FormatError(run_dir + ": no stage output directories with metrics.json");
    Json stage_json = Json::object();
    std::ostringstream md;
    md << "# Pipeline report\n\n";
    std::optional<Json> first_config;
    for (const auto& dir : stages) {
      if (!fs::exists(dir / kConfigEcho))
        throw FormatError(dir.string() + ": missing " + kConfigEcho + "; rerun the stage to regenerate it");
      const Json cfg = read_json(dir / kConfigEcho);
      if (!first_config) first_config = cfg;
      const Json metrics = read_json(dir / "metrics.json");
      const std::string name = dir.filename().string();
      stage_json[name] = {{"metrics", metrics}, {"seed", cfg.value("seed", Json())}};
      md << "## " << name << "\n\n| metric | value |\n|---|---|\n";
      for (const auto& [k, v] : metrics.items()) {
        if (v.is_array() && v.size() > 8) {
          md << "| " << k << " (last of " << v.size() << ") | " << v.back().dump() << " |\n";
        } else {
          md << "| " << k << " | " << v.dump() << " |\n";
        }
      }
      md << '\n';
    }
    const fs::path out(report_out);
    fs::create_directories(out);
    write_json(out / "report.json", {{"run", run_dir}, {"stages", stage_json}});
    std::ofstream(out / "report.md") << md.str();
    write_json(out / kConfigEcho, *first_config);
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    for (auto& [cmd, fn] : handlers)
      if (cmd->parsed()) fn();
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kUsage;
  } catch (const TrainingError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kNumericError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kDataError;
  }
  return 0;
}

}  // namespace golfsig::cli
