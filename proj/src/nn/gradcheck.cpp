#include "golfsig/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "golfsig/util/random.hpp"

namespace golfsig::nn {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "checked " << checked << " entries, worst " << worst.parameter << "[" << worst.index
     << "] analytic=" << worst.analytic << " numeric=" << worst.numeric << " rel=" << worst.rel_error;
  if (!unverifiable.empty()) os << ", " << unverifiable.size() << " unverifiable";
  return os.str();
}

GradCheckReport grad_check(const LossFn& loss, ParameterStore& params, const GradCheckOptions& options) {
  auto evaluate = [&]() {
    Graph g(options.training, options.graph_seed);
    return loss(g, params).value()[0];
  };

  Gradients analytic;
  {
    Graph g(options.training, options.graph_seed);
    auto l = loss(g, params);
    g.backward(l);
    analytic = g.parameter_gradients();
  }

  GradCheckReport report;
  Rng rng(options.seed);
  for (auto& [name, entry] : params.entries()) {
    if (!entry.trainable) continue;
    auto it = analytic.find(name);
    if (it == analytic.end()) continue;
    auto& value = entry.value;
    std::vector<std::size_t> idx(value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > options.max_entries) {
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(options.max_entries);
    }
    double worst = 0.0;
    for (auto i : idx) {
      const double saved = value[i];
      value[i] = saved + options.step;
      const double up = evaluate();
      value[i] = saved - options.step;
      const double down = evaluate();
      value[i] = saved;
      GradCheckEntry e{name, i, it->second[i], 0.0, 0.0};
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.unverifiable.push_back(e);
        continue;
      }
      e.numeric = (up - down) / (2.0 * options.step);
      const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), options.floor});
      e.rel_error = std::abs(e.analytic - e.numeric) / denom;
      ++report.checked;
      worst = std::max(worst, e.rel_error);
      if (e.rel_error >= report.worst.rel_error) report.worst = e;
    }
    report.max_rel_error[name] = worst;
  }
  return report;
}

}  // namespace golfsig::nn
