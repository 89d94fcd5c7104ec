#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace resim {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over named parameter groups with per-group learning rates. Frozen
// groups are skipped entirely (values and moments bit-identical).
struct AdamState {
  struct Group {
    std::vector<double> m, v;
    double lr = 1e-3;
    bool frozen = false;
  };
  std::map<std::string, Group> groups;
  int64_t t = 0;
  AdamConfig cfg;

  void add_group(const std::string& name, size_t size, double lr) {
    Group g;
    g.m.assign(size, 0.0);
    g.v.assign(size, 0.0);
    g.lr = lr;
    groups.emplace(name, std::move(g));
  }
  void scale_learning_rates(double factor) {
    for (auto& [_, g] : groups) g.lr *= factor;
  }
};

struct ParamGroupRef {
  std::string name;
  std::span<double> values;
  std::span<const double> grads;
};

// One bias-corrected Adam step across the listed groups. Raises
// NumericalError naming the group on any non-finite gradient.
void adam_step(AdamState& state, std::span<const ParamGroupRef> groups);

}  // namespace resim
