#include <algorithm>
#include <map>
#include <random>

#include "pgc/errors.hpp"
#include "pgc/graph.hpp"

namespace pgc {

std::vector<FoldSplit> stratified_folds(std::span<const int> targets, int folds,
                                        std::uint64_t seed) {
  if (folds < 2) throw ConfigError("folds must be >= 2, got " + std::to_string(folds));
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < targets.size(); ++i) by_class[targets[i]].push_back(i);
  for (const auto& [cls, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(folds)) {
      throw ConfigError("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                        " example(s), fewer than " + std::to_string(folds) + " folds");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> blocks(static_cast<std::size_t>(folds));
  std::size_t deal = 0;
  for (auto& [cls, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) blocks[deal++ % blocks.size()].push_back(idx);
  }
  for (auto& b : blocks) std::sort(b.begin(), b.end());

  std::vector<FoldSplit> splits(blocks.size());
  if (folds == 2) {
    // No third fold to rotate in: the non-test block is halved per class.
    for (std::size_t f = 0; f < 2; ++f) {
      splits[f].test = blocks[f];
      std::size_t turn = 0;
      for (const auto& [cls, members] : by_class) {
        for (std::size_t idx : blocks[1 - f]) {
          if (targets[idx] != cls) continue;
          (turn++ % 2 == 0 ? splits[f].train : splits[f].validation).push_back(idx);
        }
      }
      std::sort(splits[f].train.begin(), splits[f].train.end());
      std::sort(splits[f].validation.begin(), splits[f].validation.end());
    }
    return splits;
  }
  for (std::size_t f = 0; f < blocks.size(); ++f) {
    const std::size_t val = (f + 1) % blocks.size();
    splits[f].test = blocks[f];
    splits[f].validation = blocks[val];
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (b == f || b == val) continue;
      splits[f].train.insert(splits[f].train.end(), blocks[b].begin(), blocks[b].end());
    }
    std::sort(splits[f].train.begin(), splits[f].train.end());
  }
  return splits;
}

std::vector<FoldSplit> stratified_folds(const Dataset& dataset, int folds, std::uint64_t seed) {
  const auto t = dataset.targets();
  return stratified_folds(t, folds, seed);
}

}  // namespace pgc
