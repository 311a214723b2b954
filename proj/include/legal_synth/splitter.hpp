#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "legal_synth/corpus.hpp"
#include "legal_synth/qa_pair.hpp"

namespace legal_synth {

enum class Split { Train, Test };

std::string_view to_string(Split s);

inline constexpr double kDefaultTestRatio = 0.1;

struct SplitAssignment {
  UnitKey unit;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  double ratio = kDefaultTestRatio;
};

// test iff hash64(canonical key, seed) / 2^64 < test_ratio. Depends on the
// unit alone, so adding units never moves existing ones.
Split split_for(const UnitKey& unit, std::uint64_t seed, double test_ratio);

// Throws DuplicateUnit, or ConfigError unless 0 < test_ratio < 1.
std::vector<SplitAssignment> assign_splits(std::span<const UnitKey> units, std::uint64_t seed, double test_ratio);

class SplitIndex {
 public:
  SplitIndex() = default;
  explicit SplitIndex(std::span<const SplitAssignment> assignments);

  // Throws MissingAssignment.
  Split at(const UnitKey& unit) const;
  bool contains(const UnitKey& unit) const { return splits_.count(unit) != 0; }
  std::set<UnitKey> units(Split s) const;
  std::uint64_t seed() const { return seed_; }
  double ratio() const { return ratio_; }
  std::size_t size() const { return splits_.size(); }

 private:
  std::map<UnitKey, Split> splits_;
  std::uint64_t seed_ = 0;
  double ratio_ = kDefaultTestRatio;
};

struct PropagatedSplit {
  std::vector<QAPair> train;
  std::vector<QAPair> test;
  // Multi-source pairs touching any test unit: exported nowhere.
  std::vector<QAPair> quarantine;
};

// Single-source pairs follow their unit. Multi-source pairs go to train only
// when every source is train. Throws MissingAssignment.
PropagatedSplit propagate_split(std::span<const QAPair> pairs, const SplitIndex& index);

struct ContaminationViolation {
  std::string qa_id;
  UnitKey unit;
};

struct ContaminationReport {
  std::vector<ContaminationViolation> violations;
  bool clean() const { return violations.empty(); }
};

ContaminationReport verify_no_contamination(std::span<const QAPair> train_pairs, const std::set<UnitKey>& test_units);

nlohmann::json to_json(const ContaminationReport& r);

// {"seed", "test_ratio", "assignments": {canonical key: "train"|"test"}}
nlohmann::json split_manifest_json(const SplitIndex& index);
SplitIndex split_index_from_json(const nlohmann::json& j);

}  // namespace legal_synth
