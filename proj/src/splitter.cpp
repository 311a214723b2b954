#include "legal_synth/splitter.hpp"

#include "legal_synth/hashing.hpp"

namespace legal_synth {

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_for(const UnitKey& unit, std::uint64_t seed, double test_ratio) {
  const std::uint64_t h = hash64(unit.canonical() + "\x1f" + std::to_string(seed));
  const long double threshold = static_cast<long double>(test_ratio) * 18446744073709551616.0L;
  return static_cast<long double>(h) < threshold ? Split::Test : Split::Train;
}

std::vector<SplitAssignment> assign_splits(std::span<const UnitKey> units, std::uint64_t seed, double test_ratio) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) fail(ErrorKind::Config, "test_ratio must lie in (0, 1)");
  std::set<UnitKey> seen;
  std::vector<SplitAssignment> out;
  out.reserve(units.size());
  for (const auto& u : units) {
    if (!seen.insert(u).second) fail(ErrorKind::DuplicateUnit, "unit " + u.canonical() + " listed twice");
    out.push_back({u, split_for(u, seed, test_ratio), seed, test_ratio});
  }
  return out;
}

SplitIndex::SplitIndex(std::span<const SplitAssignment> assignments) {
  for (const auto& a : assignments) {
    if (!splits_.emplace(a.unit, a.split).second) {
      fail(ErrorKind::DuplicateUnit, "unit " + a.unit.canonical() + " assigned twice");
    }
    seed_ = a.seed;
    ratio_ = a.ratio;
  }
}

Split SplitIndex::at(const UnitKey& unit) const {
  const auto it = splits_.find(unit);
  if (it == splits_.end()) fail(ErrorKind::MissingAssignment, "no split assignment for " + unit.canonical());
  return it->second;
}

std::set<UnitKey> SplitIndex::units(Split s) const {
  std::set<UnitKey> out;
  for (const auto& [u, split] : splits_) {
    if (split == s) out.insert(u);
  }
  return out;
}

PropagatedSplit propagate_split(std::span<const QAPair> pairs, const SplitIndex& index) {
  PropagatedSplit out;
  for (const auto& p : pairs) {
    bool any_test = false;
    for (const auto& ref : p.source_refs) any_test |= index.at(ref) == Split::Test;
    if (!any_test) {
      out.train.push_back(p);
    } else if (p.source_refs.size() == 1) {
      out.test.push_back(p);
    } else {
      out.quarantine.push_back(p);
    }
  }
  return out;
}

ContaminationReport verify_no_contamination(std::span<const QAPair> train_pairs, const std::set<UnitKey>& test_units) {
  ContaminationReport report;
  for (const auto& p : train_pairs) {
    for (const auto& ref : p.source_refs) {
      if (test_units.count(ref)) report.violations.push_back({p.qa_id, ref});
    }
  }
  return report;
}

nlohmann::json to_json(const ContaminationReport& r) {
  auto v = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back({{"qa_id", x.qa_id}, {"unit", x.unit.canonical()}});
  return {{"clean", r.clean()}, {"violations", v}};
}

nlohmann::json split_manifest_json(const SplitIndex& index) {
  nlohmann::json assignments = nlohmann::json::object();
  for (const auto s : {Split::Train, Split::Test}) {
    for (const auto& u : index.units(s)) assignments[u.canonical()] = to_string(s);
  }
  return {{"seed", index.seed()}, {"test_ratio", index.ratio()}, {"assignments", assignments}};
}

SplitIndex split_index_from_json(const nlohmann::json& j) {
  try {
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto ratio = j.at("test_ratio").get<double>();
    std::vector<SplitAssignment> a;
    for (const auto& [key, split] : j.at("assignments").items()) {
      const auto s = split.get<std::string>();
      if (s != "train" && s != "test") fail(ErrorKind::Schema, "bad split '" + s + "'");
      a.push_back({UnitKey::parse(key), s == "test" ? Split::Test : Split::Train, seed, ratio});
    }
    return SplitIndex(a);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad split manifest: ") + e.what());
  }
}

}  // namespace legal_synth
