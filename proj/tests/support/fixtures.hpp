#pragma once

// Structures shared by the unit suites.

#include <initializer_list>
#include <vector>

#include "pbshm/families.hpp"

namespace fixture {

inline const std::vector<double> kDeckA = {20, 2, 0.3, 3e10, 2500, 0.3};
inline const std::vector<double> kPillar = {50, 0.15, 0.15, 1e10, 2500, 0.3};
inline const std::vector<double> kDeckB = {30, 2, 0.3, 3e10, 2500, 0.3};
inline const std::vector<double> kDeckC = {10, 2, 0.3, 3e10, 2500, 0.3};

inline std::vector<double> join(std::initializer_list<std::vector<double>> parts) {
  std::vector<double> v;
  for (const auto& p : parts) v.insert(v.end(), p.begin(), p.end());
  return v;
}

inline pbshm::StructureInstance b2(std::string id = "B2") {
  return {std::move(id), pbshm::two_span_family(), pbshm::ThetaVector(join({kDeckA, kPillar, kDeckB}))};
}

inline pbshm::StructureInstance b3(std::string id = "B3") {
  return {std::move(id), pbshm::three_span_family(),
          pbshm::ThetaVector(join({kDeckA, kPillar, kDeckB, kPillar, kDeckC}))};
}

inline pbshm::StructureInstance with(pbshm::StructureInstance s, std::string_view slot, pbshm::Param p, double v) {
  s.theta[s.family->coordinate(slot, p)] = v;
  return s;
}

}  // namespace fixture
