#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mito::datapipe {

struct SplitSpec {
  std::vector<std::string> train_cases;
  std::vector<std::string> val_cases;
  std::vector<std::string> test_cases;
  uint64_t seed = 0;
};

/// Case-level split: 15% test, then 20% of the remainder to validation.
/// Counts round half up with a floor of one case per split.
/// Throws Error{TooFewCases} below five cases.
SplitSpec split_patients(const std::vector<std::string>& case_ids, uint64_t seed);

}  // namespace mito::datapipe
