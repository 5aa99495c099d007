#include "mito/datapipe/splits.hpp"

#include <algorithm>
#include <random>

#include "mito/error.hpp"

namespace mito::datapipe {

namespace {

// Round half up of n * percent / 100 with integer arithmetic.
size_t share(size_t n, size_t percent) { return (n * percent + 50) / 100; }

}  // namespace

SplitSpec split_patients(const std::vector<std::string>& case_ids, uint64_t seed) {
  if (case_ids.size() < 5) {
    throw Error(ErrorKind::TooFewCases, std::to_string(case_ids.size()) + " cases, need at least 5");
  }
  std::vector<std::string> ids = case_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorKind::InvalidArgument, "duplicate case id");
  }
  // Fisher-Yates with explicit index draws keeps the order portable.
  std::mt19937_64 rng(seed);
  for (size_t i = ids.size() - 1; i > 0; --i) {
    const size_t j = rng() % (i + 1);
    std::swap(ids[i], ids[j]);
  }

  const size_t n = ids.size();
  const size_t n_test = std::max<size_t>(1, share(n, 15));
  const size_t rest = n - n_test;
  const size_t n_val = std::max<size_t>(1, share(rest, 20));

  SplitSpec spec;
  spec.seed = seed;
  spec.test_cases.assign(ids.begin(), ids.begin() + n_test);
  spec.val_cases.assign(ids.begin() + n_test, ids.begin() + n_test + n_val);
  spec.train_cases.assign(ids.begin() + n_test + n_val, ids.end());
  return spec;
}

}  // namespace mito::datapipe
