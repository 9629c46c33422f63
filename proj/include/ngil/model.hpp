#pragma once

#include <vector>

#include "ngil/nn.hpp"
#include "ngil/types.hpp"

namespace ngil {

/// Shared encoder plus one head per task seen so far.
struct ModelState {
  GnnParams encoder;
  std::vector<HeadParams> heads;  // heads[i] belongs to task i+1
  int horizon = 0;                // tasks trained so far

  const HeadParams& head_for(int task_index) const;
  HeadParams& head_for(int task_index);
};

}  // namespace ngil
