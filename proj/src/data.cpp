#include "eam/data.hpp"

#include <algorithm>
#include <limits>

namespace eam {

double Subject::min_rt() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) m = std::min(m, t.rt);
  return m;
}

int Dataset::attribute_index(const std::string& name) const {
  const auto it = std::find(attribute_names.begin(), attribute_names.end(), name);
  return it == attribute_names.end() ? -1 : static_cast<int>(it - attribute_names.begin());
}

std::size_t Dataset::trial_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.trials.size();
  return n;
}

}  // namespace eam
