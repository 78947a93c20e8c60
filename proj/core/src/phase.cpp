#include "gridclear/phase.hpp"

#include <cctype>

#include "gridclear/errors.hpp"

namespace gridclear {

char to_char(Phase p) { return "abc"[slot(p)]; }

PhaseSet PhaseSet::parse(std::string_view text) {
  PhaseSet set;
  for (char ch : text) {
    switch (std::tolower(static_cast<unsigned char>(ch))) {
      case 'a': set = set.with(Phase::A); break;
      case 'b': set = set.with(Phase::B); break;
      case 'c': set = set.with(Phase::C); break;
      default:
        throw SchemaError("invalid phase designation '" + std::string(text) + "'");
    }
  }
  if (set.empty()) throw SchemaError("empty phase designation");
  return set;
}

Vec3 PhaseSet::mask() const {
  Vec3 m;
  for (Phase p : kAllPhases) m[slot(p)] = contains(p) ? 1.0 : 0.0;
  return m;
}

std::string PhaseSet::str() const {
  std::string out;
  for (Phase p : kAllPhases)
    if (contains(p)) out.push_back(to_char(p));
  return out;
}

}  // namespace gridclear
