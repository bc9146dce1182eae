#include "pfe/embedding.hpp"

#include <stdexcept>

namespace pfe {

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::ground_truth: return "ground_truth";
    case Provenance::discriminative: return "discriminative";
    case Provenance::flow_generated: return "flow_generated";
  }
  throw std::logic_error("provenance_name: unreachable");
}

Provenance parse_provenance(const std::string& name) {
  if (name == "ground_truth") return Provenance::ground_truth;
  if (name == "discriminative") return Provenance::discriminative;
  if (name == "flow_generated") return Provenance::flow_generated;
  throw std::invalid_argument("parse_provenance: unknown provenance '" + name + "'");
}

}  // namespace pfe
