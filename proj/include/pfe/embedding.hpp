#pragma once

#include <string>

#include "pfe/matrix.hpp"

namespace pfe {

enum class Provenance { ground_truth, discriminative, flow_generated };

std::string provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

struct SpeakerEmbedding {
  Vec values;
  Provenance provenance = Provenance::ground_truth;
};

}  // namespace pfe
