#pragma once

#include <filesystem>
#include <iosfwd>

#include "pipehmm/gmm.hpp"
#include "pipehmm/hmm.hpp"

namespace pipehmm {

// Versioned plain-text formats. All decimals carry 17 significant digits so
// every double round-trips exactly.
//
//   pipehmm-mixture v1
//   components <K>
//   dim <D>
//   weight <k> <w>
//   mean <k> <D values>
//   cov <k> <D*D values, row-major>
//   ...
//   end-mixture
//
//   pipehmm-model v1
//   topology <ergodic|left_to_right>
//   states <N>
//   name <i> <label>
//   pi <N values>
//   A <i> <N values>
//   emission <i>
//   <embedded mixture block>
//   end-model

void save_mixture(std::ostream& out, const MixtureDensity& mix);
MixtureDensity load_mixture(std::istream& in);

void save_model(const std::filesystem::path& file, const HmmModel& model);
HmmModel load_model(const std::filesystem::path& file);

void save_model(std::ostream& out, const HmmModel& model);
HmmModel load_model(std::istream& in);

}  // namespace pipehmm
