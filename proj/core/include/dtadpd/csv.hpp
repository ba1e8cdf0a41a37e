#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dtadpd/model.hpp"

namespace dtadpd {

// Reads study rows with header `study,tp,fn,fp,tn`. The study field is kept
// verbatim as the label; an empty one gets the 1-based row number. Malformed
// input throws DataError naming the line.
std::vector<StudyCounts> read_studies_csv(std::istream& in);
std::vector<StudyCounts> read_studies_csv(const std::string& path);

}  // namespace dtadpd
