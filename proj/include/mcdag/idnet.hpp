#pragma once

#include <string>
#include <string_view>

#include "mcdag/diagram.hpp"

namespace mcdag {

/// Parses and validates an IDNET document.
InfluenceDiagram parse_idnet(std::string_view text);
InfluenceDiagram load_idnet(const std::string& path);

/// Emits IDNET text with shortest round-trip decimals.
std::string serialize_idnet(const InfluenceDiagram& d);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace mcdag
