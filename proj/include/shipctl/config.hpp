#pragma once

#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "shipctl/params.hpp"

namespace shipctl {

/// Every configurable field as ("section.key", pointer into p). The key names
/// mirror the struct members, with the K_T array exposed as propeller.K_T0..K_T5.
std::vector<std::pair<std::string, double*>> config_fields(ShipParams& p);

/// Parse `section.key = value` lines over `base`. '#' starts a comment.
/// Unknown keys and malformed lines throw Error(Config) naming the line number.
ShipParams parse_config(std::istream& in, ShipParams base = ShipParams::htc());
ShipParams load_config(const std::string& path, ShipParams base = ShipParams::htc());

/// Inverse of parse_config: one line per field, round-trippable.
std::string to_config(const ShipParams& p);

}  // namespace shipctl
