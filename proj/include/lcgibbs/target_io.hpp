#pragma once

#include <string>
#include <variant>

#include "lcgibbs/targets.hpp"

namespace lcgibbs {

/**
 * Accepted documents:
 *   {"type":"gaussian","mean":[...],"precision":[[...]],"blocks":[1,1,...]}
 *   {"type":"logistic","A":[[...]],"prior_scale":s,"l1":w,"lambda_star":v}
 *   {"type":"logcosh","dim":1|2}
 * "blocks", "l1" and "lambda_star" are optional. Malformed documents raise ConfigError.
 */
Target parse_target(const std::string& json_text);
Target load_target(const std::string& path);

Index target_dim(const Target& t);
const BlockStructure& target_blocks(const Target& t);
ConditionNumbers<double> target_condition_numbers(const Target& t);

}  // namespace lcgibbs
