#pragma once

#include <iosfwd>
#include <string>

#include "phylomoments/ctmc.h"

namespace phylomoments {

// Model file, one "key = value" per line, '#' starts a comment.
//
//   states = 4                                  (default 4)
//   exchangeabilities = 1 2 1 1 2 1             GTR, states = 4 only
//   base_freqs = 0.25 0.25 0.25 0.25
//   normalize = true                            (default true)
//   rates = <m*m numbers, row-major>            general reversible Q, with
//   stationary = <m numbers>                    (used instead of the GTR keys)
//   label = counts | dwelling                   (default counts)
//   label_pairs = all | 1-2 2-1 ...             1-based (from-to) pairs
//   state_mask = 1 0 0 0                        for dwelling times
struct ModelConfig {
  RateModel model;
  SummaryLabel label;
};

auto parse_model_config(std::istream& in, const std::string& source = "<model>") -> ModelConfig;
auto read_model_config(const std::string& path) -> ModelConfig;

// The default used when no model file is given: JC69 counting every substitution.
auto default_model_config() -> ModelConfig;

}  // namespace phylomoments
