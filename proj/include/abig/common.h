// Copyright 2026 The ABIG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ABIG_COMMON_H_
#define ABIG_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace abig {

// All randomness flows through explicitly passed streams of this type.
using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a purpose tag, so that
// e.g. the modeling frame and the planner never share draws.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0xAB16u};
  return Rng(seq);
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EpisodeExhaustedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised by the enumeration oracles when an instance is too large to search.
class OracleLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace abig

#endif  // ABIG_COMMON_H_
