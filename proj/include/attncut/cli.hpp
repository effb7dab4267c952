// Copyright 2026 The attncut Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ATTNCUT_CLI_HPP_
#define ATTNCUT_CLI_HPP_

#include <iostream>

namespace attncut {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the attncut tool: prepare | train | evaluate | truncate.
/// Options may also come from a TOML/INI file given by --config or the
/// ATTNCUT_CONFIG environment variable; flags on the command line win.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace attncut

#endif  // ATTNCUT_CLI_HPP_
