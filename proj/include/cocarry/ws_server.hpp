// Copyright 2026 The cocarry Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// WebSocket front end for live sessions. One client at a time; trials run
// back to back over the same connection.

#ifndef COCARRY_WS_SERVER_HPP_
#define COCARRY_WS_SERVER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "cocarry/session.hpp"

namespace cocarry {

struct ServeOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;
  int trials = 1;
  std::filesystem::path log_dir;  // trial-NNN.json per trial; empty to skip
  // Configuration for trial i; realtime pacing is forced on.
  std::function<SessionConfig(int)> make_config;
  const vrnn::Model* model = nullptr;
  // Called once the listening socket is bound, with the actual port.
  std::function<void(std::uint16_t)> on_listening;
};

// Serves one client connection and returns the number of completed trials.
// Throws Error on socket setup failure.
int serve(const ServeOptions& options);

}  // namespace cocarry

#endif  // COCARRY_WS_SERVER_HPP_
