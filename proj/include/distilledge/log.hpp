//
// Copyright 2026 The DistillEdge Authors
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
//

#ifndef DISTILLEDGE_LOG_HPP_
#define DISTILLEDGE_LOG_HPP_

#include <iostream>
#include <mutex>
#include <set>
#include <string>

namespace distilledge {

// Prints each distinct warning once per process.
inline void warn_once(const std::string& message) {
  static std::mutex mu;
  static std::set<std::string> seen;
  std::lock_guard<std::mutex> lock(mu);
  if (seen.insert(message).second) std::cerr << "warning: " << message << '\n';
}

}  // namespace distilledge

#endif  // DISTILLEDGE_LOG_HPP_
