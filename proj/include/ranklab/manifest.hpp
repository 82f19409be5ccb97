// Copyright 2026 the ranklab authors.
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

#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ranklab/data.hpp"

namespace ranklab {

/// Flat key-value document: "key = value" lines, '#' comments. Used for
/// config files and for run manifests.
inline std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                        const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    const std::string key = detail::trim(trimmed.substr(0, eq));
    const std::string value = detail::trim(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

inline std::map<std::string, std::string> load_kv_file(const std::string& path) {
  return parse_kv_text(read_file(path), path);
}

/// Resolved run settings. Reads record the effective value (including
/// defaults) back into the map, so a settings object that has driven a
/// command holds everything needed to replay it bitwise.
class Settings {
 public:
  Settings() = default;
  explicit Settings(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    values_[key] = fallback;
    return fallback;
  }

  long get_int(const std::string& key, long fallback) {
    return parse_long(get(key, std::to_string(fallback)), key.c_str());
  }

  double get_double(const std::string& key, double fallback) {
    return parse_double(get(key, format_double(fallback)), key.c_str());
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Everything needed to reproduce one CLI run: the command, resolved
/// settings, and input/output paths. Written next to the command's primary
/// output; `ranklab rerun <manifest>` replays it bitwise.
struct RunManifest {
  std::string command;
  std::string version;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  Settings settings;

  void save(const std::string& path) const {
    atomic_write(path, [this](std::ostream& os) {
      os << "command = " << command << '\n';
      os << "version = " << version << '\n';
      for (const auto& [k, v] : inputs) os << "input." << k << " = " << v << '\n';
      for (const auto& [k, v] : outputs) os << "output." << k << " = " << v << '\n';
      for (const auto& [k, v] : settings.values()) os << "setting." << k << " = " << v << '\n';
    });
  }

  static RunManifest load(const std::string& path) {
    const auto kv = load_kv_file(path);
    RunManifest m;
    std::map<std::string, std::string> settings;
    for (const auto& [k, v] : kv) {
      if (k == "command") {
        m.command = v;
      } else if (k == "version") {
        m.version = v;
      } else if (k.rfind("input.", 0) == 0) {
        m.inputs[k.substr(6)] = v;
      } else if (k.rfind("output.", 0) == 0) {
        m.outputs[k.substr(7)] = v;
      } else if (k.rfind("setting.", 0) == 0) {
        settings[k.substr(8)] = v;
      } else {
        throw std::runtime_error("manifest " + path + ": unknown key '" + k + "'");
      }
    }
    if (m.command.empty()) throw std::runtime_error("manifest " + path + ": missing command");
    m.settings = Settings(settings);
    return m;
  }

  const std::string& input(const std::string& name) const {
    const auto it = inputs.find(name);
    if (it == inputs.end()) throw std::runtime_error("manifest: missing input '" + name + "'");
    return it->second;
  }

  const std::string& output(const std::string& name) const {
    const auto it = outputs.find(name);
    if (it == outputs.end()) throw std::runtime_error("manifest: missing output '" + name + "'");
    return it->second;
  }
};

}  // namespace ranklab
