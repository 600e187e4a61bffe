#pragma once

// Flat key=value configuration, typed parameter tables and run manifests.

#include "mrf/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mrf {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  require(!in.fail() && (in >> std::ws).eof(), ErrorCode::config,
          "invalid value '" + text + "' for key '" + key + "'");
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  require(!out.empty(), ErrorCode::config, "empty list for key '" + key + "'");
  return out;
}

}  // namespace detail

// Parses `key = value` lines; blank lines and `#` comments are skipped.
inline KeyValues parse_config(std::istream& in) {
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::config, "expected key=value on line " + std::to_string(line_no));
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::config, "empty key on line " + std::to_string(line_no));
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open config '" + path + "'");
  return parse_config(in);
}

// Binds string keys to typed fields; unknown keys are rejected.
class ParamTable {
 public:
  ParamTable& add(const std::string& key, double& v) {
    return bind(key, [&v, key](const std::string& s) { v = detail::parse_number<double>(key, s); },
                [&v] { return nlohmann::json(v); });
  }
  ParamTable& add(const std::string& key, std::size_t& v) {
    return bind(key, [&v, key](const std::string& s) { v = detail::parse_number<std::size_t>(key, s); },
                [&v] { return nlohmann::json(v); });
  }
  ParamTable& add(const std::string& key, std::string& v) {
    return bind(key, [&v](const std::string& s) { v = s; }, [&v] { return nlohmann::json(v); });
  }
  ParamTable& add(const std::string& key, bool& v) {
    return bind(
        key,
        [&v, key](const std::string& s) {
          if (s == "1" || s == "true" || s == "yes") v = true;
          else if (s == "0" || s == "false" || s == "no") v = false;
          else throw Error(ErrorCode::config, "invalid boolean '" + s + "' for key '" + key + "'");
        },
        [&v] { return nlohmann::json(v); });
  }
  ParamTable& add(const std::string& key, std::vector<std::size_t>& v) {
    return bind(key, [&v, key](const std::string& s) { v = detail::parse_list<std::size_t>(key, s); },
                [&v] { return nlohmann::json(v); });
  }
  ParamTable& add(const std::string& key, std::vector<double>& v) {
    return bind(key, [&v, key](const std::string& s) { v = detail::parse_list<double>(key, s); },
                [&v] { return nlohmann::json(v); });
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    const auto it = entries_.find(key);
    require(it != entries_.end(), ErrorCode::config, "unknown config key '" + key + "'");
    it->second.set(value);
  }

  void apply(const KeyValues& values) {
    for (const auto& [k, v] : values) set(k, v);
  }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, e] : entries_) out[k] = e.get();
    return out;
  }

 private:
  struct Entry {
    std::function<void(const std::string&)> set;
    std::function<nlohmann::json()> get;
  };

  ParamTable& bind(const std::string& key, std::function<void(const std::string&)> set,
                   std::function<nlohmann::json()> get) {
    require(!has(key), ErrorCode::config, "duplicate parameter '" + key + "'");
    entries_[key] = {std::move(set), std::move(get)};
    return *this;
  }

  std::map<std::string, Entry> entries_;
};

enum class Scale { desk, paper };

inline Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw Error(ErrorCode::config, "unknown scale '" + s + "' (expected desk or paper)");
}

inline const char* scale_name(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

struct RunContext {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  Scale scale = Scale::desk;
  std::filesystem::path out_dir = "out";
  bool quiet = false;
};

inline void write_manifest(const RunContext& ctx, const std::string& experiment, const nlohmann::json& params,
                           const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json m;
  m["experiment"] = experiment;
  m["version"] = kVersion;
  m["seed"] = ctx.seed;
  m["threads"] = ctx.threads;
  m["scale"] = scale_name(ctx.scale);
  m["config"] = params;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  std::filesystem::create_directories(ctx.out_dir);
  std::ofstream out(ctx.out_dir / "manifest.json");
  require(static_cast<bool>(out), ErrorCode::io, "cannot write manifest");
  out << m.dump(2) << '\n';
}

inline std::ofstream open_output(const RunContext& ctx, const std::string& name) {
  std::filesystem::create_directories(ctx.out_dir);
  std::ofstream out(ctx.out_dir / name);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + (ctx.out_dir / name).string());
  out.precision(17);
  return out;
}

// Independent sub-seed per named stage.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stage + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace mrf
