#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include <CLI11.hpp>

#include "shapeinv/cli.hpp"
#include "shapeinv/io.hpp"

namespace shapeinv::cli {

namespace {

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::ConfigError, "'" + key + "': " + why);
}

Json from_text(const Param& p, const std::string& text) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (p.fallback.is_number_integer()) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) bad(p.key, "expected a non-negative integer, got '" + text + "'");
    return v;
  }
  if (p.fallback.is_number()) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      bad(p.key, "expected a finite number, got '" + text + "'");
    }
    return v;
  }
  return text;
}

Json from_file(const Param& p, const Json& v) {
  const Json& f = p.fallback;
  if (f.is_boolean()) {
    if (!v.is_boolean()) bad(p.key, "expected true or false");
    return v;
  }
  if (f.is_number_integer()) {
    if (v.is_number_unsigned()) return v;
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    bad(p.key, "expected a non-negative integer");
  }
  if (f.is_number()) {
    if (!v.is_number()) bad(p.key, "expected a number");
    return v.get<double>();
  }
  if (f.is_string()) {
    if (!v.is_string()) bad(p.key, "expected a string");
    return v;
  }
  if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); })) {
    bad(p.key, "expected a list of strings");
  }
  return v;
}

const Json& lookup(const Json& cfg, const std::string& key) {
  auto it = cfg.find(key);
  if (it == cfg.end()) bad(key, "missing");
  return *it;
}

}  // namespace

struct ParamTable::Slot {
  std::string text;
  std::vector<std::string> list;
  bool flag = false;
  CLI::Option* option = nullptr;
};

ParamTable::ParamTable(CLI::App& app, std::vector<Param> params) : params_(std::move(params)) {
  for (const Param& p : params_) {
    auto slot = std::make_shared<Slot>();
    const std::string name = p.positional ? p.key : flag_name(p.key);
    if (p.fallback.is_boolean()) {
      slot->option = app.add_flag(name, slot->flag, p.help);
    } else if (p.fallback.is_array()) {
      slot->option = app.add_option(name, slot->list, p.help);
    } else {
      slot->option = app.add_option(name, slot->text, p.help);
      if (p.fallback.is_number_integer()) {
        slot->option->type_name("UINT");
      } else if (p.fallback.is_number()) {
        slot->option->type_name("FLOAT");
      }
    }
    slots_.push_back(std::move(slot));
  }
}

Json ParamTable::resolve(const Json& file) const {
  if (!file.is_object()) throw Error(ErrorCode::ConfigError, "config file must hold an object");
  for (auto it = file.begin(); it != file.end(); ++it) {
    const bool known = std::any_of(params_.begin(), params_.end(),
                                   [&](const Param& p) { return p.key == it.key(); });
    if (!known) throw Error(ErrorCode::ConfigError, "unknown key '" + it.key() + "'");
  }
  Json out = Json::object();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Param& p = params_[i];
    const Slot& s = *slots_[i];
    if (s.option->count() > 0) {
      if (p.fallback.is_boolean()) {
        out[p.key] = s.flag;
      } else if (p.fallback.is_array()) {
        out[p.key] = s.list;
      } else {
        out[p.key] = from_text(p, s.text);
      }
    } else if (file.contains(p.key)) {
      out[p.key] = from_file(p, file.at(p.key));
    } else if (p.fallback.is_number_integer()) {
      out[p.key] = p.fallback.get<std::uint64_t>();
    } else {
      out[p.key] = p.fallback;
    }
  }
  return out;
}

Json load_config_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ConfigError, path.string() + " is not valid JSON");
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, path.string() + " must hold an object");
  return j;
}

std::string get_string(const Json& cfg, const std::string& key) {
  const Json& v = lookup(cfg, key);
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

double get_double(const Json& cfg, const std::string& key) {
  const Json& v = lookup(cfg, key);
  if (!v.is_number()) bad(key, "expected a number");
  return v.get<double>();
}

std::uint64_t get_u64(const Json& cfg, const std::string& key) {
  const Json& v = lookup(cfg, key);
  if (!v.is_number_unsigned()) bad(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::size_t get_size(const Json& cfg, const std::string& key) {
  return static_cast<std::size_t>(get_u64(cfg, key));
}

bool get_bool(const Json& cfg, const std::string& key) {
  const Json& v = lookup(cfg, key);
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

std::vector<std::string> get_strings(const Json& cfg, const std::string& key) {
  const Json& v = lookup(cfg, key);
  if (!v.is_array()) bad(key, "expected a list of strings");
  std::vector<std::string> out;
  for (const Json& e : v) {
    if (!e.is_string()) bad(key, "expected a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace shapeinv::cli
