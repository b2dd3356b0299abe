#include "histo/cli_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "histo/errors.hpp"

namespace histo {

std::map<std::string, std::string> parse_config_text(
    const std::string& text, const std::vector<std::string>& known_keys) {
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
  };

  std::map<std::string, std::string> values;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::MalformedLine,
           "config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      fail(ErrorCode::MalformedLine,
           "config line " + std::to_string(lineno) + ": empty key");
    if (std::find(known_keys.begin(), known_keys.end(), key) ==
        known_keys.end())
      fail(ErrorCode::UnknownKey, "config: unknown key '" + key + "'");
    values[key] = value;
  }
  return values;
}

std::map<std::string, std::string> load_config_file(
    const std::filesystem::path& path,
    const std::vector<std::string>& known_keys) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), known_keys);
}

}  // namespace histo
