#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace histo {

/// key=value overrides for CLI flags. Line-oriented; blank lines and
/// '#' comments are ignored. Keys outside `known_keys` raise UnknownKey,
/// lines without '=' raise MalformedLine.
std::map<std::string, std::string> parse_config_text(
    const std::string& text, const std::vector<std::string>& known_keys);

std::map<std::string, std::string> load_config_file(
    const std::filesystem::path& path,
    const std::vector<std::string>& known_keys);

}  // namespace histo
