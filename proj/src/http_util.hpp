#pragma once

#include <string>

#include "ambig/error.hpp"

namespace ambig::detail {

/// "http://host:8080/prefix" -> {"http://host:8080", "/prefix"}.
struct SplitUrl {
  std::string scheme_host_port;
  std::string path;
};

inline SplitUrl split_url(const std::string &url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error("URL must start with http:// or https://: " + url);
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw Error("unsupported URL scheme '" + scheme + "' in " + url);
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = url;
  } else {
    out.scheme_host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace ambig::detail
