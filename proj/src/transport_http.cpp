// Eigen must be parsed before httplib pulls in resolv.h and its _res macro.
#include "hiertraj/error.hpp"
#include "hiertraj/protocol.hpp"

#include <httplib.h>

namespace hiertraj {

Transport make_http_transport(const std::string& url) {
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
    throw Error(ErrorCode::InvalidArgument, "expected an http:// URL, got '" + url + "'");
  }
  const size_t slash = url.find('/', scheme + 3);
  const std::string base = slash == std::string::npos ? url : url.substr(0, slash);
  std::string path = slash == std::string::npos ? std::string("/plan") : url.substr(slash);
  if (path == "/") path = "/plan";

  return [base, path](const std::string& prompt, double timeout_s) {
    httplib::Client client(base);
    const auto sec = static_cast<time_t>(timeout_s);
    const auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    auto res = client.Post(path, prompt, "text/plain; charset=utf-8");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
        throw Error(ErrorCode::Timeout, "http backend: " + httplib::to_string(err));
      }
      throw Error(ErrorCode::BackendUnavailable, "http backend: " + httplib::to_string(err));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::BackendUnavailable, "http backend answered status " + std::to_string(res->status));
    }
    return res->body;
  };
}

}  // namespace hiertraj
