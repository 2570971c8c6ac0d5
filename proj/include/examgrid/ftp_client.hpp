#pragma once

// Minimal RFC 959 client: USER, PASS, TYPE, PASV, STOR, RETR, NLST, RNFR,
// RNTO, QUIT. Passive mode only, binary type always. Each operation runs on
// its own control connection and ends with QUIT.

#include <chrono>
#include <string>
#include <vector>

#include "examgrid/bytes.hpp"
#include "examgrid/transport.hpp"

namespace examgrid::transport {

class FtpClient {
 public:
  explicit FtpClient(FtpLocation location,
                     std::chrono::milliseconds timeout = std::chrono::seconds(10));

  // STOR to "<name>.part", then RNFR/RNTO onto the final name.
  void put(std::string_view name, ByteView blob);
  Bytes get(std::string_view name);
  std::vector<std::string> list();

 private:
  std::string remote_path(std::string_view name) const;

  FtpLocation location_;
  std::chrono::milliseconds timeout_;
};

}  // namespace examgrid::transport
