#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "edwait/config.hpp"
#include "edwait/simulator.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("edwait_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Single-CTAS, single-server site without balking: an M/M/1 queue.
inline edwait::SiteConfig mm1_site(double arrivals_per_hour, double service_mean_min) {
  edwait::SiteConfig s;
  s.site_id = "ED1";
  s.arrival_rates = {0, 0, arrivals_per_hour, 0, 0};
  s.service_mean_min = {service_mean_min, service_mean_min, service_mean_min, service_mean_min, service_mean_min};
  s.server_count = 1;
  return s;
}

inline edwait::NetworkConfig network_of(std::vector<edwait::SiteConfig> sites) {
  edwait::NetworkConfig n;
  n.start = 0;
  n.sites = std::move(sites);
  return n;
}

}  // namespace testing
