#pragma once

#include <chrono>
#include <string>

namespace changeqa {

struct RetryPolicy {
  int retries = 3;  // extra attempts after the first
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{30};
};

/// POSTs a JSON body to base_url + path and returns the 200 response body.
/// Transport failures and non-200 replies are retried with exponential
/// backoff; once retries are exhausted an Errc::backend error is raised.
std::string post_json(const std::string& base_url, const std::string& path, const std::string& body,
                      const RetryPolicy& policy);

}  // namespace changeqa
