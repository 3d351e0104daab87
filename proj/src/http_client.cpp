#include "changeqa/http_client.hpp"

#include <httplib.h>

#include <thread>

#include "changeqa/error.hpp"

namespace changeqa {

std::string post_json(const std::string& base_url, const std::string& path, const std::string& body,
                      const RetryPolicy& policy) {
  std::string last_error;
  auto backoff = policy.initial_backoff;
  for (int attempt = 0; attempt <= policy.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(base_url);
    client.set_connection_timeout(policy.timeout);
    client.set_read_timeout(policy.timeout);
    client.set_write_timeout(policy.timeout);
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    last_error = "HTTP " + std::to_string(res->status);
  }
  fail(Errc::backend, base_url + path + " failed after " + std::to_string(policy.retries + 1) +
                          " attempts (" + last_error + ")");
}

}  // namespace changeqa
