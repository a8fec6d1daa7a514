#include "wdr/remote.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace wdr {

void RemoteOptions::validate() const {
  if (base_url.empty()) throw InvalidArgument("remote: base_url is empty");
  if (num_classes < 2) throw InvalidArgument("remote: num_classes must be at least 2");
  if (timeout.count() <= 0) throw InvalidArgument("remote: timeout must be positive");
  if (max_batch_size == 0) throw InvalidArgument("remote: max_batch_size must be positive");
  if (retries < 0) throw InvalidArgument("remote: retries must be non-negative");
  if (max_in_flight == 0) throw InvalidArgument("remote: max_in_flight must be positive");
}

RemoteLogitsClient::RemoteLogitsClient(RemoteOptions options) : options_(std::move(options)) {
  options_.validate();
  const auto scheme = options_.base_url.find("://");
  const auto path_start = options_.base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  host_ = options_.base_url.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? std::string{} : options_.base_url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

Mat RemoteLogitsClient::post_batch(std::span<const TokenizedText> texts) const {
  nlohmann::json body;
  auto& arr = body["texts"] = nlohmann::json::array();
  for (const auto& t : texts) arr.push_back(detokenize(t));
  const std::string payload = body.dump();
  const std::string path = prefix_ + "/logits";

  httplib::Client client(host_);
  const auto secs = options_.timeout.count() / 1000;
  const auto usecs = (options_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  for (int attempt = 0;; ++attempt) {
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                             err == httplib::Error::Write;
      if (attempt < options_.retries) continue;
      const std::string msg = "POST " + host_ + path + " failed after " + std::to_string(attempt + 1) +
                              " attempt(s): " + httplib::to_string(err);
      if (timed_out) throw RemoteTimeoutError(msg);
      throw RemoteConnectionError(msg);
    }
    if (res->status < 200 || res->status >= 300) {
      throw RemoteStatusError(res->status, "POST " + host_ + path + " returned HTTP " + std::to_string(res->status));
    }

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw RemoteParseError(std::string("malformed JSON from logits server: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("logits") || !doc["logits"].is_array()) {
      throw RemoteParseError("logits server response lacks a \"logits\" array");
    }
    const auto& rows = doc["logits"];
    if (rows.size() != texts.size()) {
      throw RemoteShapeError("logits server returned " + std::to_string(rows.size()) + " rows for " +
                             std::to_string(texts.size()) + " texts");
    }
    Mat out(static_cast<Eigen::Index>(texts.size()), options_.num_classes);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (!row.is_array()) throw RemoteParseError("logits row " + std::to_string(r) + " is not an array");
      if (row.size() != static_cast<std::size_t>(options_.num_classes)) {
        throw RemoteShapeError("logits row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                               " entries, expected " + std::to_string(options_.num_classes));
      }
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (!row[c].is_number()) throw RemoteParseError("non-numeric logit in row " + std::to_string(r));
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<Real>();
      }
    }
    return out;
  }
}

Mat RemoteLogitsClient::query(std::span<const TokenizedText> texts) const {
  const std::size_t batch = options_.max_batch_size;
  const std::size_t chunks = (texts.size() + batch - 1) / batch;
  Mat out(static_cast<Eigen::Index>(texts.size()), options_.num_classes);
  if (chunks == 0) return out;

  std::vector<std::exception_ptr> failures(chunks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      const std::size_t begin = c * batch;
      const std::size_t count = std::min(batch, texts.size() - begin);
      try {
        out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) =
            post_batch(texts.subspan(begin, count));
      } catch (...) {
        failures[c] = std::current_exception();
      }
    }
  };

  const std::size_t workers = std::min(options_.max_in_flight, chunks);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

}  // namespace wdr
