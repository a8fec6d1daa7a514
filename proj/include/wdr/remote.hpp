#ifndef WDR_REMOTE_HPP
#define WDR_REMOTE_HPP

#include <chrono>
#include <cstddef>
#include <string>

#include "wdr/classifier.hpp"

namespace wdr {

class RemoteError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Request timed out after exhausting the retry budget.
class RemoteTimeoutError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

/// Could not connect or the connection dropped, after retries.
class RemoteConnectionError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

/// Server answered with a non-2xx status. Never retried.
class RemoteStatusError : public RemoteError {
 public:
  RemoteStatusError(int status, const std::string& what) : RemoteError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Response body was not the expected JSON document. Never retried.
class RemoteParseError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

/// Response had the wrong number of rows or columns. Never retried.
class RemoteShapeError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

struct RemoteOptions {
  std::string base_url;  // e.g. "http://127.0.0.1:8080" or "http://host:port/prefix"
  int num_classes = 2;
  std::chrono::milliseconds timeout{30'000};
  std::size_t max_batch_size = 32;
  int retries = 2;            // extra attempts after the first, network failures only
  std::size_t max_in_flight = 4;

  void validate() const;
};

/// LogitsProvider backed by an HTTP model server.
///
/// Wire contract: POST {base}/logits with {"texts": [...]}; the server
/// answers 200 with {"logits": [[...], ...]}, one row per text and
/// num_classes entries per row. Batches larger than max_batch_size are
/// split and up to max_in_flight requests run concurrently; results are
/// reassembled in input order.
class RemoteLogitsClient final : public LogitsProvider {
 public:
  explicit RemoteLogitsClient(RemoteOptions options);

  int num_classes() const override { return options_.num_classes; }
  Mat query(std::span<const TokenizedText> texts) const override;

  const RemoteOptions& options() const { return options_; }

 private:
  Mat post_batch(std::span<const TokenizedText> texts) const;

  RemoteOptions options_;
  std::string host_;    // scheme://host[:port]
  std::string prefix_;  // path prefix without trailing slash
};

}  // namespace wdr

#endif  // WDR_REMOTE_HPP
