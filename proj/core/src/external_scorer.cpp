#include "compre/external_scorer.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "compre/error.hpp"
#include "httplib.h"

namespace compre {
namespace {

std::vector<std::string> batch_ids(std::span<const PreparedItem> batch) {
  std::vector<std::string> ids;
  ids.reserve(batch.size());
  for (const auto& item : batch) ids.push_back(item.id);
  return ids;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 10; ++i) {
    if (i > 0) out += ", ";
    out += ids[i];
  }
  if (ids.size() > 10) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string url, std::chrono::milliseconds timeout) : timeout_(timeout) {
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    host_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  }

  std::string round_trip(const std::string& request) override {
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, request, "application/json");
    if (!res) throw ScorerError("POST " + host_ + path_ + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw ScorerError("POST " + host_ + path_ + " returned HTTP " + std::to_string(res->status));
    }
    return res->body;
  }

 private:
  std::string host_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

// Long-lived child process speaking line-delimited JSON on stdin/stdout.
// Requests are serialized; the child sees one request line at a time.
class ProcessTransport final : public Transport {
 public:
  ProcessTransport(std::vector<std::string> command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {
    if (command_.empty()) throw std::invalid_argument("exec endpoint needs a program");
    // A child that exits early must surface as an error, not kill us.
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw ScorerError("pipe() failed");
    pid_ = ::fork();
    if (pid_ < 0) throw ScorerError("fork() failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> argv;
      for (auto& a : command_) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execvp(argv[0], argv.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
  }

  ~ProcessTransport() override {
    ::close(write_fd_);
    ::close(read_fd_);
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }

  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  std::string round_trip(const std::string& request) override {
    std::lock_guard lock(mutex_);
    if (broken_) throw ScorerError("scorer process '" + command_.front() + "' is unusable after an earlier failure");
    // Any failure below leaves the stream out of step with our requests.
    broken_ = true;
    std::string line = request;
    line += '\n';
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(write_fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ScorerError("writing to scorer process '" + command_.front() + "' failed: " + std::strerror(errno));
      }
      written += static_cast<std::size_t>(n);
    }
    auto reply = read_line();
    broken_ = false;
    return reply;
  }

 private:
  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
      if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
        std::string out = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return out;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ScorerError("scorer process '" + command_.front() + "' timed out");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0 && errno == EINTR) continue;
      if (ready <= 0) throw ScorerError("scorer process '" + command_.front() + "' timed out");
      char buf[65536];
      const auto n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ScorerError("scorer process '" + command_.front() + "' closed its output");
      pending_.append(buf, static_cast<std::size_t>(n));
    }
  }

  std::vector<std::string> command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string pending_;
  bool broken_ = false;
  std::mutex mutex_;
};

}  // namespace

Endpoint Endpoint::parse(std::string_view spec) {
  Endpoint e;
  if (spec.starts_with("http://") || spec.starts_with("https://")) {
    e.kind = Kind::http;
    e.url = std::string(spec);
    return e;
  }
  if (spec.starts_with("exec:")) {
    e.kind = Kind::process;
    std::istringstream words{std::string(spec.substr(5))};
    for (std::string w; words >> w;) e.command.push_back(w);
    if (e.command.empty()) throw std::invalid_argument("exec: endpoint has no program");
    return e;
  }
  throw std::invalid_argument("unrecognized scorer endpoint '" + std::string(spec) + "'");
}

std::string Endpoint::describe() const {
  if (kind == Kind::http) return url;
  std::string out = "exec:";
  for (std::size_t i = 0; i < command.size(); ++i) out += (i ? " " : "") + command[i];
  return out;
}

std::unique_ptr<Transport> make_transport(const Endpoint& endpoint) {
  if (endpoint.kind == Endpoint::Kind::http) return std::make_unique<HttpTransport>(endpoint.url, endpoint.timeout);
  return std::make_unique<ProcessTransport>(endpoint.command, endpoint.timeout);
}

nlohmann::json encode_request(std::span<const PreparedItem> batch) {
  auto items = nlohmann::json::array();
  for (const auto& item : batch) {
    items.push_back({{"id", item.id},
                     {"context_text", item.context ? join_tokens(*item.context) : std::string()},
                     {"question", item.question},
                     {"options", item.options},
                     {"context_mode", to_string(item.context_mode)}});
  }
  return {{"batch", std::move(items)}};
}

std::vector<OptionDistribution> decode_response(const nlohmann::json& response, std::span<const PreparedItem> batch,
                                                double tolerance) {
  const auto all_ids = batch_ids(batch);
  if (!response.is_object() || !response.contains("scores") || !response["scores"].is_array()) {
    throw ScorerError("malformed scorer response: expected {\"scores\": [...]}", all_ids);
  }
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < batch.size(); ++i) position.emplace(batch[i].id, i);

  std::vector<std::optional<OptionDistribution>> slots(batch.size());
  std::vector<std::string> denormalized;
  for (const auto& entry : response["scores"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string() || !entry.contains("probs") ||
        !entry["probs"].is_array()) {
      throw ScorerError("malformed scorer response entry: " + entry.dump(), all_ids);
    }
    const auto id = entry["id"].get<std::string>();
    const auto it = position.find(id);
    if (it == position.end()) throw ScorerError("scorer response has unknown id '" + id + "'", {id});
    if (slots[it->second]) throw ScorerError("scorer response repeats id '" + id + "'", {id});
    OptionDistribution dist;
    for (const auto& p : entry["probs"]) {
      if (!p.is_number()) throw ScorerError("scorer response for '" + id + "' has a non-numeric probability", {id});
      dist.probs.push_back(p.get<double>());
    }
    if (dist.probs.size() != batch[it->second].options.size()) {
      throw ScorerError("scorer response for '" + id + "' has " + std::to_string(dist.probs.size()) +
                            " probabilities for " + std::to_string(batch[it->second].options.size()) + " options",
                        {id});
    }
    if (!is_normalized(dist, tolerance)) denormalized.push_back(id);
    slots[it->second] = std::move(dist);
  }
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!slots[i]) missing.push_back(batch[i].id);
  }
  if (!missing.empty()) throw ScorerError("scorer response is missing ids: " + join_ids(missing), missing);
  if (!denormalized.empty()) {
    throw ScorerError("scorer probabilities are not normalized within " + std::to_string(tolerance) +
                          " for ids: " + join_ids(denormalized),
                      denormalized);
  }
  std::vector<OptionDistribution> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

ExternalScorer::ExternalScorer(const Endpoint& endpoint, std::string id)
    : transport_(make_transport(endpoint)), id_(id.empty() ? endpoint.describe() : std::move(id)) {}

ExternalScorer::ExternalScorer(std::shared_ptr<Transport> transport, std::string id)
    : transport_(std::move(transport)), id_(std::move(id)) {
  if (!transport_) throw std::invalid_argument("ExternalScorer: null transport");
}

std::vector<OptionDistribution> ExternalScorer::score(std::span<const PreparedItem> batch) const {
  if (batch.empty()) return {};
  std::string body;
  try {
    body = transport_->round_trip(encode_request(batch).dump());
  } catch (const ScorerError& e) {
    throw ScorerError(std::string(e.what()), batch_ids(batch));
  }
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ScorerError(std::string("scorer response is not JSON: ") + e.what(), batch_ids(batch));
  }
  return decode_response(response, batch);
}

std::vector<OptionDistribution> external_score(const Endpoint& endpoint,
                                               std::span<const std::pair<McqItem, Condition>> batch, int max_len) {
  std::vector<PreparedItem> prepared;
  prepared.reserve(batch.size());
  for (const auto& [item, condition] : batch) prepared.push_back(prepare_item(item, condition, max_len));
  return ExternalScorer(endpoint).score(prepared);
}

}  // namespace compre
