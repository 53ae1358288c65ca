#include <curl/curl.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/core/format.hpp"
#include "curator/core/io.hpp"
#include "curator/image/codec.hpp"
#include "curator/ingest/ingest.hpp"

namespace curator::ingest {

namespace fs = std::filesystem;

namespace {

void ensure_curl_initialised() {
  static std::once_flag once;
  std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

struct EasyHandle {
  EasyHandle() : handle(curl_easy_init()) {
    if (!handle) throw Error("curl_easy_init failed");
  }
  ~EasyHandle() { curl_easy_cleanup(handle); }
  EasyHandle(const EasyHandle&) = delete;
  EasyHandle& operator=(const EasyHandle&) = delete;

  CURL* handle;
};

struct Sink {
  Bytes data;
  std::size_t limit = 0;
  bool overflow = false;
};

std::size_t write_body(char* ptr, std::size_t size, std::size_t count, void* user) {
  auto* sink = static_cast<Sink*>(user);
  const std::size_t n = size * count;
  if (sink->data.size() + n > sink->limit) {
    sink->overflow = true;
    return 0;  // aborts the transfer with CURLE_WRITE_ERROR
  }
  sink->data.insert(sink->data.end(), ptr, ptr + n);
  return n;
}

struct Attempt {
  bool ok = false;
  FetchFailure cause = FetchFailure::http_error;
  std::string detail;
  Bytes body;
};

Attempt transfer_once(CURL* curl, const std::string& url, const FetchOptions& options) {
  Sink sink;
  sink.limit = options.max_bytes;
  curl_easy_reset(curl);
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, &write_body);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &sink);
  curl_easy_setopt(curl, CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_MAXREDIRS, 5L);
  curl_easy_setopt(curl, CURLOPT_PROTOCOLS,
                   static_cast<long>(CURLPROTO_HTTP | CURLPROTO_HTTPS | CURLPROTO_FILE));
  curl_easy_setopt(curl, CURLOPT_REDIR_PROTOCOLS,
                   static_cast<long>(CURLPROTO_HTTP | CURLPROTO_HTTPS));
  curl_easy_setopt(curl, CURLOPT_TIMEOUT_MS,
                   static_cast<long>(std::max(1.0, options.timeout_seconds * 1000.0)));
  curl_easy_setopt(curl, CURLOPT_MAXFILESIZE_LARGE, static_cast<curl_off_t>(options.max_bytes));
  curl_easy_setopt(curl, CURLOPT_USERAGENT, "curator/1.0");

  Attempt attempt;
  const CURLcode code = curl_easy_perform(curl);
  if (sink.overflow || code == CURLE_FILESIZE_EXCEEDED) {
    attempt.cause = FetchFailure::too_large;
    attempt.detail = fmt::format("body exceeds {} bytes", options.max_bytes);
    return attempt;
  }
  switch (code) {
    case CURLE_OK: break;
    case CURLE_COULDNT_RESOLVE_HOST:
    case CURLE_COULDNT_RESOLVE_PROXY:
      attempt.cause = FetchFailure::dns;
      attempt.detail = curl_easy_strerror(code);
      return attempt;
    case CURLE_OPERATION_TIMEDOUT:
      attempt.cause = FetchFailure::timeout;
      attempt.detail = curl_easy_strerror(code);
      return attempt;
    default:
      // Refused connections, TLS failures, unreadable file:// targets: the
      // link is dead at the transport level.
      attempt.cause = FetchFailure::http_error;
      attempt.detail = curl_easy_strerror(code);
      return attempt;
  }

  long status = 0;
  curl_easy_getinfo(curl, CURLINFO_RESPONSE_CODE, &status);
  if (status >= 400 || (status != 0 && status < 200)) {
    attempt.cause = FetchFailure::http_error;
    attempt.detail = fmt::format("HTTP {}", status);
    return attempt;
  }
  if (!image::is_decodable(sink.data)) {
    attempt.cause = FetchFailure::not_an_image;
    attempt.detail = fmt::format("{} bytes do not decode as an image", sink.data.size());
    return attempt;
  }
  attempt.ok = true;
  attempt.body = std::move(sink.data);
  return attempt;
}

}  // namespace

std::string_view to_string(FetchFailure cause) {
  switch (cause) {
    case FetchFailure::dns: return "dns";
    case FetchFailure::timeout: return "timeout";
    case FetchFailure::http_error: return "http_error";
    case FetchFailure::not_an_image: return "not_an_image";
    case FetchFailure::too_large: return "too_large";
  }
  return "unknown";
}

std::size_t FetchReport::total_failed() const {
  std::size_t total = 0;
  for (const auto n : failed_by_cause) total += n;
  return total;
}

double FetchReport::success_rate() const {
  return attempted == 0 ? 0.0 : static_cast<double>(succeeded) / static_cast<double>(attempted);
}

bool FetchReport::consistent() const {
  return succeeded + total_failed() == attempted;
}

std::string render_fetch_report(const FetchReport& report) {
  std::string out = fmt::format("attempted  {:>15}\nsucceeded  {:>15}  ({:.2f}%)\n",
                                with_thousands(report.attempted), with_thousands(report.succeeded),
                                100.0 * report.success_rate());
  for (const auto cause : kAllFetchFailures) {
    out += fmt::format("  {:<12} {:>13}\n", to_string(cause), with_thousands(report.failed(cause)));
  }
  return out;
}

FetchReport fetch_images(Corpus& corpus, const FetchOptions& options) {
  if (options.parallelism == 0) throw PreconditionError("parallelism must be at least 1");
  ensure_curl_initialised();
  const auto started = std::chrono::steady_clock::now();

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].local_path && corpus[i].url) pending.push_back(i);
  }

  FetchReport report;
  report.attempted = pending.size();
  if (!pending.empty()) fs::create_directories(options.image_dir);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> succeeded{0};
  std::array<std::atomic<std::size_t>, kAllFetchFailures.size()> failed{};
  std::mutex commit_mutex;
  std::exception_ptr fatal;

  auto worker = [&] {
    EasyHandle easy;
    for (std::size_t slot = next++; slot < pending.size(); slot = next++) {
      try {
        const std::size_t index = pending[slot];
        const std::string id = corpus[index].id;
        const std::string url = *corpus[index].url;

        Attempt attempt = transfer_once(easy.handle, url, options);
        if (!attempt.ok && attempt.cause == FetchFailure::timeout) {
          attempt = transfer_once(easy.handle, url, options);
        }
        if (attempt.ok) {
          const auto path =
              options.image_dir / fmt::format("{}.{}", id, image::sniff_extension(attempt.body));
          write_file_atomic(path, attempt.body);
          std::lock_guard lock(commit_mutex);
          corpus[index].local_path = path;
          ++succeeded;
        } else {
          ++failed[static_cast<std::size_t>(attempt.cause)];
          std::lock_guard lock(commit_mutex);
          report.failures.push_back({id, attempt.cause, std::move(attempt.detail)});
        }
      } catch (...) {
        // Local I/O failure (disk full, permissions): stop the whole run.
        std::lock_guard lock(commit_mutex);
        if (!fatal) fatal = std::current_exception();
        next = pending.size();
      }
    }
  };

  const std::size_t workers = std::min(options.parallelism, pending.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  report.succeeded = succeeded.load();
  for (std::size_t c = 0; c < failed.size(); ++c) report.failed_by_cause[c] = failed[c].load();
  std::sort(report.failures.begin(), report.failures.end(),
            [](const FailedFetch& a, const FailedFetch& b) { return a.id < b.id; });
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace curator::ingest
