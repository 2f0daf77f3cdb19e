#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scepipe/error.hpp"
#include "scepipe/prompt.hpp"
#include "scepipe/semantic.hpp"

namespace scepipe {

struct QaPair {
    std::string question;
    std::string answer;
    enum class Kind { Open, Closed } kind = Kind::Open;
};

/// Parsed teacher output for one clip. raw_response is kept verbatim for
/// audit.
struct TeacherAnnotation {
    std::string clip_id;
    std::string caption;
    std::vector<QaPair> qa;
    SceClass sce_label = SceClass::Normal;
    std::string raw_response;
};

/// Strict parse of the fenced response grammar:
///
///   ===ANNOTATION===
///   CAPTION: <one line>
///   Q[open]: <text>
///   A: <text>
///   Q[closed]: <text>
///   A: <text>
///   SCE: <normal|near-collision|collision>
///   ===END===
///
/// Text outside the fence is ignored (chatty preambles are fine); inside it
/// every non-blank line must match the grammar. Total: any input yields a
/// TeacherAnnotation or a typed Error — never a crash.
TeacherAnnotation parseAnnotations(const std::string& raw, const std::string& clip_id);

/// Deterministic stand-in for the remote teacher: synthesizes a
/// grammar-conformant response from the bundle bytes alone. The caption
/// quotes the telemetry extremes encoded in the prompt and the label applies
/// the heuristic thresholds to them; without telemetry the label comes from
/// the semantic header flags.
struct MockTeacherConfig {
    std::uint64_t seed = 0;
    int qa_target = 10;
    SceThresholds thresholds;
};

std::string mockTeacher(const PromptBundle& bundle, const MockTeacherConfig& config);

/// Transport behind the annotation step. Implementations throw Error with
/// Errc::Timeout / Errc::RateLimited / Errc::TransportError.
class TeacherTransport {
  public:
    virtual ~TeacherTransport() = default;
    virtual std::string requestAnnotation(const PromptBundle& bundle,
                                          std::span<const std::string> frame_refs,
                                          const std::string& clip_id) = 0;
};

class MockTransport : public TeacherTransport {
  public:
    explicit MockTransport(MockTeacherConfig config) : config_(config) {}
    std::string requestAnnotation(const PromptBundle& bundle, std::span<const std::string>,
                                  const std::string&) override {
        return mockTeacher(bundle, config_);
    }

  private:
    MockTeacherConfig config_;
};

/// RateLimited errors may carry the server's Retry-After hint.
class RateLimitedError : public Error {
  public:
    explicit RateLimitedError(const std::string& message, std::optional<double> retry_after_s = {})
        : Error(Errc::RateLimited, message), retry_after_s_(retry_after_s) {}
    std::optional<double> retryAfterSeconds() const { return retry_after_s_; }

  private:
    std::optional<double> retry_after_s_;
};

/// Remote endpoint knobs; loaded from a single-record file. The auth token
/// is read from the named environment variable, never stored on disk.
struct EndpointConfig {
    std::string base_url;
    std::string path = "/annotate";
    std::string auth_token_env = "SCEPIPE_TEACHER_TOKEN";
    std::string model;
    int max_retries = 3;
    double timeout_s = 120.0;
    int concurrency = 4;
    int backoff_base_ms = 500;

    static EndpointConfig load(const std::string& file);
};

/// Generic HTTP adapter: POSTs the flattened bundle as JSON and expects the
/// raw annotation text back. Vendor-specific envelopes stay isolated here.
std::unique_ptr<TeacherTransport> makeHttpTransport(const EndpointConfig& config);

struct ClipJob {
    std::string clip_id;
    PromptBundle bundle;
    std::vector<std::string> frame_refs;
};

struct RunReport {
    int requested = 0;
    int succeeded = 0;
    int failed = 0;
    int retries = 0;
    std::vector<std::pair<std::string, std::string>> failures; // clip_id -> error
};

struct AnnotateOptions {
    int max_retries = 3;
    int concurrency = 4;
    int backoff_base_ms = 500;
};

/// Runs the batch with at most `concurrency` requests in flight, retrying
/// transient transport failures with exponential backoff (Retry-After wins
/// when longer). Results keep the job order regardless of completion order;
/// failed clips leave a nullopt slot and an entry in the report.
std::vector<std::optional<TeacherAnnotation>> runAnnotationBatch(std::span<const ClipJob> jobs,
                                                                 TeacherTransport& transport,
                                                                 const AnnotateOptions& options,
                                                                 RunReport& report);

} // namespace scepipe
