// Generic HTTP adapter for the teacher endpoint. The wire envelope lives
// entirely in this unit; the rest of the pipeline only sees TeacherTransport.

#include "scepipe/teacher.hpp"

#include <httplib.h>
#include <json.hpp>

#include <charconv>
#include <cstdlib>

namespace scepipe {

namespace {

class HttpTransport : public TeacherTransport {
  public:
    explicit HttpTransport(EndpointConfig config) : config_(std::move(config)) {}

    std::string requestAnnotation(const PromptBundle& bundle,
                                  std::span<const std::string> frame_refs,
                                  const std::string& clip_id) override {
        nlohmann::json parts = nlohmann::json::array();
        for (const PromptSegment& segment : bundle.user_segments) {
            if (const auto* ref = std::get_if<FrameRef>(&segment)) {
                const std::size_t index = static_cast<std::size_t>(ref->k - 1);
                nlohmann::json part;
                part["type"] = "image";
                part["ref"] = index < frame_refs.size() ? frame_refs[index] : "";
                parts.push_back(std::move(part));
            } else {
                nlohmann::json part;
                part["type"] = "text";
                part["text"] = std::get<TextSegment>(segment).content;
                parts.push_back(std::move(part));
            }
        }
        nlohmann::json body;
        body["clip_id"] = clip_id;
        body["model"] = config_.model;
        body["system"] = bundle.system_prompt;
        body["parts"] = std::move(parts);

        httplib::Client client(config_.base_url);
        client.set_connection_timeout(static_cast<time_t>(config_.timeout_s), 0);
        client.set_read_timeout(static_cast<time_t>(config_.timeout_s), 0);

        httplib::Headers headers;
        if (!config_.auth_token_env.empty()) {
            if (const char* token = std::getenv(config_.auth_token_env.c_str()))
                headers.emplace("Authorization", std::string("Bearer ") + token);
        }

        httplib::Result result =
            client.Post(config_.path, headers, body.dump(), "application/json");
        if (!result) {
            const auto err = result.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write)
                throw Error(Errc::Timeout, clip_id + ": " + httplib::to_string(err));
            throw Error(Errc::TransportError, clip_id + ": " + httplib::to_string(err));
        }
        if (result->status == 429) {
            std::optional<double> retry_after;
            if (result->has_header("Retry-After")) {
                const std::string value = result->get_header_value("Retry-After");
                double seconds = 0.0;
                auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seconds);
                if (ec == std::errc{} && ptr == value.data() + value.size())
                    retry_after = seconds;
            }
            throw RateLimitedError(clip_id + ": HTTP 429", retry_after);
        }
        if (result->status >= 500)
            throw Error(Errc::TransportError,
                        clip_id + ": HTTP " + std::to_string(result->status));
        if (result->status != 200)
            throw Error(Errc::TransportError,
                        clip_id + ": unexpected HTTP " + std::to_string(result->status));
        return result->body;
    }

  private:
    EndpointConfig config_;
};

} // namespace

std::unique_ptr<TeacherTransport> makeHttpTransport(const EndpointConfig& config) {
    return std::make_unique<HttpTransport>(config);
}

} // namespace scepipe
