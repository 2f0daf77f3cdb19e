#include "scepipe/teacher.hpp"

#include "scepipe/eval.hpp"
#include "scepipe/hash.hpp"
#include "scepipe/records.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

namespace scepipe {

namespace {

std::string_view trimView(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t' || text.front() == '\r'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    return text;
}

std::vector<std::string_view> splitLines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        lines.push_back(text.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

constexpr std::string_view kFenceOpen = "===ANNOTATION===";
constexpr std::string_view kFenceClose = "===END===";

} // namespace

TeacherAnnotation parseAnnotations(const std::string& raw, const std::string& clip_id) {
    if (raw.empty()) throw Error(Errc::MissingBlock, clip_id + ": empty response");

    const std::vector<std::string_view> lines = splitLines(raw);
    std::size_t open_index = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trimView(lines[i]) == kFenceOpen) {
            open_index = i;
            break;
        }
    }
    if (open_index == lines.size())
        throw Error(Errc::MissingBlock, clip_id + ": no " + std::string(kFenceOpen) + " fence");

    TeacherAnnotation annotation;
    annotation.clip_id = clip_id;
    annotation.raw_response = raw;

    bool closed = false;
    bool have_caption = false;
    bool have_sce = false;
    std::optional<QaPair> pending;

    for (std::size_t i = open_index + 1; i < lines.size(); ++i) {
        std::string_view line = trimView(lines[i]);
        if (line == kFenceClose) {
            closed = true;
            break;
        }
        if (line.empty()) continue;

        auto fieldValue = [&line](std::string_view prefix) -> std::optional<std::string_view> {
            if (line.substr(0, prefix.size()) != prefix) return std::nullopt;
            return trimView(line.substr(prefix.size()));
        };

        if (auto value = fieldValue("CAPTION:")) {
            if (have_caption)
                throw Error(Errc::BadField, clip_id + ": duplicate CAPTION");
            if (value->empty()) throw Error(Errc::EmptyCaption, clip_id);
            annotation.caption = std::string(*value);
            have_caption = true;
        } else if (auto open_q = fieldValue("Q[open]:")) {
            if (pending) throw Error(Errc::BadField, clip_id + ": question without answer");
            if (open_q->empty()) throw Error(Errc::BadField, clip_id + ": empty Q[open]");
            pending = QaPair{std::string(*open_q), "", QaPair::Kind::Open};
        } else if (auto closed_q = fieldValue("Q[closed]:")) {
            if (pending) throw Error(Errc::BadField, clip_id + ": question without answer");
            if (closed_q->empty()) throw Error(Errc::BadField, clip_id + ": empty Q[closed]");
            pending = QaPair{std::string(*closed_q), "", QaPair::Kind::Closed};
        } else if (auto answer = fieldValue("A:")) {
            if (!pending) throw Error(Errc::BadField, clip_id + ": A without a question");
            if (answer->empty()) throw Error(Errc::BadField, clip_id + ": empty A");
            pending->answer = std::string(*answer);
            if (pending->kind == QaPair::Kind::Closed &&
                tokenize(normalizeAnswer(pending->answer)).size() > 5)
                throw Error(Errc::BadField,
                            clip_id + ": closed answer over 5 tokens: \"" + pending->answer + "\"");
            annotation.qa.push_back(std::move(*pending));
            pending.reset();
        } else if (auto sce = fieldValue("SCE:")) {
            if (have_sce) throw Error(Errc::BadField, clip_id + ": duplicate SCE");
            std::string token(*sce);
            std::transform(token.begin(), token.end(), token.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            annotation.sce_label = parseSceToken(token); // throws UnknownSceLabel
            have_sce = true;
        } else {
            std::string head(line.substr(0, std::min<std::size_t>(line.size(), 32)));
            throw Error(Errc::BadField, clip_id + ": unrecognized line \"" + head + "\"");
        }
    }

    if (!closed)
        throw Error(Errc::MissingBlock, clip_id + ": unterminated annotation block");
    if (!have_caption) throw Error(Errc::EmptyCaption, clip_id + ": missing CAPTION");
    if (pending) throw Error(Errc::BadField, clip_id + ": question without answer");
    if (!have_sce) throw Error(Errc::BadField, clip_id + ": missing SCE");
    return annotation;
}

namespace {

// Telemetry extremes recoverable from the encoded prompt text alone. The
// mock reads the same 2-decimal strings the teacher would see.
struct BundleScan {
    bool has_telemetry = false;
    double max_abs_ax = 0.0;
    std::string max_abs_ax_text = "0.00";
    std::string max_ax_t_rel = "+0.00";
    double max_abs_dalpha = 0.0;
    double max_speed = 0.0;
    bool crash_flag = false;
    bool maneuver_flag = false;
    std::string maneuver_name;
    bool light_flag = false;
};

std::optional<double> parseLeadingDouble(std::string_view text, std::size_t* consumed) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{}) return std::nullopt;
    if (consumed) *consumed = static_cast<std::size_t>(ptr - text.data());
    return value;
}

BundleScan scanBundle(const std::string& flat) {
    BundleScan scan;
    for (std::string_view line : splitLines(flat)) {
        line = trimView(line);
        if (line.rfind("expert flags:", 0) == 0) {
            scan.crash_flag = line.find("crash=yes") != std::string_view::npos;
            scan.light_flag = line.find("traffic_light_violation=yes") != std::string_view::npos;
            std::size_t m = line.find("maneuver=");
            if (m != std::string_view::npos) {
                scan.maneuver_flag = true;
                std::string_view rest = line.substr(m + 9);
                std::size_t end = rest.find(' ');
                scan.maneuver_name = std::string(rest.substr(0, end));
            }
            continue;
        }
        std::size_t a = line.find("a=[");
        if (a == std::string_view::npos) continue;
        std::string_view nums = line.substr(a + 3);
        std::size_t used = 0;
        auto ax = parseLeadingDouble(nums, &used);
        if (!ax) continue;
        const bool first = !scan.has_telemetry;
        scan.has_telemetry = true;
        if (first || std::abs(*ax) > scan.max_abs_ax) { // earliest frame wins ties
            scan.max_abs_ax = std::abs(*ax);
            scan.max_abs_ax_text = std::string(nums.substr(0, used));
            if (line.rfind("t=", 0) == 0) {
                std::string_view t_text = line.substr(2);
                std::size_t s_pos = t_text.find('s');
                scan.max_ax_t_rel = std::string(t_text.substr(0, s_pos));
            }
        }
        std::size_t d = line.find("dA=");
        if (d != std::string_view::npos) {
            if (auto dalpha = parseLeadingDouble(line.substr(d + 3), nullptr))
                scan.max_abs_dalpha = std::max(scan.max_abs_dalpha, std::abs(*dalpha));
        }
        std::size_t v = line.find("v=");
        if (v != std::string_view::npos && (v == 0 || line[v - 1] == ' ')) {
            if (auto speed = parseLeadingDouble(line.substr(v + 2), nullptr))
                scan.max_speed = std::max(scan.max_speed, *speed);
        }
    }
    return scan;
}

std::string format2(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

const char* pick(std::uint64_t h, std::initializer_list<const char*> options) {
    return *(options.begin() + h % options.size());
}

} // namespace

std::string mockTeacher(const PromptBundle& bundle, const MockTeacherConfig& config) {
    const std::string flat = bundle.system_prompt + "\n" + flattenSegments(bundle.user_segments);
    const BundleScan scan = scanBundle(flat);
    const std::uint64_t h = hash64(config.seed, flat);

    // Severity is the stronger of the two cues: thresholds applied to the
    // encoded telemetry values, and the expert flags (crash -> collision,
    // harsh maneuver -> near-collision). A violation flag alone is not an
    // event. Without telemetry only the flags decide.
    SceClass telemetry_label = SceClass::Normal;
    if (scan.has_telemetry) {
        if (scan.max_abs_ax >= config.thresholds.collision_mps2)
            telemetry_label = SceClass::Collision;
        else if (scan.max_abs_ax >= config.thresholds.near_mps2)
            telemetry_label = SceClass::NearCollision;
    }
    SceClass flag_label = SceClass::Normal;
    if (scan.crash_flag) flag_label = SceClass::Collision;
    else if (scan.maneuver_flag) flag_label = SceClass::NearCollision;
    const SceClass label = std::max(telemetry_label, flag_label);

    std::ostringstream caption;
    if (scan.has_telemetry) {
        caption << pick(h, {"The ego vehicle records", "Telemetry shows", "The g-sensor registers"})
                << " a peak longitudinal acceleration of " << scan.max_abs_ax_text
                << " m/s2 at t=" << scan.max_ax_t_rel << "s";
        if (scan.max_speed > 0.0)
            caption << " while traveling up to " << format2(scan.max_speed) << " m/s";
        if (scan.max_abs_dalpha > 0.005)
            caption << ", with a heading change of up to " << format2(scan.max_abs_dalpha)
                    << " degrees per frame";
        caption << ". ";
    } else {
        caption << pick(h, {"No telemetry accompanies this sequence",
                            "The sequence carries no sensor stream"})
                << ". ";
    }
    switch (label) {
        case SceClass::Collision:
            caption << pick(mix64(h + 1),
                            {"A collision with another road user occurs at the event moment.",
                             "The evidence is consistent with a physical impact."});
            if (scan.crash_flag) caption << " The crash detector flag corroborates the impact.";
            break;
        case SceClass::NearCollision:
            caption << pick(mix64(h + 2),
                            {"An emergency maneuver avoids a collision.",
                             "Hard evasive braking prevents an impact."});
            if (scan.maneuver_flag)
                caption << " The maneuver model reports " << scan.maneuver_name << ".";
            break;
        default:
            caption << pick(mix64(h + 3), {"Traffic flows normally with no anomalous maneuver.",
                                           "The drive proceeds without incident."});
            break;
    }

    std::ostringstream out;
    out << "Here is the annotation for the sequence.\n\n";
    out << kFenceOpen << "\n";
    out << "CAPTION: " << caption.str() << "\n";

    const char* label_token = sceToken(label);
    for (int i = 0; i < config.qa_target; ++i) {
        const std::uint64_t hq = mix64(h ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1)));
        if (i % 2 == 0) {
            out << "Q[open]: "
                << pick(hq, {"What happens over the course of this sequence?",
                             "How does the vehicle's motion evolve around the event?",
                             "What should the driver have anticipated here?"})
                << "\n";
            if (scan.has_telemetry)
                out << "A: " << pick(mix64(hq), {"The vehicle's peak acceleration reaches ",
                                                 "The strongest longitudinal reading is "})
                    << scan.max_abs_ax_text << " m/s2, and the sequence is classified as "
                    << label_token << ".\n";
            else
                out << "A: Judging from the frames alone, the sequence is classified as "
                    << label_token << ".\n";
        } else {
            switch (hq % 3) {
                case 0:
                    out << "Q[closed]: Is a collision visible in this sequence?\n";
                    out << "A: " << (label == SceClass::Collision ? "yes" : "no") << "\n";
                    break;
                case 1:
                    out << "Q[closed]: Does the driver brake hard?\n";
                    out << "A: " << (label == SceClass::Normal ? "no" : "yes") << "\n";
                    break;
                default:
                    out << "Q[closed]: How many frames are shown?\n";
                    out << "A: 18\n";
                    break;
            }
        }
    }
    out << "SCE: " << label_token << "\n";
    out << kFenceClose << "\n";
    return out.str();
}

EndpointConfig EndpointConfig::load(const std::string& file) {
    std::vector<Record> records = readRecordsFile(file);
    if (records.size() != 1)
        throw Error(Errc::MalformedRecord, file + ": endpoint config needs exactly one record");
    const Record& record = records.front();
    EndpointConfig config;
    config.base_url = record.get("base_url");
    if (auto path = record.find("path")) config.path = *path;
    if (auto env = record.find("auth_token_env")) config.auth_token_env = *env;
    config.model = record.find("model").value_or("");
    if (record.has("max_retries")) config.max_retries = static_cast<int>(record.getInt("max_retries"));
    if (record.has("timeout_s")) config.timeout_s = record.getDouble("timeout_s");
    if (record.has("concurrency")) config.concurrency = static_cast<int>(record.getInt("concurrency"));
    if (record.has("backoff_base_ms"))
        config.backoff_base_ms = static_cast<int>(record.getInt("backoff_base_ms"));
    return config;
}

std::vector<std::optional<TeacherAnnotation>> runAnnotationBatch(std::span<const ClipJob> jobs,
                                                                 TeacherTransport& transport,
                                                                 const AnnotateOptions& options,
                                                                 RunReport& report) {
    std::vector<std::optional<TeacherAnnotation>> results(jobs.size());
    report.requested = static_cast<int>(jobs.size());

    std::atomic<std::size_t> next{0};
    std::atomic<int> retries{0};
    std::mutex report_mutex;

    auto worker = [&] {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= jobs.size()) return;
            const ClipJob& job = jobs[index];
            int attempt = 0;
            while (true) {
                try {
                    std::string raw =
                        transport.requestAnnotation(job.bundle, job.frame_refs, job.clip_id);
                    results[index] = parseAnnotations(raw, job.clip_id);
                    break;
                } catch (const Error& err) {
                    const bool transient = err.code() == Errc::Timeout ||
                                           err.code() == Errc::RateLimited ||
                                           err.code() == Errc::TransportError;
                    if (transient && attempt < options.max_retries) {
                        double delay_ms =
                            static_cast<double>(options.backoff_base_ms) * std::pow(2.0, attempt);
                        if (const auto* limited = dynamic_cast<const RateLimitedError*>(&err);
                            limited && limited->retryAfterSeconds())
                            delay_ms = std::max(delay_ms, *limited->retryAfterSeconds() * 1000.0);
                        std::this_thread::sleep_for(
                            std::chrono::milliseconds(static_cast<long>(delay_ms)));
                        ++attempt;
                        retries.fetch_add(1);
                        continue;
                    }
                    std::lock_guard<std::mutex> lock(report_mutex);
                    report.failures.emplace_back(job.clip_id, err.what());
                    break;
                }
            }
        }
    };

    const int thread_count = std::max(1, std::min<int>(options.concurrency,
                                                       static_cast<int>(jobs.size())));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(thread_count));
    for (int i = 0; i < thread_count; ++i) threads.emplace_back(worker);
    for (std::thread& thread : threads) thread.join();

    std::sort(report.failures.begin(), report.failures.end());
    report.retries = retries.load();
    for (const auto& result : results)
        result ? ++report.succeeded : ++report.failed;
    return results;
}

} // namespace scepipe
