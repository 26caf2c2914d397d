#pragma once
// Annotation queue state. The append-only event log is the source of truth:
// the in-memory state is a fold over its lines, rebuilt on every start.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "padapt/acquisition/manifest.hpp"

namespace padapt {

struct LabelEvent {
    std::string request_id;
    int class_id = 0;
    std::string annotator;
    std::string timestamp;  // ISO-8601

    friend bool operator==(const LabelEvent&, const LabelEvent&) = default;
};

std::string event_to_line(const LabelEvent& e);
/// Throws FormatError on malformed JSON or missing fields.
LabelEvent event_from_line(const std::string& line);

struct Progress {
    std::size_t answered = 0;
    std::size_t pending = 0;
    std::size_t total = 0;
};

enum class SubmitStatus { accepted, duplicate, conflict, unknown_request, invalid_class };

struct SubmitResult {
    SubmitStatus status = SubmitStatus::accepted;
    std::optional<LabelEvent> existing;  // the winning event on duplicate / conflict
};

class AnnotationQueue {
public:
    /// Replays `log_path` (created if missing) over the manifests. A line that
    /// does not parse or names an unknown request aborts with FormatError
    /// naming the line number.
    AnnotationQueue(std::vector<Manifest> manifests, std::size_t num_classes, std::filesystem::path log_path);

    /// Pure fold without a backing file (used for replay checks).
    static std::map<std::string, LabelEvent> fold(const std::vector<Manifest>& manifests,
                                                  const std::vector<LabelEvent>& events, std::size_t num_classes);

    std::size_t num_classes() const noexcept { return num_classes_; }
    Progress progress() const;
    /// Highest patch score first; equal scores by request id. Does not mutate.
    std::optional<AnnotationRequest> next_task() const;
    std::optional<AnnotationRequest> find(const std::string& request_id) const;
    std::vector<std::string> pending_ids() const;
    std::map<std::string, LabelEvent> answers() const;

    /// First write wins. Accepted events are appended to the log before the
    /// in-memory state changes.
    SubmitResult submit(const LabelEvent& event);

    /// The input manifests with status / answer filled from the answers.
    std::vector<Manifest> answered_manifests() const;
    void export_answers(const std::filesystem::path& out_dir) const;

    bool has_image(const std::string& image_id) const { return by_image_.count(image_id) != 0; }

private:
    struct Slot {
        std::size_t manifest = 0;
        std::size_t point = 0;
    };
    using PendingKey = std::pair<double, std::string>;  // (-score, request_id)

    void apply(const LabelEvent& e);

    std::vector<Manifest> manifests_;
    std::size_t num_classes_;
    std::filesystem::path log_path_;
    std::ofstream log_;
    std::map<std::string, Slot> index_;
    std::map<std::string, std::size_t> by_image_;
    std::map<std::string, LabelEvent> answers_;
    std::set<PendingKey> pending_;
    mutable std::shared_mutex mu_;
};

/// Answers every pending request from ground truth as annotator "sim-oracle".
/// Returns the number of accepted submissions.
std::size_t run_simulated_oracle(AnnotationQueue& q, const std::map<std::string, LabelMap>& truth);

}  // namespace padapt
