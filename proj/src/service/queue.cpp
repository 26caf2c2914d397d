#include "padapt/service/queue.hpp"

#include <nlohmann/json.hpp>

#include <mutex>

#include "padapt/core/errors.hpp"
#include "padapt/core/util.hpp"

namespace padapt {

using nlohmann::json;

std::string event_to_line(const LabelEvent& e) {
    return json{{"request_id", e.request_id}, {"class_id", e.class_id}, {"annotator", e.annotator}, {"timestamp", e.timestamp}}
        .dump();
}

LabelEvent event_from_line(const std::string& line) {
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError("not a JSON object");
    try {
        LabelEvent e;
        e.request_id = j.at("request_id").get<std::string>();
        e.class_id = j.at("class_id").get<int>();
        e.annotator = j.at("annotator").get<std::string>();
        e.timestamp = j.at("timestamp").get<std::string>();
        return e;
    } catch (const json::exception& ex) {
        throw FormatError(ex.what());
    }
}

AnnotationQueue::AnnotationQueue(std::vector<Manifest> manifests, std::size_t num_classes, std::filesystem::path log_path)
    : manifests_(std::move(manifests)), num_classes_(num_classes), log_path_(std::move(log_path)) {
    for (std::size_t m = 0; m < manifests_.size(); ++m) {
        by_image_[manifests_[m].image_id] = m;
        for (std::size_t p = 0; p < manifests_[m].points.size(); ++p) {
            auto& r = manifests_[m].points[p];
            // State comes from the log alone.
            r.status = RequestStatus::pending;
            r.answer.reset();
            if (!index_.emplace(r.request_id, Slot{m, p}).second) {
                throw InvalidArgument("annotation queue: duplicate request id " + r.request_id);
            }
            pending_.insert({-r.score, r.request_id});
        }
    }
    if (log_path_.empty()) return;
    if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
    {
        std::ifstream in(log_path_);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto fail = [&](const std::string& why) {
                throw FormatError(log_path_.string() + " line " + std::to_string(lineno) + ": " + why);
            };
            LabelEvent e;
            try {
                e = event_from_line(line);
            } catch (const FormatError& ex) {
                fail(ex.what());
            }
            if (!index_.count(e.request_id)) fail("unknown request " + e.request_id);
            if (e.class_id < 0 || std::size_t(e.class_id) >= num_classes_) fail("class id out of range");
            const auto it = answers_.find(e.request_id);
            if (it != answers_.end()) {
                if (it->second.class_id != e.class_id) fail("conflicting answer for " + e.request_id);
                continue;
            }
            apply(e);
        }
    }
    log_.open(log_path_, std::ios::app);
    if (!log_) throw IoError("cannot open event log " + log_path_.string());
}

std::map<std::string, LabelEvent> AnnotationQueue::fold(const std::vector<Manifest>& manifests,
                                                        const std::vector<LabelEvent>& events, std::size_t num_classes) {
    std::set<std::string> known;
    for (const auto& m : manifests)
        for (const auto& r : m.points) known.insert(r.request_id);
    std::map<std::string, LabelEvent> out;
    for (const auto& e : events) {
        if (!known.count(e.request_id) || e.class_id < 0 || std::size_t(e.class_id) >= num_classes) continue;
        out.emplace(e.request_id, e);
    }
    return out;
}

void AnnotationQueue::apply(const LabelEvent& e) {
    const Slot s = index_.at(e.request_id);
    auto& r = manifests_[s.manifest].points[s.point];
    pending_.erase({-r.score, r.request_id});
    r.status = RequestStatus::answered;
    r.answer = std::uint8_t(e.class_id);
    answers_.emplace(e.request_id, e);
}

Progress AnnotationQueue::progress() const {
    std::shared_lock lock(mu_);
    return {answers_.size(), pending_.size(), index_.size()};
}

std::optional<AnnotationRequest> AnnotationQueue::next_task() const {
    std::shared_lock lock(mu_);
    if (pending_.empty()) return std::nullopt;
    const Slot s = index_.at(pending_.begin()->second);
    return manifests_[s.manifest].points[s.point];
}

std::optional<AnnotationRequest> AnnotationQueue::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return manifests_[it->second.manifest].points[it->second.point];
}

std::vector<std::string> AnnotationQueue::pending_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [score, id] : pending_) out.push_back(id);
    return out;
}

std::map<std::string, LabelEvent> AnnotationQueue::answers() const {
    std::shared_lock lock(mu_);
    return answers_;
}

SubmitResult AnnotationQueue::submit(const LabelEvent& event) {
    std::unique_lock lock(mu_);
    if (!index_.count(event.request_id)) return {SubmitStatus::unknown_request, std::nullopt};
    if (event.class_id < 0 || std::size_t(event.class_id) >= num_classes_) return {SubmitStatus::invalid_class, std::nullopt};
    const auto it = answers_.find(event.request_id);
    if (it != answers_.end()) {
        return {it->second.class_id == event.class_id ? SubmitStatus::duplicate : SubmitStatus::conflict, it->second};
    }
    if (log_.is_open()) {
        log_ << event_to_line(event) << '\n';
        log_.flush();
        if (!log_) throw IoError("failed to append to " + log_path_.string());
    }
    apply(event);
    return {SubmitStatus::accepted, std::nullopt};
}

std::vector<Manifest> AnnotationQueue::answered_manifests() const {
    std::shared_lock lock(mu_);
    return manifests_;
}

void AnnotationQueue::export_answers(const std::filesystem::path& out_dir) const {
    for (const auto& m : answered_manifests()) save_manifest(out_dir, m);
}

std::size_t run_simulated_oracle(AnnotationQueue& q, const std::map<std::string, LabelMap>& truth) {
    std::size_t accepted = 0;
    for (const auto& id : q.pending_ids()) {
        const auto r = q.find(id);
        if (!r || r->status != RequestStatus::pending) continue;
        const auto it = truth.find(r->image_id);
        if (it == truth.end()) throw InvalidArgument("oracle: no ground truth for image " + r->image_id);
        const auto answered = simulated_oracle({*r}, it->second);
        const auto res = q.submit({id, int(*answered.front().answer), "sim-oracle", iso8601_now()});
        accepted += res.status == SubmitStatus::accepted;
    }
    return accepted;
}

}  // namespace padapt
