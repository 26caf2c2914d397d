#include "padapt/acquisition/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"

namespace padapt {

using nlohmann::json;

std::size_t Manifest::count_answered() const {
    return std::size_t(std::count_if(points.begin(), points.end(),
                                     [](const AnnotationRequest& r) { return r.status == RequestStatus::answered; }));
}

json manifest_to_json(const Manifest& m) {
    json pts = json::array();
    for (const auto& r : m.points) {
        json p{{"request_id", r.request_id},
               {"x", r.x},
               {"y", r.y},
               {"patch_index", r.patch_index},
               {"status", r.status == RequestStatus::answered ? "answered" : "pending"},
               {"score", r.score}};
        if (r.answer) p["answer"] = int(*r.answer);
        pts.push_back(std::move(p));
    }
    return json{{"image_id", m.image_id},
                {"grid", {{"m", m.grid.grid_m}, {"n", m.grid.grid_n}, {"ph", m.grid.patch_h}, {"pw", m.grid.patch_w}}},
                {"strategy", to_string(m.strategy)},
                {"K", m.k},
                {"points_per_patch", m.points_per_patch},
                {"seed", m.seed},
                {"pseudo_dense", m.pseudo_dense},
                {"selected", std::vector<int>(m.selected.begin(), m.selected.end())},
                {"points", std::move(pts)}};
}

Manifest manifest_from_json(const json& j) {
    try {
        Manifest m;
        m.image_id = j.at("image_id").get<std::string>();
        const auto& g = j.at("grid");
        m.grid.grid_m = g.at("m").get<int>();
        m.grid.grid_n = g.at("n").get<int>();
        m.grid.patch_h = g.at("ph").get<int>();
        m.grid.patch_w = g.at("pw").get<int>();
        m.grid.width = m.grid.grid_m * m.grid.patch_w;
        m.grid.height = m.grid.grid_n * m.grid.patch_h;
        m.grid.validate();
        m.strategy = parse_strategy(j.at("strategy").get<std::string>());
        m.k = j.at("K").get<int>();
        m.points_per_patch = j.value("points_per_patch", 0);
        m.seed = j.value("seed", std::uint64_t{0});
        m.pseudo_dense = j.value("pseudo_dense", true);
        for (int p : j.at("selected").get<std::vector<int>>()) m.selected.insert(p);
        for (const auto& p : j.at("points")) {
            AnnotationRequest r;
            r.request_id = p.at("request_id").get<std::string>();
            r.image_id = m.image_id;
            r.x = p.at("x").get<int>();
            r.y = p.at("y").get<int>();
            r.patch_index = p.at("patch_index").get<int>();
            const auto status = p.at("status").get<std::string>();
            if (status != "pending" && status != "answered") throw FormatError("manifest: bad status '" + status + "'");
            r.status = status == "answered" ? RequestStatus::answered : RequestStatus::pending;
            if (p.contains("answer")) {
                const int a = p.at("answer").get<int>();
                if (a < 0 || a > 254) throw FormatError("manifest: answer out of range");
                r.answer = std::uint8_t(a);
            }
            if ((r.status == RequestStatus::answered) != r.answer.has_value()) {
                throw FormatError("manifest: status and answer disagree for " + r.request_id);
            }
            r.score = p.value("score", 0.0);
            m.points.push_back(std::move(r));
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

void save_manifest(const std::filesystem::path& dir, const Manifest& m) {
    std::filesystem::create_directories(dir);
    write_text_atomic(dir / (m.image_id + ".json"), manifest_to_json(m).dump() + "\n");
}

Manifest load_manifest(const std::filesystem::path& file) {
    const auto bytes = read_file_bytes(file);
    const auto j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw FormatError("manifest: " + file.string() + " is not valid JSON");
    return manifest_from_json(j);
}

std::vector<Manifest> load_manifests(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("manifest directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Manifest> out;
    for (const auto& f : files) out.push_back(load_manifest(f));
    std::sort(out.begin(), out.end(), [](const Manifest& a, const Manifest& b) { return a.image_id < b.image_id; });
    return out;
}

Manifest acquire_image(const std::string& image_id, const EntropyMap& entropy, const AcquisitionConfig& cfg) {
    Manifest m;
    m.image_id = image_id;
    m.grid = PatchGrid::tile(entropy.height(), entropy.width(), cfg.grid_m, cfg.grid_n);
    m.strategy = cfg.strategy;
    m.seed = cfg.seed;
    m.pseudo_dense = cfg.pseudo_dense;
    const auto scores = score_patches(entropy, m.grid);
    switch (cfg.strategy) {
        case Strategy::none:
            m.k = 0;
            m.points_per_patch = cfg.points_per_patch;
            break;
        case Strategy::full:
            m.k = m.grid.count();
            m.points_per_patch = m.grid.area();
            for (int p = 0; p < m.grid.count(); ++p) m.selected.insert(p);
            break;
        case Strategy::active:
        case Strategy::random:
            cfg.validate(m.grid.count());
            m.k = cfg.k;
            m.points_per_patch = cfg.points_per_patch;
            m.selected = cfg.strategy == Strategy::active ? select_top_k(scores, cfg.k)
                                                          : select_random(m.grid.count(), cfg.k, cfg.seed, image_id);
            break;
    }
    m.points = sample_points(image_id, m.selected, m.grid, m.points_per_patch, cfg.seed, &scores);
    return m;
}

std::vector<Manifest> acquire(const std::vector<ExportedMaps>& maps, const AcquisitionConfig& cfg) {
    std::vector<Manifest> out;
    out.reserve(maps.size());
    for (const auto& m : maps) out.push_back(acquire_image(m.image_id, m.entropy, cfg));
    return out;
}

std::vector<Manifest> answer_with_oracle(std::vector<Manifest> manifests, const std::map<std::string, LabelMap>& truth) {
    for (auto& m : manifests) {
        if (m.points.empty()) continue;
        const auto it = truth.find(m.image_id);
        if (it == truth.end()) throw InvalidArgument("oracle: no ground truth for image " + m.image_id);
        std::vector<AnnotationRequest> pending;
        for (const auto& r : m.points)
            if (r.status == RequestStatus::pending) pending.push_back(r);
        const auto answered = simulated_oracle(std::move(pending), it->second);
        std::size_t j = 0;
        for (auto& r : m.points)
            if (r.status == RequestStatus::pending) r = answered[j++];
    }
    return manifests;
}

WeakLabelMap merge_manifest(const Manifest& m, const ProbMap& probs) {
    for (const auto& r : m.points) {
        if (r.status != RequestStatus::answered) {
            throw InvalidArgument("merge: request " + r.request_id + " of image " + m.image_id + " is unanswered");
        }
    }
    MergeOptions opts;
    opts.pseudo_dense = m.pseudo_dense;
    opts.points_per_patch = m.points_per_patch;
    opts.seed = m.seed;
    opts.image_id = m.image_id;
    return merge_labels(probs, m.grid, m.selected, m.points, opts);
}

std::filesystem::path weak_label_path(const std::filesystem::path& dir, const std::string& image_id) {
    return dir / (image_id + ".weak.padm");
}

}  // namespace padapt
