#pragma once
// Per-image annotation manifests (JSON) and the acquire / merge drivers that
// read and write them.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "padapt/acquisition/acquisition.hpp"
#include "padapt/uda/train_uda.hpp"

namespace padapt {

struct Manifest {
    std::string image_id;
    PatchGrid grid;
    Strategy strategy = Strategy::active;
    int k = 0;
    int points_per_patch = 0;
    std::uint64_t seed = 0;
    bool pseudo_dense = true;
    std::set<int> selected;
    std::vector<AnnotationRequest> points;

    std::size_t count_answered() const;
    friend bool operator==(const Manifest&, const Manifest&) = default;
};

nlohmann::json manifest_to_json(const Manifest& m);
/// Throws FormatError on missing or ill-typed fields.
Manifest manifest_from_json(const nlohmann::json& j);

void save_manifest(const std::filesystem::path& dir, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& file);
/// Every `*.json` in dir, sorted by image id.
std::vector<Manifest> load_manifests(const std::filesystem::path& dir);

/// Acquisition for one image from its stage-1 entropy map.
Manifest acquire_image(const std::string& image_id, const EntropyMap& entropy, const AcquisitionConfig& cfg);
std::vector<Manifest> acquire(const std::vector<ExportedMaps>& maps, const AcquisitionConfig& cfg);

/// Answers every pending point of every manifest from `truth` (keyed by image id).
std::vector<Manifest> answer_with_oracle(std::vector<Manifest> manifests, const std::map<std::string, LabelMap>& truth);

/// Throws InvalidArgument if any request is still pending.
WeakLabelMap merge_manifest(const Manifest& m, const ProbMap& probs);

/// `<dir>/<image_id>.weak.padm`
std::filesystem::path weak_label_path(const std::filesystem::path& dir, const std::string& image_id);

}  // namespace padapt
