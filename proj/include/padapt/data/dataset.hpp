#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "padapt/core/arrays.hpp"

namespace padapt {

struct DatasetItem {
    SegImage image;
    std::optional<LabelMap> labels;

    friend bool operator==(const DatasetItem&, const DatasetItem&) = default;
};

/// Items plus class names. Target-train splits keep their labels here, but
/// trainers only ever receive an ImageSet (see images_only()).
struct DatasetSplit {
    std::vector<DatasetItem> items;
    std::vector<std::string> class_names;

    std::size_t size() const noexcept { return items.size(); }
    std::size_t num_classes() const noexcept { return class_names.size(); }

    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Labeled pairs handed to trainers (source domain).
struct LabeledSet {
    std::vector<SegImage> images;
    std::vector<LabelMap> labels;
    std::size_t num_classes = 0;

    std::size_t size() const noexcept { return images.size(); }
};

/// Images without labels: the only view of target-train data a trainer gets.
struct ImageSet {
    std::vector<SegImage> images;

    std::size_t size() const noexcept { return images.size(); }
};

/// Throws InvalidArgument if any item lacks labels.
LabeledSet labeled(const DatasetSplit& split);
ImageSet images_only(const DatasetSplit& split);

/// Writes `root/images/<id>.png`, `root/labels/<id>.png` (when present) and `root/meta`.
void export_directory(const DatasetSplit& split, const std::filesystem::path& root);

/// Reads the layout written by export_directory, sorted by id.
/// With require_labels, every image must have a label file.
DatasetSplit ingest_directory(const std::filesystem::path& root, bool require_labels = true,
                              Domain domain = Domain::source);

std::vector<std::string> read_meta(const std::filesystem::path& root);

}  // namespace padapt
