#include "padapt/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"

namespace padapt {

LabeledSet labeled(const DatasetSplit& split) {
    LabeledSet out;
    out.num_classes = split.num_classes();
    for (const auto& item : split.items) {
        if (!item.labels) throw InvalidArgument("labeled(): item '" + item.image.id() + "' has no labels");
        out.images.push_back(item.image);
        out.labels.push_back(*item.labels);
    }
    return out;
}

ImageSet images_only(const DatasetSplit& split) {
    ImageSet out;
    for (const auto& item : split.items) out.images.push_back(item.image);
    return out;
}

void export_directory(const DatasetSplit& split, const std::filesystem::path& root) {
    std::filesystem::create_directories(root / "images");
    std::filesystem::create_directories(root / "labels");
    std::string meta;
    for (const auto& name : split.class_names) meta += name + "\n";
    write_text_atomic(root / "meta", meta);
    for (const auto& item : split.items) {
        write_png_rgb(root / "images" / (item.image.id() + ".png"), item.image.pixels());
        if (item.labels) write_png_gray(root / "labels" / (item.image.id() + ".png"), *item.labels);
    }
}

std::vector<std::string> read_meta(const std::filesystem::path& root) {
    std::ifstream in(root / "meta");
    if (!in) throw IoError("missing meta file in " + root.string());
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    if (names.size() < 2) throw FormatError(root.string() + "/meta: need at least 2 classes");
    return names;
}

namespace {

std::set<std::string> png_ids(const std::filesystem::path& dir) {
    std::set<std::string> ids;
    if (!std::filesystem::exists(dir)) return ids;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") ids.insert(e.path().stem().string());
    }
    return ids;
}

}  // namespace

DatasetSplit ingest_directory(const std::filesystem::path& root, bool require_labels, Domain domain) {
    DatasetSplit split;
    split.class_names = read_meta(root);
    const auto image_ids = png_ids(root / "images");
    const auto label_ids = png_ids(root / "labels");
    for (const auto& id : label_ids) {
        if (!image_ids.count(id)) throw FormatError("ingest: label '" + id + "' has no matching image");
    }
    for (const auto& id : image_ids) {  // std::set iterates sorted
        DatasetItem item{SegImage(id, read_png_rgb(root / "images" / (id + ".png")), domain), std::nullopt};
        if (label_ids.count(id)) {
            auto labels = read_png_gray(root / "labels" / (id + ".png"));
            if (labels.height() != item.image.height() || labels.width() != item.image.width()) {
                throw ShapeError("ingest: label/image size mismatch for '" + id + "'");
            }
            try {
                labels.validate(split.num_classes());
            } catch (const InvalidArgument& e) {
                throw FormatError("ingest: '" + id + "': " + e.what());
            }
            item.labels = std::move(labels);
        } else if (require_labels) {
            throw FormatError("ingest: missing label for '" + id + "'");
        }
        split.items.push_back(std::move(item));
    }
    return split;
}

}  // namespace padapt
