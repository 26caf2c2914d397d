#pragma once
// Experiment tables and qualitative panels from finished arm directories.
//
// An arm directory holds eval/{iou.csv,summary.json}, optionally
// stage2/g2.{padm,json} and manifests/<image_id>.json.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "padapt/acquisition/acquisition.hpp"
#include "padapt/eval/metrics.hpp"

namespace padapt {

struct ArmRow {
    std::string name;
    IouResult result;
};

std::string render_table_text(const std::vector<ArmRow>& rows, const std::vector<std::string>& class_names);
std::string render_table_csv(const std::vector<ArmRow>& rows, const std::vector<std::string>& class_names);

/// Class colors for a label map; IGNORE is black.
Grid3<double> colorize(const LabelMap& labels);
/// Tiles equally sized RGB images left to right with a 2 pixel white gap.
Grid3<double> hstack(const std::vector<Grid3<double>>& tiles);
/// The image with 1 pixel white outlines along the extent of every selected patch.
Grid3<double> draw_patch_overlay(const Grid3<double>& rgb, const PatchGrid& grid, const std::set<int>& selected);

struct ReportOptions {
    std::vector<std::filesystem::path> runs;
    std::filesystem::path out;
    std::filesystem::path val_dir;     // labeled target-val split, for panels
    std::filesystem::path target_dir;  // target-train images, for overlays
    std::size_t max_images = 4;
};

struct ReportResult {
    std::vector<ArmRow> rows;
    std::vector<std::filesystem::path> missing;
    std::vector<std::filesystem::path> files;
};

/// Writes table.txt, table.csv, panels/ and overlays/. Runs without an eval
/// are listed in `missing` and skipped.
ReportResult render_report(const ReportOptions& opts);

}  // namespace padapt
