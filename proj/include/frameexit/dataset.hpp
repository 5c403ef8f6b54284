#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace frameexit {

// Video-level label: a single category index or a non-empty set of positive
// category indices. Multi-label positives are kept as a sorted index list;
// the mask is materialized where the category count is known.
struct LabelSpec {
    enum class Kind { Single, Multi };
    Kind kind = Kind::Single;
    int category = 0;                // Single
    std::vector<int> positives;      // Multi, sorted unique, non-empty

    static LabelSpec single(int category);
    static LabelSpec multi(std::vector<int> positives);
    bool is_single() const { return kind == Kind::Single; }
    bool contains(int c) const;

    // manifest grammar: "s:<index>" | "m:<comma-separated indices>"
    std::string to_string() const;
    static LabelSpec parse(const std::string& text);
};

// One video as an ordered list of D-dimensional frame feature vectors (the
// output of the frozen feature extractor) plus its label. Frames are stored
// 0-based, row-major.
struct VideoFeatures {
    std::string video_id;
    int n_frames = 0;
    int dim = 0;
    std::vector<double> data;  // n_frames * dim, row-major
    LabelSpec label;

    std::span<const double> frame(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

struct SyntheticConfig {
    int n_categories = 10;
    int dim = 64;
    int n_frames = 30;
    int n_videos = 6000;                  // total; last n_test held out
    int n_test = 1200;
    double easy_fraction = 0.5;
    int discriminative_frames_hard = 3;   // k informative frames per hard video
    double noise_sigma = 0.3;
    std::uint64_t seed = 1;
};

// Generator-side ground truth, kept beside each synthetic video for
// analysis; never visible to the model.
struct SyntheticMeta {
    bool hard = false;
    int category = 0;
    std::vector<int> informative_positions;  // 0-based, sorted; empty for easy videos
};

struct SyntheticDataset {
    std::vector<VideoFeatures> train;
    std::vector<VideoFeatures> test;
    std::vector<SyntheticMeta> train_meta;
    std::vector<SyntheticMeta> test_meta;
};

// Seeded synthetic features. Per video: category drawn uniformly; easy
// videos get every frame from Gaussian(mu_c, sigma^2 I), hard videos get
// exactly k informative frames at uniform positions and background
// Gaussian(mu_bg, sigma^2 I) elsewhere. Category means are random unit
// vectors derived from the seed. Identical seed, bit-identical output.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg);

// Feature-file format (see README): UTF-8 manifest with one record per line
//   video_id<TAB>n_frames<TAB>dim<TAB>label_spec<TAB>payload_file<TAB>byte_offset
// and a payload of little-endian f64, row-major frame-by-frame, no padding.
// Payload paths are resolved relative to the manifest's directory.
std::vector<VideoFeatures> load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest_path plus payload_file next to it; inverse of load_dataset.
void save_dataset(const std::vector<VideoFeatures>& videos,
                  const std::filesystem::path& manifest_path,
                  const std::string& payload_file);

// Smallest C covering every label index in the collection.
int detect_categories(const std::vector<VideoFeatures>& videos);

}  // namespace frameexit
