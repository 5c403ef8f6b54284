#include "frameexit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "frameexit/bytes.hpp"
#include "frameexit/rng.hpp"

namespace frameexit {

LabelSpec LabelSpec::single(int category) {
    if (category < 0) throw std::invalid_argument("label: negative category");
    LabelSpec label;
    label.kind = Kind::Single;
    label.category = category;
    return label;
}

LabelSpec LabelSpec::multi(std::vector<int> positives) {
    if (positives.empty()) throw std::invalid_argument("label: multi-label needs >= 1 positive");
    std::sort(positives.begin(), positives.end());
    positives.erase(std::unique(positives.begin(), positives.end()), positives.end());
    if (positives.front() < 0) throw std::invalid_argument("label: negative category");
    LabelSpec label;
    label.kind = Kind::Multi;
    label.positives = std::move(positives);
    return label;
}

bool LabelSpec::contains(int c) const {
    if (kind == Kind::Single) return c == category;
    return std::binary_search(positives.begin(), positives.end(), c);
}

std::string LabelSpec::to_string() const {
    if (kind == Kind::Single) return "s:" + std::to_string(category);
    std::string out = "m:";
    for (std::size_t i = 0; i < positives.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(positives[i]);
    }
    return out;
}

LabelSpec LabelSpec::parse(const std::string& text) {
    if (text.size() < 3 || text[1] != ':') {
        throw std::invalid_argument("label: malformed spec '" + text + "'");
    }
    const std::string body = text.substr(2);
    if (text[0] == 's') {
        std::size_t pos = 0;
        const int category = std::stoi(body, &pos);
        if (pos != body.size()) throw std::invalid_argument("label: trailing junk in '" + text + "'");
        return single(category);
    }
    if (text[0] == 'm') {
        std::vector<int> positives;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) throw std::invalid_argument("label: empty index in '" + text + "'");
            positives.push_back(std::stoi(item));
        }
        return multi(std::move(positives));
    }
    throw std::invalid_argument("label: unknown variant '" + text + "'");
}

namespace {

std::vector<double> random_unit_vector(DetRng& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    return v;
}

void validate_config(const SyntheticConfig& cfg) {
    if (cfg.n_categories < 2) throw std::invalid_argument("synthetic: n_categories must be >= 2");
    if (cfg.dim < 1) throw std::invalid_argument("synthetic: dim must be >= 1");
    if (cfg.n_frames < 1) throw std::invalid_argument("synthetic: n_frames must be >= 1");
    if (cfg.n_videos < 1) throw std::invalid_argument("synthetic: n_videos must be >= 1");
    if (cfg.n_test < 0 || cfg.n_test >= cfg.n_videos) {
        throw std::invalid_argument("synthetic: n_test must be in [0, n_videos)");
    }
    if (cfg.easy_fraction < 0.0 || cfg.easy_fraction > 1.0) {
        throw std::invalid_argument("synthetic: easy_fraction must be in [0, 1]");
    }
    if (cfg.discriminative_frames_hard < 1 || cfg.discriminative_frames_hard > cfg.n_frames) {
        throw std::invalid_argument("synthetic: discriminative_frames_hard must be in [1, n_frames]");
    }
    if (!(cfg.noise_sigma > 0.0) || !std::isfinite(cfg.noise_sigma)) {
        throw std::invalid_argument("synthetic: noise_sigma must be positive and finite");
    }
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    validate_config(cfg);
    DetRng rng(cfg.seed);

    // Draw order is fixed: category means, background mean, then per video
    // (category, easy/hard, hard positions, frame noise). Regression tests
    // pin values produced by this exact sequence.
    std::vector<std::vector<double>> means;
    means.reserve(static_cast<std::size_t>(cfg.n_categories));
    for (int c = 0; c < cfg.n_categories; ++c) means.push_back(random_unit_vector(rng, cfg.dim));
    const std::vector<double> background = random_unit_vector(rng, cfg.dim);

    SyntheticDataset out;
    const int n_train = cfg.n_videos - cfg.n_test;
    out.train.reserve(static_cast<std::size_t>(n_train));
    out.test.reserve(static_cast<std::size_t>(cfg.n_test));

    std::vector<int> position_pool(static_cast<std::size_t>(cfg.n_frames));
    for (int v = 0; v < cfg.n_videos; ++v) {
        VideoFeatures video;
        SyntheticMeta meta;
        video.n_frames = cfg.n_frames;
        video.dim = cfg.dim;
        video.data.resize(static_cast<std::size_t>(cfg.n_frames) * static_cast<std::size_t>(cfg.dim));

        const int category = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.n_categories)));
        video.label = LabelSpec::single(category);
        meta.category = category;
        meta.hard = rng.uniform01() >= cfg.easy_fraction;

        std::vector<char> informative(static_cast<std::size_t>(cfg.n_frames), !meta.hard);
        if (meta.hard) {
            // first k of a partial Fisher-Yates over frame positions
            for (int i = 0; i < cfg.n_frames; ++i) position_pool[static_cast<std::size_t>(i)] = i;
            const int k = cfg.discriminative_frames_hard;
            for (int i = 0; i < k; ++i) {
                const auto j = static_cast<std::size_t>(
                    i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.n_frames - i))));
                std::swap(position_pool[static_cast<std::size_t>(i)], position_pool[j]);
            }
            meta.informative_positions.assign(position_pool.begin(), position_pool.begin() + k);
            std::sort(meta.informative_positions.begin(), meta.informative_positions.end());
            for (int p : meta.informative_positions) informative[static_cast<std::size_t>(p)] = 1;
        }

        for (int f = 0; f < cfg.n_frames; ++f) {
            const auto& mean = informative[static_cast<std::size_t>(f)] ? means[static_cast<std::size_t>(category)]
                                                                        : background;
            double* row = video.data.data() + static_cast<std::size_t>(f) * static_cast<std::size_t>(cfg.dim);
            for (int d = 0; d < cfg.dim; ++d) {
                row[d] = mean[static_cast<std::size_t>(d)] + cfg.noise_sigma * rng.normal();
            }
        }

        const bool is_train = v < n_train;
        video.video_id = (is_train ? "train_" : "test_") + std::to_string(is_train ? v : v - n_train);
        if (is_train) {
            out.train.push_back(std::move(video));
            out.train_meta.push_back(std::move(meta));
        } else {
            out.test.push_back(std::move(video));
            out.test_meta.push_back(std::move(meta));
        }
    }
    return out;
}

namespace {

struct ManifestRecord {
    std::string video_id;
    int n_frames = 0;
    int dim = 0;
    LabelSpec label;
    std::string payload_file;
    std::uint64_t byte_offset = 0;
};

ManifestRecord parse_manifest_line(const std::string& line, int line_no) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (fields.size() != 6) {
        throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                 ": expected 6 tab-separated fields, got " +
                                 std::to_string(fields.size()));
    }
    ManifestRecord rec;
    rec.video_id = fields[0];
    try {
        rec.n_frames = std::stoi(fields[1]);
        rec.dim = std::stoi(fields[2]);
        rec.label = LabelSpec::parse(fields[3]);
        rec.payload_file = fields[4];
        rec.byte_offset = std::stoull(fields[5]);
    } catch (const std::exception& e) {
        throw std::runtime_error("manifest line " + std::to_string(line_no) + " (video '" +
                                 rec.video_id + "'): " + e.what());
    }
    if (rec.n_frames < 1 || rec.dim < 1) {
        throw std::runtime_error("manifest line " + std::to_string(line_no) + " (video '" +
                                 rec.video_id + "'): n_frames and dim must be >= 1");
    }
    return rec;
}

}  // namespace

std::vector<VideoFeatures> load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream manifest(manifest_path);
    if (!manifest) {
        throw std::runtime_error("cannot open manifest: " + manifest_path.string());
    }
    const auto base_dir = manifest_path.parent_path();

    std::vector<VideoFeatures> videos;
    std::string line;
    int line_no = 0;
    // payload streams are cached per file so shared payloads open once
    std::string open_name;
    std::ifstream payload;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        const ManifestRecord rec = parse_manifest_line(line, line_no);

        if (rec.payload_file != open_name) {
            payload.close();
            payload.clear();
            payload.open(base_dir / rec.payload_file, std::ios::binary);
            if (!payload) {
                throw std::runtime_error("video '" + rec.video_id + "': cannot open payload file '" +
                                         rec.payload_file + "'");
            }
            open_name = rec.payload_file;
        }

        VideoFeatures video;
        video.video_id = rec.video_id;
        video.n_frames = rec.n_frames;
        video.dim = rec.dim;
        video.label = rec.label;
        const std::size_t count =
            static_cast<std::size_t>(rec.n_frames) * static_cast<std::size_t>(rec.dim);
        video.data.resize(count);
        payload.clear();
        payload.seekg(static_cast<std::streamoff>(rec.byte_offset));
        for (std::size_t i = 0; i < count; ++i) {
            double value = 0.0;
            if (!get_f64_le(payload, value)) {
                throw std::runtime_error("video '" + rec.video_id + "': payload truncated at byte offset " +
                                         std::to_string(rec.byte_offset + i * 8) +
                                         " (header dim/frame count exceeds payload size)");
            }
            if (!std::isfinite(value)) {
                throw std::runtime_error("video '" + rec.video_id + "': non-finite value at byte offset " +
                                         std::to_string(rec.byte_offset + i * 8));
            }
            video.data[i] = value;
        }
        videos.push_back(std::move(video));
    }
    return videos;
}

void save_dataset(const std::vector<VideoFeatures>& videos,
                  const std::filesystem::path& manifest_path,
                  const std::string& payload_file) {
    const auto base_dir = manifest_path.parent_path();
    if (!base_dir.empty()) std::filesystem::create_directories(base_dir);
    std::ofstream payload(base_dir / payload_file, std::ios::binary | std::ios::trunc);
    if (!payload) throw std::runtime_error("cannot write payload: " + (base_dir / payload_file).string());
    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) throw std::runtime_error("cannot write manifest: " + manifest_path.string());

    std::uint64_t offset = 0;
    for (const auto& video : videos) {
        manifest << video.video_id << '\t' << video.n_frames << '\t' << video.dim << '\t'
                 << video.label.to_string() << '\t' << payload_file << '\t' << offset << '\n';
        put_f64_span_le(payload, video.data);
        offset += static_cast<std::uint64_t>(video.data.size()) * 8;
    }
    if (!payload.good() || !manifest.good()) {
        throw std::runtime_error("I/O failure while writing dataset to " + manifest_path.string());
    }
}

int detect_categories(const std::vector<VideoFeatures>& videos) {
    int max_index = -1;
    for (const auto& video : videos) {
        if (video.label.is_single()) {
            max_index = std::max(max_index, video.label.category);
        } else {
            for (int c : video.label.positives) max_index = std::max(max_index, c);
        }
    }
    if (max_index < 0) throw std::invalid_argument("detect_categories: empty collection");
    return max_index + 1;
}

}  // namespace frameexit
