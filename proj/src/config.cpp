#include "frameexit/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "frameexit/eval.hpp"

namespace frameexit {

namespace {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

std::string fmt(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(trim(item)));
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(trim(item)));
    return out;
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw std::invalid_argument("expected true/false, got '" + text + "'");
}

void apply_key(AppConfig& config, const std::string& key, const std::string& value) {
    auto& data = config.data;
    auto& train = config.train;
    if (key == "n_categories") {
        data.n_categories = std::stoi(value);
        train.n_categories = data.n_categories;
    } else if (key == "dim") {
        data.dim = std::stoi(value);
    } else if (key == "n_frames") {
        data.n_frames = std::stoi(value);
    } else if (key == "n_videos") {
        data.n_videos = std::stoi(value);
    } else if (key == "n_test") {
        data.n_test = std::stoi(value);
    } else if (key == "easy_fraction") {
        data.easy_fraction = std::stod(value);
    } else if (key == "hard_informative_frames") {
        data.discriminative_frames_hard = std::stoi(value);
    } else if (key == "noise_sigma") {
        data.noise_sigma = std::stod(value);
    } else if (key == "data_seed") {
        data.seed = std::stoull(value);
    } else if (key == "timesteps") {
        train.timesteps = std::stoi(value);
    } else if (key == "hidden") {
        train.hidden = std::stoi(value);
    } else if (key == "beta") {
        train.beta = std::stod(value);
    } else if (key == "learning_rate") {
        train.learning_rate = std::stod(value);
    } else if (key == "stage1_epochs") {
        train.stage1_epochs = std::stoi(value);
    } else if (key == "stage1_decay_epochs") {
        train.stage1_decay_epochs = parse_int_list(value);
    } else if (key == "stage2_epochs") {
        train.stage2_epochs = std::stoi(value);
    } else if (key == "stage2_decay_epochs") {
        train.stage2_decay_epochs = parse_int_list(value);
    } else if (key == "batch_size") {
        train.batch_size = std::stoi(value);
    } else if (key == "train_seed") {
        train.seed = std::stoull(value);
    } else if (key == "pooling") {
        train.pooling = pool_kind_from_name(value);
    } else if (key == "policy") {
        train.policy.type = policy_type_from_name(value);
    } else if (key == "policy_seed") {
        train.policy.seed = std::stoull(value);
    } else if (key == "loss") {
        train.loss = loss_variant_from_name(value);
    } else if (key == "per_frame") {
        train.per_frame = parse_bool(value);
    } else if (key == "joint") {
        train.joint = parse_bool(value);
    } else if (key == "backbone_flops_per_frame") {
        config.cost.backbone_flops_per_frame = std::stod(value);
    } else if (key == "include_head_gate_cost") {
        config.cost.include_head_gate_cost = parse_bool(value);
    } else if (key == "threshold") {
        config.threshold = std::stod(value);
    } else if (key == "test_policy") {
        config.test_policy = value;
    } else if (key == "test_policy_seed") {
        config.test_policy_seed = std::stoull(value);
    } else if (key == "test_pooling") {
        config.test_pooling = value;
    } else if (key == "betas") {
        config.betas = parse_double_list(value);
    } else {
        throw std::invalid_argument("unknown config key: '" + key + "'");
    }
}

}  // namespace

std::string AppConfig::canonical() const {
    std::ostringstream os;
    os << "n_categories=" << data.n_categories << '\n'
       << "dim=" << data.dim << '\n'
       << "n_frames=" << data.n_frames << '\n'
       << "n_videos=" << data.n_videos << '\n'
       << "n_test=" << data.n_test << '\n'
       << "easy_fraction=" << fmt(data.easy_fraction) << '\n'
       << "hard_informative_frames=" << data.discriminative_frames_hard << '\n'
       << "noise_sigma=" << fmt(data.noise_sigma) << '\n'
       << "data_seed=" << data.seed << '\n'
       << "timesteps=" << train.timesteps << '\n'
       << "hidden=" << train.hidden << '\n'
       << "beta=" << fmt(train.beta) << '\n'
       << "learning_rate=" << fmt(train.learning_rate) << '\n'
       << "stage1_epochs=" << train.stage1_epochs << '\n'
       << "stage2_epochs=" << train.stage2_epochs << '\n'
       << "batch_size=" << train.batch_size << '\n'
       << "train_seed=" << train.seed << '\n'
       << "pooling=" << pool_kind_name(train.pooling) << '\n'
       << "policy=" << policy_type_name(train.policy.type) << '\n'
       << "policy_seed=" << train.policy.seed << '\n'
       << "loss=" << loss_variant_name(train.loss) << '\n'
       << "per_frame=" << (train.per_frame ? "true" : "false") << '\n'
       << "joint=" << (train.joint ? "true" : "false") << '\n'
       << "backbone_flops_per_frame=" << fmt(cost.backbone_flops_per_frame) << '\n'
       << "include_head_gate_cost=" << (cost.include_head_gate_cost ? "true" : "false") << '\n'
       << "threshold=" << fmt(threshold) << '\n'
       << "test_policy=" << test_policy << '\n'
       << "test_policy_seed=" << test_policy_seed << '\n'
       << "test_pooling=" << test_pooling << '\n';
    os << "betas=";
    for (std::size_t i = 0; i < betas.size(); ++i) os << (i ? "," : "") << fmt(betas[i]);
    os << '\n';
    return os.str();
}

std::string AppConfig::fingerprint() const { return fingerprint_hex(canonical()); }

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    AppConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 'key = value'");
        }
        try {
            apply_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

void apply_overrides(AppConfig& config, const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("override must be key=value: '" + item + "'");
        }
        apply_key(config, trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
    }
}

AppConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
    AppConfig config;
    for (const auto& [key, value] : pairs) apply_key(config, key, value);
    return config;
}

}  // namespace frameexit
