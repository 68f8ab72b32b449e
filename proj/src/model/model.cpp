// Copyright 2026 The capsyolo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "model/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ad/ops.hpp"
#include "common/errors.hpp"
#include "common/rng.hpp"

namespace capsyolo::model {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'A', 'P', 'S', 'Y', 'O', 'L', 'O'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '!'};

std::size_t conv_out(std::size_t in)
{
    // 3x3 kernel, stride 2, padding 1.
    return (in + 2 - 3) / 2 + 1;
}

std::vector<std::size_t> parse_list(const std::string& s)
{
    std::vector<std::size_t> out;
    for (const auto& part : split(s, ',')) {
        auto t = trim(part);
        if (t.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(t)));
    }
    return out;
}

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0)
{
    const double sd = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = rng.normal() * sd;
    return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

void ModelConfig::validate() const
{
    if (class_names.empty()) throw ConfigError("model needs at least one class");
    if (image_channels == 0 || image_size < 8) throw ConfigError("model image size must be at least 8");
    if (conv1_channels == 0 || conv2_channels == 0 || primary_types == 0 || primary_dim == 0 || class_dim == 0) {
        throw ConfigError("model layer widths must be positive");
    }
    if (routing_iterations < 1) throw ConfigError("routing_iterations must be >= 1");
    if (head_hidden == 0) throw ConfigError("head_hidden must be positive");
    for (auto h : decoder_hidden) {
        if (h == 0) throw ConfigError("decoder hidden widths must be positive");
    }
    grid().validate();
}

void ModelConfig::apply(const KvConfig& cfg)
{
    auto sz = [&](const char* key, std::size_t& field) {
        auto v = cfg.get_int(key, static_cast<std::int64_t>(field));
        if (v <= 0) throw ConfigError(std::string(key) + " must be positive");
        field = static_cast<std::size_t>(v);
    };
    sz("model.conv1_channels", conv1_channels);
    sz("model.conv2_channels", conv2_channels);
    sz("model.primary_types", primary_types);
    sz("model.primary_dim", primary_dim);
    sz("model.class_dim", class_dim);
    sz("model.routing_iterations", routing_iterations);
    sz("model.grid_cells", grid_cells);
    sz("model.boxes_per_cell", boxes_per_cell);
    sz("model.head_hidden", head_hidden);
    if (auto v = cfg.get("model.decoder_hidden")) decoder_hidden = parse_list(*v);
    init_seed = static_cast<std::uint64_t>(cfg.get_int("model.init_seed", static_cast<std::int64_t>(init_seed)));
}

std::string to_json(const ModelConfig& c)
{
    json j;
    j["image_channels"] = c.image_channels;
    j["image_size"] = c.image_size;
    j["conv1_channels"] = c.conv1_channels;
    j["conv2_channels"] = c.conv2_channels;
    j["primary_types"] = c.primary_types;
    j["primary_dim"] = c.primary_dim;
    j["class_dim"] = c.class_dim;
    j["routing_iterations"] = c.routing_iterations;
    j["grid_cells"] = c.grid_cells;
    j["boxes_per_cell"] = c.boxes_per_cell;
    j["head_hidden"] = c.head_hidden;
    j["decoder_hidden"] = c.decoder_hidden;
    j["class_names"] = c.class_names;
    j["init_seed"] = c.init_seed;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text)
{
    try {
        auto j = json::parse(text);
        ModelConfig c;
        c.image_channels = j.at("image_channels");
        c.image_size = j.at("image_size");
        c.conv1_channels = j.at("conv1_channels");
        c.conv2_channels = j.at("conv2_channels");
        c.primary_types = j.at("primary_types");
        c.primary_dim = j.at("primary_dim");
        c.class_dim = j.at("class_dim");
        c.routing_iterations = j.at("routing_iterations");
        c.grid_cells = j.at("grid_cells");
        c.boxes_per_cell = j.at("boxes_per_cell");
        c.head_hidden = j.at("head_hidden");
        c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
        c.class_names = j.at("class_names").get<std::vector<std::string>>();
        c.init_seed = j.at("init_seed");
        return c;
    } catch (const json::exception& e) {
        throw IoError(std::string("model config echo is malformed: ") + e.what());
    }
}

CapsYoloModel::CapsYoloModel(ModelConfig config) : config_(std::move(config))
{
    config_.validate();
    build();
}

void CapsYoloModel::build()
{
    const auto& c = config_;
    Rng rng(c.init_seed);
    const std::size_t k = c.num_classes();
    const std::size_t h1 = conv_out(c.image_size), h2 = conv_out(h1), h3 = conv_out(h2);
    const std::size_t n_low = c.primary_types * h3 * h3;
    const std::size_t s = c.grid_cells;
    const std::size_t fused = c.conv2_channels * s * s + k * c.class_dim;
    const std::size_t head_out = s * s * c.grid().cell_width();

    params_.clear();
    auto add = [&](std::string name, Tensor t) { params_.push_back({std::move(name), std::move(t)}); };
    add("conv1.w", he_normal({c.conv1_channels, c.image_channels, 3, 3}, c.image_channels * 9, rng));
    add("conv1.b", Tensor::zeros({c.conv1_channels}, true));
    add("conv2.w", he_normal({c.conv2_channels, c.conv1_channels, 3, 3}, c.conv1_channels * 9, rng));
    add("conv2.b", Tensor::zeros({c.conv2_channels}, true));
    const std::size_t pch = c.primary_types * c.primary_dim;
    add("primary.w", he_normal({pch, c.conv2_channels, 3, 3}, c.conv2_channels * 9, rng));
    add("primary.b", Tensor::zeros({pch}, true));
    // Kept small: large predictions saturate squash and stall early routing.
    {
        const double sd = 0.5 / std::sqrt(static_cast<double>(c.primary_dim));
        std::vector<double> v(n_low * k * c.class_dim * c.primary_dim);
        for (auto& x : v) x = rng.normal() * sd;
        add("caps.w", Tensor({n_low, k, c.class_dim, c.primary_dim}, std::move(v), true));
    }
    add("head.fc1.w", he_normal({c.head_hidden, fused}, fused, rng));
    add("head.fc1.b", Tensor::zeros({c.head_hidden}, true));
    add("head.fc2.w", he_normal({head_out, c.head_hidden}, c.head_hidden, rng, 0.5));
    add("head.fc2.b", Tensor::zeros({head_out}, true));

    decoder_ = capsnet::make_decoder(k, c.class_dim, c.decoder_hidden, c.image_shape(), rng);
    for (std::size_t l = 0; l < decoder_.layers.size(); ++l) {
        add("decoder." + std::to_string(l) + ".w", decoder_.layers[l].weights);
        add("decoder." + std::to_string(l) + ".b", decoder_.layers[l].bias);
    }
}

Tensor& CapsYoloModel::p(const std::string& name)
{
    for (auto& np : params_) {
        if (np.name == name) return np.value;
    }
    throw ContractError("no parameter named " + name);
}

const Tensor& CapsYoloModel::parameter(const std::string& name) const
{
    for (const auto& np : params_) {
        if (np.name == name) return np.value;
    }
    throw ContractError("no parameter named " + name);
}

std::size_t CapsYoloModel::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& np : params_) n += np.value.numel();
    return n;
}

void CapsYoloModel::zero_grad()
{
    for (auto& np : params_) np.value.zero_grad();
}

ForwardResult CapsYoloModel::forward(const Tensor& image, std::optional<std::size_t> reconstruct_class) const
{
    if (image.shape() != config_.image_shape()) {
        throw DimensionError("model expects image " + ad::shape_str(config_.image_shape()) + ", got " +
                             ad::shape_str(image.shape()));
    }
    ForwardResult r;
    Tensor x = ad::relu(ad::add_channel_bias(ad::conv2d(image, p("conv1.w"), 2, 1), p("conv1.b")));
    x = ad::relu(ad::add_channel_bias(ad::conv2d(x, p("conv2.w"), 2, 1), p("conv2.b")));
    r.features = x;

    Tensor prim = ad::add_channel_bias(ad::conv2d(x, p("primary.w"), 2, 1), p("primary.b"));
    r.primary = capsnet::primary_capsules(prim, config_.primary_dim);
    r.capsules = capsnet::class_capsules_state(r.primary, p("caps.w"), config_.routing_iterations);
    r.class_poses = r.capsules.higher_poses;
    r.class_norms = ad::norm_last(r.class_poses, capsnet::kSquashEps);

    const auto grid = config_.grid();
    Tensor pooled = ad::flatten(ad::adaptive_avg_pool2d(x, grid.cells, grid.cells));
    Tensor fused = ad::concat({pooled, ad::flatten(r.class_poses)});
    Tensor h = ad::relu(ad::dense(fused, p("head.fc1.w"), p("head.fc1.b")));
    Tensor raw = ad::reshape(ad::dense(h, p("head.fc2.w"), p("head.fc2.b")), grid.shape());
    r.head = yolo::activate(raw, grid);

    if (reconstruct_class) r.reconstruction = capsnet::reconstruct(r.class_poses, *reconstruct_class, decoder_);
    return r;
}

CapsYoloModel CapsYoloModel::clone() const
{
    CapsYoloModel copy(config_);
    copy.copy_values_from(*this);
    return copy;
}

void CapsYoloModel::copy_values_from(const CapsYoloModel& other)
{
    if (other.params_.size() != params_.size()) throw ContractError("copy_values_from: architecture mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& src = other.params_[i].value;
        auto& dst = params_[i].value;
        if (src.shape() != dst.shape() || other.params_[i].name != params_[i].name) {
            throw ContractError("copy_values_from: parameter " + params_[i].name + " differs");
        }
        auto s = src.data();
        std::copy(s.begin(), s.end(), dst.mutable_data().begin());
    }
}

std::string CapsYoloModel::version_id() const
{
    // FNV-1a over the config echo and raw parameter bytes.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* data, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    const std::string cfg = to_json(config_);
    mix(cfg.data(), cfg.size());
    for (const auto& np : params_) {
        auto d = np.value.data();
        mix(d.data(), d.size() * sizeof(double));
    }
    std::ostringstream os;
    os << 'v' << kModelFormatVersion << '-' << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

namespace {

static_assert(std::endian::native == std::endian::little, "model files are written little-endian");

template <typename T>
void put(std::ostream& os, T v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("model file " + path + " is truncated");
    return v;
}

std::string get_string(std::istream& is, std::size_t n, const std::string& path)
{
    if (n > (1u << 26)) throw IoError("model file " + path + " is corrupt (oversized string)");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw IoError("model file " + path + " is truncated");
    return s;
}

}  // namespace

void CapsYoloModel::save(const std::string& path) const
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write model file " + path);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kModelFormatVersion);
    const std::string cfg = to_json(config_);
    put<std::uint64_t>(os, cfg.size());
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params_.size()));
    for (const auto& np : params_) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(np.name.size()));
        os.write(np.name.data(), static_cast<std::streamsize>(np.name.size()));
        const auto& shape = np.value.shape();
        put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) put<std::uint64_t>(os, d);
        auto d = np.value.data();
        os.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    os.write(kTrailer, sizeof(kTrailer));
    if (!os) throw IoError("failed while writing model file " + path);
}

CapsYoloModel CapsYoloModel::load(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open model file " + path);
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError(path + " is not a model file");
    const auto version = get<std::uint32_t>(is, path);
    if (version != kModelFormatVersion) {
        throw IoError("model file " + path + " has format version " + std::to_string(version) + ", expected " +
                      std::to_string(kModelFormatVersion));
    }
    const auto cfg_len = get<std::uint64_t>(is, path);
    ModelConfig cfg = model_config_from_json(get_string(is, cfg_len, path));
    std::optional<CapsYoloModel> built;
    try {
        built.emplace(cfg);
    } catch (const ConfigError& e) {
        throw IoError("model file " + path + " carries an invalid config: " + e.what());
    }
    CapsYoloModel& m = *built;

    const auto count = get<std::uint32_t>(is, path);
    if (count != m.params_.size()) throw IoError("model file " + path + " has an unexpected parameter count");
    for (auto& np : m.params_) {
        const auto name = get_string(is, get<std::uint32_t>(is, path), path);
        if (name != np.name) throw IoError("model file " + path + ": expected parameter " + np.name + ", found " + name);
        const auto rank = get<std::uint32_t>(is, path);
        if (rank != np.value.shape().size()) throw IoError("model file " + path + ": rank mismatch for " + name);
        Shape shape(rank);
        for (auto& d : shape) d = get<std::uint64_t>(is, path);
        if (shape != np.value.shape()) throw IoError("model file " + path + ": shape mismatch for " + name);
        auto dst = np.value.mutable_data();
        is.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(double)));
        if (!is) throw IoError("model file " + path + " is truncated");
    }
    char trailer[sizeof(kTrailer)];
    is.read(trailer, sizeof(trailer));
    if (!is || std::memcmp(trailer, kTrailer, sizeof(kTrailer)) != 0) {
        throw IoError("model file " + path + " is truncated");
    }
    return std::move(m);
}

}  // namespace capsyolo::model
