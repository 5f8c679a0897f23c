// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/model.hpp"

#include "fgs/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fgs {

namespace {

constexpr char kMagic[4]        = {'F', '3', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;

enum class MaskState : std::uint8_t { None = 0, Real = 1, Packed = 2 };

class Writer {
  public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) {
            out_.push_back(static_cast<std::uint8_t>(v >> s));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    template <typename Array>
    void floats(const Array &a) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            f32(a.data()[i]);
        }
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

  private:
    std::vector<std::uint8_t> out_;
};

class Reader {
  public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int s = 0; s < 4; ++s) {
            v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * s);
        }
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::vector<std::uint8_t> bytes(size_t n) {
        need(n);
        std::vector<std::uint8_t> out(in_.begin() + pos_, in_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }
    template <typename Array>
    void floats(Array &a) {
        need(static_cast<size_t>(a.size()) * 4);
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            a.data()[i] = f32();
        }
    }
    bool done() const { return pos_ == in_.size(); }

  private:
    void need(size_t n) const {
        if (in_.size() - pos_ < n) {
            throw DataError("model file is truncated");
        }
    }
    std::span<const std::uint8_t> in_;
    size_t pos_ = 0;
};

MaskState mask_state(const Model &m) {
    if (m.masks.empty()) {
        return MaskState::None;
    }
    return m.masks.front().is_frozen() ? MaskState::Packed : MaskState::Real;
}

template <typename Block>
std::int64_t coordinate_scalars(const Block &b) {
    std::int64_t n = 0;
    b.for_each_array([&](std::string_view, ArrayRole role, const auto &a) {
        if (role == ArrayRole::Coordinate) {
            n += a.size();
        }
    });
    return n;
}

template <typename Block>
std::int64_t factor_scalars(const Block &b) {
    std::int64_t n = 0;
    b.for_each_array([&](std::string_view, ArrayRole, const auto &a) { n += a.size(); });
    return n;
}

int mask_terms(const Model &m) { return m.scheme == Scheme::VM ? vm_term_count(m.vm_mode) : 1; }

} // namespace

std::int64_t Model::block_count() const {
    return scheme == Scheme::CP ? static_cast<std::int64_t>(cp_blocks.size())
                                : static_cast<std::int64_t>(vm_blocks.size());
}

int Model::block_resolution(std::int64_t b) const {
    return scheme == Scheme::CP ? cp_blocks.at(b).resolution() : vm_blocks.at(b).resolution();
}

std::int64_t Model::representable_gaussians() const {
    std::int64_t total = 0;
    for (const auto &b : cp_blocks) {
        total += b.gaussian_count();
    }
    for (const auto &b : vm_blocks) {
        total += b.gaussian_count(vm_mode);
    }
    return total;
}

void Model::validate() const {
    if (feature_dim < 1) {
        throw ShapeError("feature width must be >= 1");
    }
    if (scheme == Scheme::CP && !vm_blocks.empty()) {
        throw ShapeError("CP model holds VM blocks");
    }
    if (scheme == Scheme::VM && !cp_blocks.empty()) {
        throw ShapeError("VM model holds CP blocks");
    }
    for (const auto &b : cp_blocks) {
        b.validate();
        if (b.feature_dim() != feature_dim) {
            throw ShapeError("block feature width differs from the model");
        }
    }
    for (const auto &b : vm_blocks) {
        b.validate();
        if (b.feature_dim() != feature_dim) {
            throw ShapeError("block feature width differs from the model");
        }
    }
    if (!decoder.layers.empty()) {
        decoder.validate();
        if (decoder.input_dim() != feature_dim) {
            throw ShapeError("decoder input width differs from the feature width");
        }
    }
    if (!masks.empty()) {
        if (static_cast<std::int64_t>(masks.size()) != block_count()) {
            throw ShapeError("mask count differs from block count");
        }
        const bool frozen = masks.front().is_frozen();
        for (std::int64_t b = 0; b < block_count(); ++b) {
            const BlockMask &mk = masks[b];
            if (mk.resolution() != block_resolution(b) || mk.terms() != mask_terms(*this) ||
                mk.is_frozen() != frozen) {
                throw ShapeError("mask shape or state does not match its block");
            }
        }
    }
}

ExpandedGaussians<float> Model::expand_decoded() const {
    if (decoder.layers.empty()) {
        throw ShapeError("model has no decoder");
    }
    ExpandedGaussians<float> g = scheme == Scheme::CP
                                     ? expand_multi_set<float>(std::span<const FactorSetCP<float>>(cp_blocks))
                                     : expand_multi_set<float>(std::span<const FactorSetVM<float>>(vm_blocks), vm_mode);
    DecodeOutput<float> out = decode(g.features, decoder);
    g.sh                    = std::move(out.sh);
    g.opacity               = std::move(out.opacity);
    return g;
}

ExpandedGaussians<float> Model::materialize(bool prune_masked) const {
    ExpandedGaussians<float> g = expand_decoded();
    if (masks.empty()) {
        return g;
    }
    if (prune_masked) {
        return prune(apply_mask(g, masks), masks);
    }
    return apply_mask(g, masks);
}

void Model::add_masks(float init, float tau) {
    masks.clear();
    for (std::int64_t b = 0; b < block_count(); ++b) {
        masks.push_back(BlockMask::trainable(block_resolution(b), mask_terms(*this), init, tau));
    }
}

void Model::freeze_masks() {
    for (BlockMask &m : masks) {
        if (!m.is_frozen()) {
            m.freeze();
        }
    }
}

StorageReport storage_report(const Model &model) {
    StorageReport r;
    r.blocks = model.block_count();
    for (const auto &b : model.cp_blocks) {
        r.coordinate_scalars += coordinate_scalars(b);
        r.factor_scalars += factor_scalars(b);
    }
    for (const auto &b : model.vm_blocks) {
        r.coordinate_scalars += coordinate_scalars(b);
        r.factor_scalars += factor_scalars(b);
    }
    r.decoder_scalars         = model.decoder.layers.empty() ? 0 : model.decoder.parameter_count();
    r.stored_scalars          = r.factor_scalars + r.decoder_scalars;
    r.representable_gaussians = model.representable_gaussians();
    r.active_gaussians        = r.representable_gaussians;
    if (!model.masks.empty()) {
        r.active_gaussians = 0;
        for (const BlockMask &m : model.masks) {
            r.mask_entries += m.size();
            r.active_gaussians += m.active_count();
        }
    }
    r.compression_ratio = r.representable_gaussians > 0
                              ? static_cast<double>(r.coordinate_scalars) /
                                    (3.0 * static_cast<double>(r.representable_gaussians))
                              : 0.0;
    r.bytes_on_disk = static_cast<std::int64_t>(serialize_model(model).size());
    return r;
}

std::vector<std::uint8_t> serialize_model(const Model &model) {
    model.validate();
    Writer w;
    for (char c : kMagic) {
        w.u8(static_cast<std::uint8_t>(c));
    }
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(model.scheme));
    w.u8(static_cast<std::uint8_t>(model.vm_mode));
    const MaskState ms = mask_state(model);
    w.u8(static_cast<std::uint8_t>(ms));
    w.u8(0);
    w.f32(model.masks.empty() ? kDefaultMaskThreshold : model.masks.front().threshold());
    const std::int64_t nb = model.block_count();
    w.u32(static_cast<std::uint32_t>(nb));
    w.u32(static_cast<std::uint32_t>(model.feature_dim));
    w.u32(static_cast<std::uint32_t>(model.decoder.layers.size()));
    for (const auto &l : model.decoder.layers) {
        w.u32(static_cast<std::uint32_t>(l.weight.cols()));
        w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    }
    for (std::int64_t b = 0; b < nb; ++b) {
        w.u32(static_cast<std::uint32_t>(model.block_resolution(b)));
    }
    for (std::int64_t b = 0; b < nb; ++b) {
        w.u32(model.masks.empty() ? 0u : static_cast<std::uint32_t>(model.masks[b].size()));
    }
    auto write_arrays = [&](const auto &block) {
        block.for_each_array([&](std::string_view, ArrayRole, const auto &a) { w.floats(a); });
    };
    for (const auto &b : model.cp_blocks) {
        write_arrays(b);
    }
    for (const auto &b : model.vm_blocks) {
        write_arrays(b);
    }
    for (const auto &l : model.decoder.layers) {
        w.floats(l.weight);
        w.floats(l.bias);
    }
    for (const BlockMask &m : model.masks) {
        if (ms == MaskState::Packed) {
            w.bytes(m.packed());
        } else {
            for (float v : m.values()) {
                w.f32(v);
            }
        }
    }
    return w.take();
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) {
            throw DataError("not an F3GS model file");
        }
    }
    if (const std::uint32_t v = r.u32(); v != kVersion) {
        throw DataError("unsupported model file version " + std::to_string(v));
    }
    Model m;
    const std::uint8_t scheme = r.u8(), mode = r.u8(), ms = r.u8();
    r.u8();
    if (scheme > 1 || mode > 1 || ms > 2) {
        throw DataError("model header has an invalid enum value");
    }
    m.scheme             = static_cast<Scheme>(scheme);
    m.vm_mode            = static_cast<VmMode>(mode);
    const float tau      = r.f32();
    const std::uint32_t nb = r.u32();
    m.feature_dim        = static_cast<int>(r.u32());
    const std::uint32_t layers = r.u32();
    if (m.feature_dim < 1 || layers > 64) {
        throw DataError("model header is implausible");
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(layers);
    for (auto &[in, out] : shapes) {
        in  = r.u32();
        out = r.u32();
    }
    std::vector<std::uint32_t> res(nb), mask_counts(nb);
    for (auto &n : res) {
        n = r.u32();
        if (n < 1 || n > 4096) {
            throw DataError("block resolution out of range");
        }
    }
    for (auto &c : mask_counts) {
        c = r.u32();
    }
    auto read_arrays = [&](auto &block) {
        block.for_each_array([&](std::string_view, ArrayRole, auto &a) { r.floats(a); });
    };
    for (std::uint32_t b = 0; b < nb; ++b) {
        if (m.scheme == Scheme::CP) {
            auto blk = FactorSetCP<float>::zeros(static_cast<int>(res[b]), m.feature_dim);
            read_arrays(blk);
            m.cp_blocks.push_back(std::move(blk));
        } else {
            auto blk = FactorSetVM<float>::zeros(static_cast<int>(res[b]), m.feature_dim);
            read_arrays(blk);
            m.vm_blocks.push_back(std::move(blk));
        }
    }
    for (const auto &[in, out] : shapes) {
        if (in < 1 || out < 1 || static_cast<std::uint64_t>(in) * out > (1u << 26)) {
            throw DataError("decoder layer shape out of range");
        }
        DenseLayer<float> l{RowMatrix<float>(out, in), Vector<float>(out)};
        r.floats(l.weight);
        r.floats(l.bias);
        m.decoder.layers.push_back(std::move(l));
    }
    const int terms = m.scheme == Scheme::VM ? vm_term_count(m.vm_mode) : 1;
    if (ms != 0) {
        for (std::uint32_t b = 0; b < nb; ++b) {
            const std::int64_t n = res[b];
            if (mask_counts[b] != terms * n * n * n) {
                throw DataError("mask entry count does not match its block");
            }
            if (ms == static_cast<std::uint8_t>(MaskState::Packed)) {
                m.masks.push_back(BlockMask::frozen(static_cast<int>(n), terms,
                                                    r.bytes(static_cast<size_t>(packed_byte_count(mask_counts[b])))));
            } else {
                BlockMask mk = BlockMask::trainable(static_cast<int>(n), terms, 0.0f, tau);
                for (float &v : mk.values()) {
                    v = r.f32();
                }
                m.masks.push_back(std::move(mk));
            }
        }
    }
    if (!r.done()) {
        throw DataError("trailing bytes after model data");
    }
    try {
        m.validate();
    } catch (const ShapeError &e) {
        throw DataError(std::string("model file is inconsistent: ") + e.what());
    }
    return m;
}

void save_model(const std::filesystem::path &path, const Model &model) {
    const std::vector<std::uint8_t> bytes = serialize_model(model);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw DataError("cannot write model file " + path.string());
    }
    f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw DataError("failed writing model file " + path.string());
    }
}

Model load_model(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot open model file " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

namespace {

using nlohmann::json;

template <typename Array>
json array_to_json(const Array &a) {
    json out = json::array();
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        out.push_back(a.data()[i]);
    }
    return out;
}

template <typename Array>
void array_from_json(const json &j, Array &a, std::string_view name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != a.size()) {
        throw DataError("JSON array '" + std::string(name) + "' has the wrong length");
    }
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = j[static_cast<size_t>(i)].get<float>();
    }
}

} // namespace

std::string model_to_json(const Model &model) {
    model.validate();
    json j;
    j["format"]      = "F3GS";
    j["version"]     = kVersion;
    j["scheme"]      = model.scheme == Scheme::CP ? "CP" : "VM";
    j["vm_mode"]     = static_cast<int>(model.vm_mode);
    j["feature_dim"] = model.feature_dim;
    json blocks      = json::array();
    auto dump_block  = [&](const auto &block) {
        json b;
        b["resolution"] = block.resolution();
        block.for_each_array([&](std::string_view name, ArrayRole, const auto &a) {
            b[std::string(name)] = array_to_json(a);
        });
        blocks.push_back(std::move(b));
    };
    for (const auto &b : model.cp_blocks) {
        dump_block(b);
    }
    for (const auto &b : model.vm_blocks) {
        dump_block(b);
    }
    j["blocks"]  = std::move(blocks);
    json layers  = json::array();
    for (const auto &l : model.decoder.layers) {
        layers.push_back({{"in", l.weight.cols()},
                          {"out", l.weight.rows()},
                          {"weight", array_to_json(l.weight)},
                          {"bias", array_to_json(l.bias)}});
    }
    j["decoder"] = std::move(layers);
    json masks   = json::array();
    for (const BlockMask &m : model.masks) {
        json mk{{"resolution", m.resolution()}, {"terms", m.terms()}, {"threshold", m.threshold()}};
        if (m.is_frozen()) {
            mk["packed"] = m.packed();
        } else {
            mk["values"] = json(std::vector<float>(m.values().begin(), m.values().end()));
        }
        masks.push_back(std::move(mk));
    }
    j["masks"] = std::move(masks);
    return j.dump(1);
}

Model model_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        if (j.at("format") != "F3GS" || j.at("version") != kVersion) {
            throw DataError("not an F3GS JSON dump");
        }
        Model m;
        m.scheme      = j.at("scheme") == "CP" ? Scheme::CP : Scheme::VM;
        m.vm_mode     = static_cast<VmMode>(j.at("vm_mode").get<int>());
        m.feature_dim = j.at("feature_dim").get<int>();
        for (const json &b : j.at("blocks")) {
            const int n   = b.at("resolution").get<int>();
            auto load_blk = [&](auto blk) {
                blk.for_each_array([&](std::string_view name, ArrayRole, auto &a) {
                    array_from_json(b.at(std::string(name)), a, name);
                });
                return blk;
            };
            if (m.scheme == Scheme::CP) {
                m.cp_blocks.push_back(load_blk(FactorSetCP<float>::zeros(n, m.feature_dim)));
            } else {
                m.vm_blocks.push_back(load_blk(FactorSetVM<float>::zeros(n, m.feature_dim)));
            }
        }
        for (const json &l : j.at("decoder")) {
            DenseLayer<float> layer{RowMatrix<float>(l.at("out").get<int>(), l.at("in").get<int>()),
                                    Vector<float>(l.at("out").get<int>())};
            array_from_json(l.at("weight"), layer.weight, "weight");
            array_from_json(l.at("bias"), layer.bias, "bias");
            m.decoder.layers.push_back(std::move(layer));
        }
        for (const json &mk : j.at("masks")) {
            const int n     = mk.at("resolution").get<int>();
            const int terms = mk.at("terms").get<int>();
            const float tau = mk.at("threshold").get<float>();
            if (mk.contains("packed")) {
                m.masks.push_back(BlockMask::frozen(n, terms, mk.at("packed").get<std::vector<std::uint8_t>>()));
            } else {
                BlockMask b       = BlockMask::trainable(n, terms, 0.0f, tau);
                const auto values = mk.at("values").get<std::vector<float>>();
                if (static_cast<std::int64_t>(values.size()) != b.size()) {
                    throw DataError("JSON mask has the wrong length");
                }
                std::copy(values.begin(), values.end(), b.values().begin());
                m.masks.push_back(std::move(b));
            }
        }
        m.validate();
        return m;
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed model JSON: ") + e.what());
    } catch (const ShapeError &e) {
        throw DataError(std::string("inconsistent model JSON: ") + e.what());
    }
}

} // namespace fgs
