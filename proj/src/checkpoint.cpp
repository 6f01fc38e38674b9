// Checkpoint layout (all little-endian):
//
//   "MGSG" | u32 version | u32 N | u32 d | u32 noise_dim | u32 mode
//   u32 network_count, then per network:
//     u32 name_len | name bytes | u32 layer_count, then per layer:
//       u32 kind | u32 n_ints | u32 ints[] | u32 n_floats | f32 floats[]
//       u32 n_tensors, then per tensor: u32 rank | u32 dims[] | f32 values[]
//   u32 box_count, then per box d pairs of (f32 lower, f32 upper)
//
// Weights are narrowed to f32, so a loaded model is the saved one rounded to
// single precision. Box bounds are rounded outward so a reloaded box still
// holds every sample the original did.

#include "mgsgan/models.hpp"

#include "binary_io.hpp"
#include "mgsgan/errors.hpp"

#include <cmath>
#include <limits>

namespace mgsgan::models {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'S', 'G'};

float round_down(double v) {
    float f = static_cast<float>(v);
    if (static_cast<double>(f) > v) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
    return f;
}

float round_up(double v) {
    float f = static_cast<float>(v);
    if (static_cast<double>(f) < v) f = std::nextafter(f, std::numeric_limits<float>::infinity());
    return f;
}

void write_network(io::ByteWriter& w, const std::string& name, const nn::Sequential& net) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(net.size()));
    for (std::size_t i = 0; i < net.size(); ++i) {
        const nn::Layer& layer = net.layer(i);
        w.u32(static_cast<std::uint32_t>(layer.kind()));
        const auto ints = layer.shape_ints();
        w.u32(static_cast<std::uint32_t>(ints.size()));
        for (auto v : ints) w.u32(v);
        const auto floats = layer.hyper_floats();
        w.u32(static_cast<std::uint32_t>(floats.size()));
        for (auto v : floats) w.f32(v);
        const auto tensors = layer.state();
        w.u32(static_cast<std::uint32_t>(tensors.size()));
        for (const auto& t : tensors) {
            w.u32(static_cast<std::uint32_t>(t.rank()));
            for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
            for (double v : t.values()) w.f32(static_cast<float>(v));
        }
    }
}

struct NamedNetwork {
    std::string name;
    nn::Sequential net;
};

NamedNetwork read_network(io::ByteReader& r) {
    NamedNetwork out;
    const std::uint32_t name_len = r.u32();
    if (name_len > 256) throw DataError("checkpoint: implausible network name length");
    out.name = r.bytes(name_len);
    const std::uint32_t layers = r.u32();
    for (std::uint32_t l = 0; l < layers; ++l) {
        const auto kind = static_cast<nn::LayerKind>(r.u32());
        std::vector<std::uint32_t> ints(r.u32());
        if (ints.size() > 64) throw DataError("checkpoint: implausible layer record");
        for (auto& v : ints) v = r.u32();
        std::vector<float> floats(r.u32());
        if (floats.size() > 64) throw DataError("checkpoint: implausible layer record");
        for (auto& v : floats) v = r.f32();
        const std::uint32_t n_tensors = r.u32();
        if (n_tensors > 16) throw DataError("checkpoint: implausible tensor count");
        std::vector<Tensor> tensors;
        for (std::uint32_t t = 0; t < n_tensors; ++t) {
            ad::Shape shape(r.u32());
            if (shape.size() > 8) throw DataError("checkpoint: implausible tensor rank");
            for (auto& d : shape) d = r.u32();
            const std::size_t n = ad::shape_size(shape);
            if (n * 4 > r.remaining()) throw ParseError("checkpoint: truncated tensor payload", 0);
            std::vector<double> values(n);
            for (auto& v : values) v = r.f32();
            tensors.push_back(Tensor::from(std::move(shape), std::move(values)));
        }
        out.net.add(nn::make_layer(kind, ints, floats, std::move(tensors)));
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const GanModels& m) {
    io::ByteWriter w;
    w.bytes(std::string_view(kMagic, 4));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(m.classes));
    w.u32(static_cast<std::uint32_t>(m.bands));
    w.u32(static_cast<std::uint32_t>(m.noise_dim));
    w.u32(static_cast<std::uint32_t>(m.mode));

    std::vector<std::pair<std::string, const nn::Sequential*>> nets;
    const auto& gens = m.generators.networks();
    for (std::size_t i = 0; i < gens.size(); ++i) nets.emplace_back("gen." + std::to_string(i), &gens[i]);
    nets.emplace_back("disc", &m.discriminator.network());
    if (m.classifier) {
        const auto& br = m.classifier->branches();
        for (std::size_t i = 0; i < br.size(); ++i) nets.emplace_back("cls.branch." + std::to_string(i), &br[i]);
        nets.emplace_back("cls.head", &m.classifier->head());
    }
    w.u32(static_cast<std::uint32_t>(nets.size()));
    for (const auto& [name, net] : nets) write_network(w, name, *net);

    const auto& boxes = m.generators.domains();
    w.u32(static_cast<std::uint32_t>(boxes.size()));
    for (const auto& box : boxes) {
        if (box.lower.size() != m.bands || box.upper.size() != m.bands) {
            throw ContractError("checkpoint: domain box has wrong band count");
        }
        for (std::size_t b = 0; b < m.bands; ++b) {
            w.f32(round_down(box.lower[b]));
            w.f32(round_up(box.upper[b]));
        }
    }
    return std::move(w.buffer());
}

GanModels decode_checkpoint(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes, "checkpoint");
    if (r.bytes(4) != std::string_view(kMagic, 4)) throw DataError("checkpoint: bad magic (not an MGSG file)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    GanModels m;
    m.classes = r.u32();
    m.bands = r.u32();
    m.noise_dim = r.u32();
    const std::uint32_t mode = r.u32();
    if (mode > static_cast<std::uint32_t>(GameMode::Achsgan)) throw DataError("checkpoint: unknown mode tag");
    m.mode = static_cast<GameMode>(mode);
    if (m.classes == 0 || m.bands == 0) throw DataError("checkpoint: empty model dimensions");

    const std::uint32_t count = r.u32();
    std::vector<nn::Sequential> gens, branches;
    std::optional<nn::Sequential> disc, head;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedNetwork nn = read_network(r);
        if (nn.name.rfind("gen.", 0) == 0) {
            gens.push_back(std::move(nn.net));
        } else if (nn.name == "disc") {
            disc = std::move(nn.net);
        } else if (nn.name.rfind("cls.branch.", 0) == 0) {
            branches.push_back(std::move(nn.net));
        } else if (nn.name == "cls.head") {
            head = std::move(nn.net);
        } else {
            throw DataError("checkpoint: unknown network '" + nn.name + "'");
        }
    }

    std::vector<ClassDomain> boxes(r.u32());
    if (boxes.size() > m.classes) throw DataError("checkpoint: more domain boxes than classes");
    for (std::size_t c = 0; c < boxes.size(); ++c) {
        auto& box = boxes[c];
        box.class_id = static_cast<std::uint32_t>(c);
        box.lower.resize(m.bands);
        box.upper.resize(m.bands);
        for (std::size_t b = 0; b < m.bands; ++b) {
            box.lower[b] = r.f32();
            box.upper[b] = r.f32();
        }
    }
    if (!r.done()) throw DataError("checkpoint: trailing bytes");

    if (!disc) throw DataError("checkpoint: missing discriminator");
    const bool mixture = m.mode == GameMode::Mgsgan;
    m.generators = GeneratorBank(m.classes, m.bands, m.noise_dim, mixture, std::move(gens), std::move(boxes));
    m.discriminator = Discriminator(m.bands, std::move(*disc));
    if (m.mode != GameMode::Achsgan) {
        if (!head || branches.empty()) throw DataError("checkpoint: missing classifier");
        m.classifier = Classifier(m.bands, m.classes, std::move(branches), std::move(*head));
    }
    return m;
}

void save_checkpoint(const GanModels& models, const std::filesystem::path& path) {
    io::write_file(path, encode_checkpoint(models));
}

GanModels load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace mgsgan::models
