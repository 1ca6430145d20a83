#include "addernet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <variant>

namespace addernet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'D', 'E', 'R', 'N', 'E', 'T'};

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw std::runtime_error("checkpoint truncated");
    }
    return value;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto extent : t.shape()) {
        put<std::uint64_t>(out, extent);
    }
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void get_tensor_into(std::istream& in, Tensor& target) {
    const auto rank = get<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& extent : shape) {
        extent = get<std::uint64_t>(in);
    }
    if (shape != target.shape()) {
        throw std::runtime_error("checkpoint tensor " + shape_to_string(shape) + " does not match expected " +
                                 shape_to_string(target.shape()));
    }
    if (!in.read(reinterpret_cast<char*>(target.data()), static_cast<std::streamsize>(target.size() * sizeof(double)))) {
        throw std::runtime_error("checkpoint truncated");
    }
}

template <class Fn>
void for_each_state_tensor(const std::vector<Layer>& layers, Fn fn) {
    for (const auto& layer : layers) {
        if (const auto* a = std::get_if<AdderLayerParams>(&layer)) {
            fn(a->filters);
        } else if (const auto* c = std::get_if<ConvLayerParams>(&layer)) {
            fn(c->filters);
        } else if (const auto* bn = std::get_if<BatchNormParams>(&layer)) {
            fn(bn->gamma);
            fn(bn->beta);
            fn(bn->running_mean);
            fn(bn->running_var);
        }
    }
}

template <class T>
T required(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) {
        throw std::invalid_argument(std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("field '") + key + "': " + e.what());
    }
}

}  // namespace

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : spec.layers) {
        nlohmann::json item{{"kind", to_string(l.kind)}};
        switch (l.kind) {
            case LayerKind::Adder:
            case LayerKind::Conv:
                item["out_channels"] = l.out_channels;
                item["kernel"] = l.kernel;
                item["stride"] = l.stride;
                item["padding"] = l.padding;
                break;
            case LayerKind::MaxPool:
                item["window"] = l.kernel;
                break;
            default:
                break;
        }
        layers.push_back(std::move(item));
    }
    return {{"name", spec.name}, {"input_shape", spec.input_shape}, {"layers", layers}, {"loss", to_string(spec.loss)}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("network spec must be a JSON object");
    }
    NetworkSpec spec;
    spec.name = j.value("name", std::string("custom"));
    spec.input_shape = required<Shape>(j, "input_shape");
    spec.loss = loss_head_from_string(j.value("loss", std::string("softmax-ce")));
    for (const auto& item : required<nlohmann::json>(j, "layers")) {
        LayerSpec l;
        l.kind = layer_kind_from_string(required<std::string>(item, "kind"));
        if (l.kind == LayerKind::Adder || l.kind == LayerKind::Conv) {
            l.out_channels = required<std::size_t>(item, "out_channels");
            l.kernel = item.value("kernel", std::size_t{1});
            l.stride = item.value("stride", std::size_t{1});
            l.padding = item.value("padding", std::size_t{0});
        } else if (l.kind == LayerKind::MaxPool) {
            l.kernel = item.value("window", std::size_t{2});
            l.stride = l.kernel;
        }
        spec.layers.push_back(l);
    }
    spec.validate();
    return spec;
}

NetworkSpec load_spec_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open spec file " + path.string());
    }
    try {
        return spec_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, const OptimizerState* optimizer,
                     const nlohmann::json& extra) {
    nlohmann::json header{{"spec", spec_to_json(net.spec())}, {"extra", extra}};
    nlohmann::json layer_meta = nlohmann::json::array();
    for (const auto& layer : net.layers()) {
        if (const auto* a = std::get_if<AdderLayerParams>(&layer)) {
            layer_meta.push_back({{"p", a->p}});
        } else if (const auto* bn = std::get_if<BatchNormParams>(&layer)) {
            layer_meta.push_back({{"eps", bn->eps}, {"momentum", bn->momentum}});
        } else {
            layer_meta.push_back(nlohmann::json::object());
        }
    }
    header["layer_meta"] = layer_meta;
    if (optimizer) {
        const auto& c = optimizer->config;
        header["optimizer"] = {{"momentum", c.momentum},       {"weight_decay", c.weight_decay},
                               {"eta", c.eta},                 {"adaptive", c.adaptive},
                               {"step", optimizer->step},      {"epoch", optimizer->epoch},
                               {"velocities", optimizer->velocity.size()}};
    }
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write checkpoint " + path.string());
    }
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for_each_state_tensor(net.layers(), [&](const Tensor& t) { put_tensor(out, t); });
    if (optimizer) {
        for (const auto& v : optimizer->velocity) {
            put_tensor(out, v);
        }
    }
    if (!out) {
        throw std::runtime_error("failed writing checkpoint " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint " + path.string());
    }
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error(path.string() + " is not a checkpoint");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto length = get<std::uint64_t>(in);
    std::string text(length, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
        throw std::runtime_error("checkpoint truncated");
    }
    const auto header = nlohmann::json::parse(text);

    Rng scratch(0);
    Checkpoint ckpt{build_network(spec_from_json(header.at("spec")), scratch), std::nullopt,
                    header.value("extra", nlohmann::json::object())};
    auto& layers = ckpt.network.layers();
    const auto& meta = header.at("layer_meta");
    if (meta.size() != layers.size()) {
        throw std::runtime_error("checkpoint layer metadata does not match the spec");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (auto* a = std::get_if<AdderLayerParams>(&layers[i])) {
            a->p = meta[i].at("p").get<double>();
        } else if (auto* bn = std::get_if<BatchNormParams>(&layers[i])) {
            bn->eps = meta[i].at("eps").get<double>();
            bn->momentum = meta[i].at("momentum").get<double>();
        }
    }
    for (auto& layer : layers) {
        std::visit(
            [&](auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, AdderLayerParams> || std::is_same_v<L, ConvLayerParams>) {
                    get_tensor_into(in, l.filters);
                } else if constexpr (std::is_same_v<L, BatchNormParams>) {
                    get_tensor_into(in, l.gamma);
                    get_tensor_into(in, l.beta);
                    get_tensor_into(in, l.running_mean);
                    get_tensor_into(in, l.running_var);
                }
            },
            layer);
    }
    if (header.contains("optimizer")) {
        const auto& o = header.at("optimizer");
        OptimizerConfig cfg;
        cfg.momentum = o.at("momentum").get<double>();
        cfg.weight_decay = o.at("weight_decay").get<double>();
        cfg.eta = o.at("eta").get<double>();
        cfg.adaptive = o.at("adaptive").get<bool>();
        OptimizerState state(cfg);
        state.step = o.at("step").get<std::uint64_t>();
        state.epoch = o.at("epoch").get<std::uint64_t>();
        const auto count = o.at("velocities").get<std::size_t>();
        if (count > 0) {
            for (const auto& ref : ckpt.network.parameters()) {
                state.velocity.emplace_back(ref.value->shape());
            }
            if (state.velocity.size() != count) {
                throw std::runtime_error("checkpoint velocity count does not match the network");
            }
            for (auto& v : state.velocity) {
                get_tensor_into(in, v);
            }
        }
        ckpt.optimizer = std::move(state);
    }
    ckpt.network.mark_updated();
    return ckpt;
}

}  // namespace addernet
