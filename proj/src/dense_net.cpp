#include "fleetwise/dense_net.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fleetwise/errors.hpp"

namespace fleetwise {

double apply_activation(Activation act, double z) {
    switch (act) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Identity: return z;
    }
    return z;
}

double activation_grad(Activation act, double z) {
    switch (act) {
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

namespace {

const char* activation_name(Activation act) {
    return act == Activation::ReLU ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "identity") return Activation::Identity;
    throw ValidationError("unknown activation '" + name + "'");
}

}  // namespace

DenseNet DenseNet::make(std::size_t input_width,
                        const std::vector<std::size_t>& hidden,
                        std::size_t output_width, Rng& rng) {
    if (input_width == 0 || output_width == 0) {
        throw ValidationError("network widths must be positive");
    }
    DenseNet net;
    std::size_t in = input_width;
    std::vector<std::size_t> widths = hidden;
    widths.push_back(output_width);
    for (std::size_t l = 0; l < widths.size(); ++l) {
        DenseLayer layer;
        layer.in = in;
        layer.out = widths[l];
        layer.act = (l + 1 == widths.size()) ? Activation::Identity
                                             : Activation::ReLU;
        layer.w.resize(layer.out * layer.in);
        layer.b.assign(layer.out, 0.0);
        double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
        for (double& w : layer.w) w = rng.uniform(-bound, bound);
        net.layers_.push_back(std::move(layer));
        in = widths[l];
    }
    return net;
}

std::size_t DenseNet::input_width() const {
    return layers_.empty() ? 0 : layers_.front().in;
}

std::size_t DenseNet::output_width() const {
    return layers_.empty() ? 0 : layers_.back().out;
}

std::vector<double> DenseNet::forward(std::span<const double> x) const {
    if (x.size() != input_width()) {
        throw ValidationError("forward: input width mismatch");
    }
    std::vector<double> a(x.begin(), x.end());
    std::vector<double> next;
    for (const auto& layer : layers_) {
        next.assign(layer.out, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double z = layer.b[o];
            const double* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) z += wrow[i] * a[i];
            next[o] = apply_activation(layer.act, z);
        }
        a.swap(next);
    }
    return a;
}

std::vector<double> DenseNet::forward_cached(std::span<const double> x,
                                             ForwardCache& cache) const {
    if (x.size() != input_width()) {
        throw ValidationError("forward: input width mismatch");
    }
    cache.inputs.assign(layers_.size(), {});
    cache.pre.assign(layers_.size(), {});
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        cache.inputs[l] = a;
        std::vector<double> z(layer.out, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double acc = layer.b[o];
            const double* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) acc += wrow[i] * a[i];
            z[o] = acc;
        }
        cache.pre[l] = z;
        a.resize(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            a[o] = apply_activation(layer.act, z[o]);
        }
    }
    cache.output = a;
    return a;
}

std::vector<double> DenseNet::backward(const ForwardCache& cache,
                                       std::span<const double> dloss_dout,
                                       NetGrads& grads) const {
    std::vector<double> delta(dloss_dout.begin(), dloss_dout.end());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        const auto& z = cache.pre[l];
        const auto& in = cache.inputs[l];
        for (std::size_t o = 0; o < layer.out; ++o) {
            delta[o] *= activation_grad(layer.act, z[o]);
        }
        auto& g = grads[l];
        for (std::size_t o = 0; o < layer.out; ++o) {
            g.b[o] += delta[o];
            double* grow = g.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) {
                grow[i] += delta[o] * in[i];
            }
        }
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) {
                prev[i] += wrow[i] * delta[o];
            }
        }
        delta.swap(prev);
    }
    return delta;
}

NetGrads DenseNet::zero_grads() const {
    NetGrads grads(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        grads[l].w.assign(layers_[l].w.size(), 0.0);
        grads[l].b.assign(layers_[l].b.size(), 0.0);
    }
    return grads;
}

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.w.size() + layer.b.size();
    return n;
}

std::vector<double> DenseNet::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& layer : layers_) {
        flat.insert(flat.end(), layer.w.begin(), layer.w.end());
        flat.insert(flat.end(), layer.b.begin(), layer.b.end());
    }
    return flat;
}

void DenseNet::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw ValidationError("set_parameters: size mismatch");
    }
    std::size_t pos = 0;
    for (auto& layer : layers_) {
        std::copy_n(flat.begin() + pos, layer.w.size(), layer.w.begin());
        pos += layer.w.size();
        std::copy_n(flat.begin() + pos, layer.b.size(), layer.b.begin());
        pos += layer.b.size();
    }
}

std::vector<double> DenseNet::flatten(const NetGrads& grads) {
    std::vector<double> flat;
    for (const auto& g : grads) {
        flat.insert(flat.end(), g.w.begin(), g.w.end());
        flat.insert(flat.end(), g.b.begin(), g.b.end());
    }
    return flat;
}

std::string DenseNet::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "dense";
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : layers_) {
        layers.push_back({{"in", layer.in},
                          {"out", layer.out},
                          {"activation", activation_name(layer.act)},
                          {"w", layer.w},
                          {"b", layer.b}});
    }
    j["layers"] = std::move(layers);
    return j.dump(2);
}

DenseNet DenseNet::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("bad model json: ") + e.what());
    }
    if (j.value("schema_version", 0) != 1 || j.value("kind", "") != "dense") {
        throw ValidationError("unsupported dense model schema");
    }
    DenseNet net;
    std::size_t expected_in = 0;
    for (const auto& lj : j.at("layers")) {
        DenseLayer layer;
        layer.in = lj.at("in").get<std::size_t>();
        layer.out = lj.at("out").get<std::size_t>();
        layer.act = activation_from_name(lj.at("activation").get<std::string>());
        layer.w = lj.at("w").get<std::vector<double>>();
        layer.b = lj.at("b").get<std::vector<double>>();
        if (layer.w.size() != layer.in * layer.out ||
            layer.b.size() != layer.out) {
            throw ValidationError("dense model layer size mismatch");
        }
        if (expected_in != 0 && layer.in != expected_in) {
            throw ValidationError("dense model layer dims do not chain");
        }
        expected_in = layer.out;
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

void DenseNet::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << to_json() << "\n";
}

DenseNet DenseNet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace fleetwise
