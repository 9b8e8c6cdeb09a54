#include "sectorflow/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sectorflow::model_io {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'F', 'M', 'O', 'D', 'E', 'L', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("model file truncated in header length");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_block(std::ostream& out, const std::vector<double>& v) {
    for (double x : v) {
        const std::uint64_t u = std::bit_cast<std::uint64_t>(x);
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(u >> (8 * i));
        out.write(b, 8);
    }
}

std::vector<double> get_block(std::istream& in, std::size_t len, const std::string& name) {
    std::vector<double> v(len);
    for (std::size_t k = 0; k < len; ++k) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw std::runtime_error("model file truncated in block '" + name + "'");
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        v[k] = std::bit_cast<double>(u);
    }
    return v;
}

json spec_to_json(const nn::NetworkSpec& spec) {
    json j;
    j["input_dim"] = spec.input_dim;
    j["hidden"] = spec.hidden;
    j["activation"] = spec.activation == nn::Activation::kTanh ? "tanh" : "relu";
    j["output_dim"] = spec.output_dim;
    j["head"] = spec.head == nn::OutputHead::kGaussian ? "gaussian" : "point";
    return j;
}

nn::NetworkSpec spec_from_json(const json& j) {
    nn::NetworkSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden = j.at("hidden").get<std::vector<int>>();
    const std::string act = j.at("activation").get<std::string>();
    if (act == "tanh") {
        spec.activation = nn::Activation::kTanh;
    } else if (act == "relu") {
        spec.activation = nn::Activation::kRelu;
    } else {
        throw std::runtime_error("model file: unknown activation '" + act + "'");
    }
    spec.output_dim = j.at("output_dim").get<int>();
    const std::string head = j.at("head").get<std::string>();
    if (head == "gaussian") {
        spec.head = nn::OutputHead::kGaussian;
    } else if (head == "point") {
        spec.head = nn::OutputHead::kPoint;
    } else {
        throw std::runtime_error("model file: unknown head '" + head + "'");
    }
    return spec;
}

void add_standardizer(const models::Standardizer& s,
                      std::vector<const std::vector<double>*>& blocks, json& block_list,
                      const std::string& prefix) {
    block_list.push_back({{"name", prefix + "_mean"}, {"len", s.mean.size()}});
    blocks.push_back(&s.mean);
    block_list.push_back({{"name", prefix + "_scale"}, {"len", s.scale.size()}});
    blocks.push_back(&s.scale);
}

}  // namespace

std::string model_kind(const AnyModel& m) {
    if (std::holds_alternative<LinearModelFile>(m)) return "linear";
    if (std::holds_alternative<models::EnsembleModel>(m)) return "de";
    return "bnn";
}

void save_model(const std::string& path, const AnyModel& model) {
    json header;
    json block_list = json::array();
    std::vector<const std::vector<double>*> blocks;

    if (const auto* lin = std::get_if<LinearModelFile>(&model)) {
        header["kind"] = "linear";
        header["sigma_jitter"] = lin->sigma_jitter_deg;
    } else if (const auto* de = std::get_if<models::EnsembleModel>(&model)) {
        header["kind"] = "de";
        header["degree"] = de->degree;
        header["spec"] = spec_to_json(de->spec);
        header["n_members"] = de->members.size();
        add_standardizer(de->features, blocks, block_list, "features");
        add_standardizer(de->targets, blocks, block_list, "targets");
        for (std::size_t m = 0; m < de->members.size(); ++m) {
            char name[24];
            std::snprintf(name, sizeof(name), "member_%03u", static_cast<unsigned>(m));
            block_list.push_back({{"name", name}, {"len", de->members[m].theta.size()}});
            blocks.push_back(&de->members[m].theta);
        }
    } else {
        const auto& bnn = std::get<models::BnnModel>(model);
        header["kind"] = "bnn";
        header["degree"] = bnn.degree;
        header["spec"] = spec_to_json(bnn.posterior.spec);
        header["prior_precision"] = bnn.posterior.prior_precision;
        add_standardizer(bnn.features, blocks, block_list, "features");
        add_standardizer(bnn.targets, blocks, block_list, "targets");
        block_list.push_back({{"name", "theta_map"}, {"len", bnn.posterior.theta_map.theta.size()}});
        blocks.push_back(&bnn.posterior.theta_map.theta);
        block_list.push_back(
            {{"name", "last_layer_var"}, {"len", bnn.posterior.last_layer_var.size()}});
        blocks.push_back(&bnn.posterior.last_layer_var);
    }
    header["blocks"] = block_list;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(kMagic, 8);
    const std::string text = header.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* b : blocks) put_block(out, *b);
    if (!out) throw std::runtime_error("write failed for " + path);
}

AnyModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kMagic, 8)) {
        throw std::runtime_error(path + ": not an SFMODEL1 file");
    }
    const std::uint32_t hlen = get_u32(in);
    std::string text(hlen, '\0');
    in.read(text.data(), hlen);
    if (!in) throw std::runtime_error(path + ": truncated header");
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": bad model header: " + e.what());
    }

    std::vector<std::pair<std::string, std::vector<double>>> blocks;
    for (const auto& jb : header.value("blocks", json::array())) {
        const std::string name = jb.at("name").get<std::string>();
        const std::size_t len = jb.at("len").get<std::size_t>();
        blocks.emplace_back(name, get_block(in, len, name));
    }
    auto take = [&](const std::string& name) -> std::vector<double> {
        for (auto& [n, v] : blocks) {
            if (n == name) return std::move(v);
        }
        throw std::runtime_error(path + ": missing block '" + name + "'");
    };

    const std::string kind = header.at("kind").get<std::string>();
    if (kind == "linear") {
        LinearModelFile lin;
        lin.sigma_jitter_deg = header.at("sigma_jitter").get<double>();
        return lin;
    }
    if (kind == "de") {
        models::EnsembleModel de;
        de.degree = header.at("degree").get<int>();
        de.spec = spec_from_json(header.at("spec"));
        de.features.mean = take("features_mean");
        de.features.scale = take("features_scale");
        de.targets.mean = take("targets_mean");
        de.targets.scale = take("targets_scale");
        const std::size_t n_members = header.at("n_members").get<std::size_t>();
        const auto expected = nn::make_layout(de.spec).total;
        for (std::size_t m = 0; m < n_members; ++m) {
            char name[24];
            std::snprintf(name, sizeof(name), "member_%03u", static_cast<unsigned>(m));
            nn::Params p;
            p.theta = take(name);
            if (p.theta.size() != expected) {
                throw std::runtime_error(path + ": member parameter count mismatch");
            }
            de.members.push_back(std::move(p));
        }
        return de;
    }
    if (kind == "bnn") {
        models::BnnModel bnn;
        bnn.degree = header.at("degree").get<int>();
        bnn.posterior.spec = spec_from_json(header.at("spec"));
        bnn.posterior.prior_precision = header.at("prior_precision").get<double>();
        bnn.features.mean = take("features_mean");
        bnn.features.scale = take("features_scale");
        bnn.targets.mean = take("targets_mean");
        bnn.targets.scale = take("targets_scale");
        bnn.posterior.theta_map.theta = take("theta_map");
        bnn.posterior.last_layer_var = take("last_layer_var");
        if (bnn.posterior.theta_map.theta.size() != nn::make_layout(bnn.posterior.spec).total) {
            throw std::runtime_error(path + ": theta_map parameter count mismatch");
        }
        return bnn;
    }
    throw std::runtime_error(path + ": unknown model kind '" + kind + "'");
}

}  // namespace sectorflow::model_io
