#include "pdfold/checkpoint.hpp"

#include <stdexcept>

#include "json.hpp"
#include "pdfold/io.hpp"

namespace pdfold {

namespace {

using nlohmann::json;

json tensor_to_json(const Mat& m) {
    if (!all_finite(m)) throw std::runtime_error("checkpoint: non-finite tensor value");
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.vec()}};
}

Mat tensor_from_json(const json& j) {
    Mat m(j.at("rows").get<int>(), j.at("cols").get<int>(),
          j.at("data").get<std::vector<double>>());
    if (!all_finite(m)) throw std::runtime_error("checkpoint: non-finite tensor value");
    return m;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["format"] = "pdfold-checkpoint";
    j["version"] = 1;
    j["base_order"] = ckpt.base_order;
    j["psi_family"] = ckpt.psi_family;

    const auto& cfg = ckpt.score.config;
    j["score_config"] = {{"d", cfg.d},
                         {"psi_count", cfg.psi_count},
                         {"encoder_layers", cfg.encoder_layers},
                         {"heads", cfg.heads},
                         {"ff_width", cfg.ff_width},
                         {"init_seed", cfg.init_seed}};

    json tensors = json::object();
    ckpt.score.for_each_tensor(
        [&](const std::string& name, const Mat& m) { tensors[name] = tensor_to_json(m); });
    j["tensors"] = tensors;

    const auto& pp = ckpt.pp;
    j["pp"] = {{"w", pp.w},
               {"s", pp.s},
               {"alpha", pp.alpha},
               {"beta", pp.beta},
               {"gamma_alpha", pp.gamma_alpha},
               {"gamma_beta", pp.gamma_beta},
               {"rho", pp.rho},
               {"unroll_depth", pp.unroll_depth},
               {"temperature", pp.temperature}};

    if (!ckpt.train_config_json.empty())
        j["train_config"] = json::parse(ckpt.train_config_json);

    return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    if (j.at("format").get<std::string>() != "pdfold-checkpoint")
        throw std::runtime_error("not a pdfold checkpoint file");

    Checkpoint ckpt;
    ckpt.base_order = j.at("base_order").get<std::string>();
    if (ckpt.base_order != kBaseOrder)
        throw std::runtime_error("checkpoint: unsupported base order " + ckpt.base_order);
    ckpt.psi_family = j.at("psi_family").get<std::string>();
    if (ckpt.psi_family != kPsiFamilyTag)
        throw std::runtime_error("checkpoint: unsupported position feature family " +
                                 ckpt.psi_family);

    const auto& sc = j.at("score_config");
    ScoreNetConfig cfg;
    cfg.d = sc.at("d").get<int>();
    cfg.psi_count = sc.at("psi_count").get<int>();
    cfg.encoder_layers = sc.at("encoder_layers").get<int>();
    cfg.heads = sc.at("heads").get<int>();
    cfg.ff_width = sc.at("ff_width").get<int>();
    cfg.init_seed = sc.at("init_seed").get<std::uint64_t>();
    cfg.validate();

    // Sizes come from the config; tensor payloads overwrite the fresh init.
    ckpt.score = ScoreNetParams::init(cfg);
    const auto& tensors = j.at("tensors");
    ckpt.score.for_each_tensor([&](const std::string& name, Mat& m) {
        Mat loaded = tensor_from_json(tensors.at(name));
        if (!loaded.same_shape(m))
            throw std::runtime_error("checkpoint: tensor " + name + " has unexpected shape");
        m = std::move(loaded);
    });

    const auto& pp = j.at("pp");
    ckpt.pp.w = pp.at("w").get<double>();
    ckpt.pp.s = pp.at("s").get<double>();
    ckpt.pp.alpha = pp.at("alpha").get<double>();
    ckpt.pp.beta = pp.at("beta").get<double>();
    ckpt.pp.gamma_alpha = pp.at("gamma_alpha").get<double>();
    ckpt.pp.gamma_beta = pp.at("gamma_beta").get<double>();
    ckpt.pp.rho = pp.at("rho").get<double>();
    ckpt.pp.unroll_depth = pp.at("unroll_depth").get<int>();
    ckpt.pp.temperature = pp.at("temperature").get<double>();
    ckpt.pp.validate();

    if (j.contains("train_config")) ckpt.train_config_json = j.at("train_config").dump();
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_text_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_json(read_text_file(path));
}

}  // namespace pdfold
