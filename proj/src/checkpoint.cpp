// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/checkpoint.hpp"

#include <variant>

#include "uapforge/hash.hpp"
#include "uapforge/tensor_io.hpp"

namespace uapforge {

using nlohmann::json;

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
    std::filesystem::path p = tensor_path;
    p.replace_extension(".json");
    return p;
}

json to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs}, {"lr", c.lr}, {"batch", c.batch}, {"momentum", c.momentum}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.momentum = j.value("momentum", c.momentum);
    c.seed = j.value("seed", c.seed);
    return c;
}

namespace {

std::string precision_name(DType d) {
    return d == DType::f32 ? "f32" : "f64";
}

json read_json_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    const std::string text = doc.dump(2) + "\n";
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

template <Real T>
Tensor<T> any_to(const AnyTensor& any) {
    return std::visit([](const auto& t) { return tensor_cast<T>(t); }, any);
}

}  // namespace

template <Real T>
json checkpoint_sidecar(const ModelState<T>& model, const CheckpointMeta& meta) {
    json history = json::array();
    for (const auto& h : meta.history) {
        history.push_back({{"epoch", h.epoch}, {"loss", h.loss}, {"accuracy", h.accuracy}});
    }
    return json{{"spec", to_json(model.spec)},
                {"precision", precision_name(dtype_of<T>())},
                {"param_count", model.params.numel()},
                {"fingerprint", hex64(model_fingerprint(model))},
                {"seed", meta.seed},
                {"train", to_json(meta.train)},
                {"dataset", {{"name", meta.dataset_name}, {"fingerprint", hex64(meta.dataset_fp)}}},
                {"history", history},
                {"extra", meta.extra}};
}

template <Real T>
std::string save_checkpoint(const std::filesystem::path& tensor_path, const ModelState<T>& model,
                            const CheckpointMeta& meta) {
    const auto bytes = encode_tensor(model.params);
    write_file_bytes(tensor_path, bytes);
    json side = checkpoint_sidecar(model, meta);
    const std::string hash = git_blob_hash(bytes);
    side["content_hash"] = hash;
    write_json_file(sidecar_path(tensor_path), side);
    return hash;
}

template <Real T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& tensor_path) {
    const auto bytes = read_file_bytes(tensor_path);
    json side = read_json_file(sidecar_path(tensor_path));
    ModelSpec spec;
    try {
        spec = model_spec_from_json(side.at("spec"));
    } catch (const json::exception& e) {
        throw FormatError(sidecar_path(tensor_path).string() + ": " + e.what());
    }
    Tensor<T> params = any_to<T>(decode_tensor(bytes));
    if (params.numel() != spec.param_count()) {
        throw FormatError(tensor_path.string() + ": " + std::to_string(params.numel()) +
                          " parameters, spec expects " + std::to_string(spec.param_count()));
    }
    return LoadedCheckpoint<T>{make_model<T>(std::move(spec), std::move(params)), std::move(side)};
}

template <Real T>
std::string save_delta_artifact(const std::filesystem::path& tensor_path, const Tensor<T>& delta, json metadata) {
    const auto bytes = encode_tensor(delta);
    write_file_bytes(tensor_path, bytes);
    const std::string hash = git_blob_hash(bytes);
    metadata["content_hash"] = hash;
    write_json_file(sidecar_path(tensor_path), metadata);
    return hash;
}

template <Real T>
LoadedDelta<T> load_delta_artifact(const std::filesystem::path& tensor_path) {
    LoadedDelta<T> out{any_to<T>(read_tensor_any(tensor_path)), json::object()};
    const auto side = sidecar_path(tensor_path);
    if (std::filesystem::exists(side)) out.metadata = read_json_file(side);
    return out;
}

#define UAPFORGE_INSTANTIATE(T)                                                                              \
    template json checkpoint_sidecar<T>(const ModelState<T>&, const CheckpointMeta&);                        \
    template std::string save_checkpoint<T>(const std::filesystem::path&, const ModelState<T>&,              \
                                            const CheckpointMeta&);                                          \
    template LoadedCheckpoint<T> load_checkpoint<T>(const std::filesystem::path&);                           \
    template std::string save_delta_artifact<T>(const std::filesystem::path&, const Tensor<T>&, json);       \
    template LoadedDelta<T> load_delta_artifact<T>(const std::filesystem::path&);

UAPFORGE_INSTANTIATE(float)
UAPFORGE_INSTANTIATE(double)
#undef UAPFORGE_INSTANTIATE

}  // namespace uapforge
