#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ffpkit/container.hpp"
#include "ffpkit/dit.hpp"
#include "ffpkit/taxonomy.hpp"

namespace ffpkit {

// Checkpoint = tensor container holding the run config (JSON bytes), the
// head partition when one was used, and every parameter under "param." in
// canonical visit order.
inline void save_checkpoint(const std::string& path, const std::string& config_json,
                            const DitParams& params, const HeadPartition* partition) {
    std::vector<NamedTensor> out;
    out.push_back({"__config__", string_to_tensor(config_json)});
    if (partition != nullptr)
        out.push_back({"__partition__", string_to_tensor(partition_to_json(*partition).dump())});
    params.visit([&](const std::string& name, const Tensor& t) {
        out.push_back({"param." + name, t});
    });
    save_tensors(path, out);
}

struct Checkpoint {
    std::string config_json;
    std::optional<HeadPartition> partition;
    std::vector<NamedTensor> raw_params;
};

inline Checkpoint load_checkpoint_file(const std::string& path) {
    Checkpoint ck;
    for (NamedTensor& t : load_tensors(path)) {
        if (t.name == "__config__") {
            ck.config_json = tensor_to_string(t.value);
        } else if (t.name == "__partition__") {
            ck.partition = partition_from_json(nlohmann::json::parse(tensor_to_string(t.value)));
        } else {
            check(t.name.rfind("param.", 0) == 0, ErrorCode::config_error,
                  "unexpected tensor in checkpoint: " + t.name);
            ck.raw_params.push_back(std::move(t));
        }
    }
    check(!ck.config_json.empty(), ErrorCode::config_error, "checkpoint lacks a config");
    return ck;
}

// Fills an initialized parameter set from checkpoint tensors; every
// parameter must be present with its exact shape, and no extras may remain.
inline void fill_params_from(const Checkpoint& ck, DitParams& params) {
    std::map<std::string, const Tensor*> by_name;
    for (const NamedTensor& t : ck.raw_params) by_name[t.name] = &t.value;

    params.visit([&](const std::string& name, Tensor& t) {
        const auto it = by_name.find("param." + name);
        check(it != by_name.end(), ErrorCode::config_error,
              "checkpoint is missing parameter " + name);
        check(it->second->same_shape(t), ErrorCode::config_error,
              "checkpoint parameter " + name + " has shape " + it->second->shape_str() +
                  ", expected " + t.shape_str());
        t = *it->second;
        by_name.erase(it);
    });
    check(by_name.empty(), ErrorCode::config_error,
          "checkpoint holds " + std::to_string(by_name.size()) + " unknown parameters");
}

}  // namespace ffpkit
