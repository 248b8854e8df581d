#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsmap/model.hpp"
#include "dsmap/tensor.hpp"

namespace dsmap {

/// On-disk training state: the model configuration, the step count,
/// the run seed, and every named array (parameters plus any optimizer
/// moments under "opt."). Serialized as an 8-byte magic, a length,
/// a JSON manifest (config echo, step, seed, array directory), then
/// the raw array payloads in manifest order. Writing the same state
/// twice produces identical bytes, so save -> load -> save round-trips
/// bit-exactly and checkpoints are diffable by name.
struct Checkpoint {
    ModelConfig config;
    int64_t step = 0;
    uint64_t train_seed = 0;
    std::vector<std::pair<std::string, Tensor>> arrays;

    /// Throws Error when the name is absent.
    const Tensor& array(const std::string& name) const;
    bool has_array(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
/// Throws IoError on missing file, bad magic, or a malformed manifest.
Checkpoint read_checkpoint(const std::string& path);

/// Captures the model parameters (plus optional extra arrays, e.g.
/// optimizer moments) into a checkpoint.
Checkpoint snapshot_model(const DsmapModel& model, int64_t step, uint64_t train_seed,
                          std::vector<std::pair<std::string, Tensor>> extra_arrays = {});

/// Copies parameter arrays from the checkpoint into the model.
/// The checkpoint config must equal the model's; every model parameter
/// must be present with its exact shape, and every non-"opt." array
/// must correspond to a parameter.
void restore_model(DsmapModel& model, const Checkpoint& ck);

}  // namespace dsmap
