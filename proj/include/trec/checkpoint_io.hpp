#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trec/model.hpp"
#include "trec/nn.hpp"

namespace trec {

// Checkpoint file, magic "TCKP" version 1, little-endian. u32 n_tensors;
// per tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32), u8 ndim,
// ndim x u32 dims, row-major f32 payload; trailing u64 FNV-1a hash of every
// preceding byte.
struct CheckpointTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;
};

void write_checkpoint_tensors(const std::filesystem::path& path,
                              const std::vector<CheckpointTensor>& tensors);
std::vector<CheckpointTensor> read_checkpoint_tensors(const std::filesystem::path& path);

// Model parameters plus batch-norm state; optimizer moments and step counter
// are included when an optimizer is given, so training can resume.
void save_model(const std::filesystem::path& path, Model& model,
                const nn::Adam<float>* optimizer = nullptr);

// Loads into an existing model; the stored spec must match. Restores the
// optimizer state when present in the file and an optimizer is given.
void load_model(const std::filesystem::path& path, Model& model,
                nn::Adam<float>* optimizer = nullptr);

// Spec recorded in a checkpoint without loading the tensors into a model.
ModelSpec peek_checkpoint_spec(const std::filesystem::path& path);

}  // namespace trec
