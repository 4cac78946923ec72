#pragma once

// Binary model checkpoints: 8-byte magic "ADVLOGCK", u32 version, a
// length-prefixed UTF-8 JSON metadata block (kind, config, vocab, optimizer
// step, rng state), then per-array records (name, dtype code, rank, dims as
// u64, little-endian IEEE-754 payload).

#include <memory>
#include <stdexcept>
#include <string>

#include "advlog/detector.hpp"
#include "advlog/generator.hpp"

namespace advlog {

struct BadFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr uint32_t kCheckpointVersion = 1;

void save_detector(const Detector& model, const std::string& path,
                   const std::string& rng_state = "");
std::unique_ptr<Detector> load_detector(const std::string& path, std::string* rng_state = nullptr);

void save_generator(const Generator& model, const std::string& path,
                    const std::string& rng_state = "");
std::unique_ptr<Generator> load_generator(const std::string& path,
                                          std::string* rng_state = nullptr);

// Peeks at the metadata block and returns the model kind tag.
std::string checkpoint_kind(const std::string& path);

}  // namespace advlog
