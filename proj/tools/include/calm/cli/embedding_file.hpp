#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "calm/core.hpp"

namespace calm::cli {

// Binary layout, all integers and floats little-endian:
//   "CALM" | version u16 | N u64 | M u32 | N*M float32 row-major | N u32 labels
inline constexpr std::uint16_t kEmbeddingFileVersion = 1;

/// Rows whose norm before renormalization deviates from 1 by more than this
/// are rejected on load.
inline constexpr double kMaxLoadDeviation = 1e-3;

struct LoadedEmbeddings {
  EmbeddingSet set;
  double max_deviation = 0.0;  // max | ||row|| - 1 | before renormalization
};

enum class EmbeddingFormat { Binary, Csv };

/// ".csv" (any case) selects CSV; anything else is binary.
EmbeddingFormat format_for(const std::filesystem::path& path);

std::string encode_binary(const EmbeddingSet& set);
/// Header `label,v0,...,v{M-1}`; values with 9 significant digits, which is
/// lossless for float32.
std::string encode_csv(const EmbeddingSet& set);

/// Throws IoError on malformed content or a deviation above kMaxLoadDeviation.
LoadedEmbeddings decode_binary(std::string_view bytes);
LoadedEmbeddings decode_csv(std::string_view text);

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
LoadedEmbeddings load_embeddings(const std::filesystem::path& path);

}  // namespace calm::cli
