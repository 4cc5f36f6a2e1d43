#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybrec/model.hpp"
#include "hybrec/quant.hpp"

namespace hybrec {

// Container layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//   magic "HYBRECMD" | u8 format version | u32 section count |
//   per section: u16 name length, name bytes, u64 payload length, payload.
// Sections: meta, graph, gnn, node_table, head, trainable, and optionally
// text_table (only when it differs from the seeded table), lora, int8.gnn,
// int8.head.
// Readers skip sections they do not know.
inline constexpr std::string_view kModelMagic = "HYBRECMD";
inline constexpr std::uint8_t kModelFormatVersion = 1;

struct ModelFile {
  ModelParams params;
  std::vector<std::int64_t> user_ids;  // external id per dense user id; may be empty
  std::vector<std::int64_t> item_ids;
  std::vector<QuantizedMatrix> int8_gnn;
  std::optional<QuantizedHead> int8_head;
};

// Fills the INT8 sections from the model's effective weights.
void attach_int8(ModelFile& file);

std::string serialize_model(const ModelFile& file);
// Throws DataError on a bad magic, an unsupported version or a truncated or
// inconsistent payload. An absent text_table is regenerated from the seed.
ModelFile deserialize_model(std::string_view bytes);

void save_model(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace hybrec
