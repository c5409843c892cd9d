#pragma once

#include <string>

#include "havok_mpc/embedding.hpp"
#include "havok_mpc/havok.hpp"

namespace havok {

// Versioned JSON serialization (schema_version 1). Matrices are stored
// row-major with explicit dimensions; doubles round-trip bit-exactly. The V
// factor of an embedding is a training artifact and is not persisted.
void save_embedding(const DelayEmbedding& emb, const std::string& path);
DelayEmbedding load_embedding(const std::string& path);

void save_model(const HavokModel& model, const std::string& path);
HavokModel load_model(const std::string& path);

}  // namespace havok
