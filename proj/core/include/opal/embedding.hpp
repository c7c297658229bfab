#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "opal/linalg.hpp"
#include "opal/rng.hpp"

namespace opal {

enum class Stage { pretrain, finetune };

// All item embeddings V (catalog x d) and hyper-category embeddings G (k x d).
// Rows of both are kept unit-norm by projection after every optimizer step.
struct EmbeddingStore {
  int catalog_size = 0;
  int d = 0;
  int k = 0;
  Mat V;
  Mat G;

  std::span<const double> item(int i) const { return V.row_span(i); }
  std::span<const double> category(int j) const { return G.row_span(j); }
};

// Standard GRU cell parameters, hidden size = embedding dimension so hard
// interests live in the same space as soft ones.
struct GruParams {
  int d = 0;
  Mat Wz, Wr, Wh;  // input weights, d x d
  Mat Uz, Ur, Uh;  // recurrent weights, d x d
  Vec bz, br, bh;  // biases, length d
};

// Entries ~ U(-1/sqrt(d), 1/sqrt(d)); V and G rows are then projected to unit
// norm, GRU parameters are left as drawn.
EmbeddingStore init_store(int catalog_size, int d, int k, Rng& rng);
GruParams init_gru(int d, Rng& rng);

// Projects each touched row back to unit norm. A zero-norm row means the
// optimizer diverged and throws DivergenceError.
void renormalize(EmbeddingStore& store, std::span<const int> touched_v_rows,
                 bool all_g_rows = true);
void renormalize_row(Mat& m, int row);

// On-disk checkpoint. Parameters are serialized as little-endian f32
// row-major arrays; save/load round-trips the struct bit-exactly.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t d = 0;
  std::uint64_t k = 0;
  std::uint64_t catalog_size = 0;
  Stage stage = Stage::pretrain;
  std::vector<float> V, G;
  std::vector<float> Wz, Wr, Wh, Uz, Ur, Uh;
  std::vector<float> bz, br, bh;

  static Checkpoint from(const EmbeddingStore& store, const GruParams& gru,
                         Stage stage);
  void restore(EmbeddingStore& store, GruParams& gru) const;

  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace opal
