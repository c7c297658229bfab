#include "opal/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "opal/error.hpp"

namespace opal {

namespace {

void fill_uniform(std::vector<double>& a, double bound, Rng& rng) {
  for (auto& v : a) v = rng.uniform(-bound, bound);
}

}  // namespace

EmbeddingStore init_store(int catalog_size, int d, int k, Rng& rng) {
  if (catalog_size < 1 || d < 1 || k < 1) {
    throw ConfigError("catalog_size, d, k must all be >= 1");
  }
  EmbeddingStore store;
  store.catalog_size = catalog_size;
  store.d = d;
  store.k = k;
  store.V = Mat(catalog_size, d);
  store.G = Mat(k, d);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  fill_uniform(store.V.a, bound, rng);
  fill_uniform(store.G.a, bound, rng);
  for (int i = 0; i < catalog_size; ++i) renormalize_row(store.V, i);
  for (int j = 0; j < k; ++j) renormalize_row(store.G, j);
  return store;
}

GruParams init_gru(int d, Rng& rng) {
  GruParams g;
  g.d = d;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (Mat* m : {&g.Wz, &g.Wr, &g.Wh, &g.Uz, &g.Ur, &g.Uh}) {
    *m = Mat(d, d);
    fill_uniform(m->a, bound, rng);
  }
  for (Vec* v : {&g.bz, &g.br, &g.bh}) {
    v->assign(static_cast<std::size_t>(d), 0.0);
    fill_uniform(*v, bound, rng);
  }
  return g;
}

void renormalize_row(Mat& m, int row) {
  const double n = nrm2(m.row_span(row));
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DivergenceError("zero or non-finite norm in embedding row " +
                          std::to_string(row));
  }
  scale(1.0 / n, m.row_span(row));
}

void renormalize(EmbeddingStore& store, std::span<const int> touched_v_rows,
                 bool all_g_rows) {
  for (int r : touched_v_rows) renormalize_row(store.V, r);
  if (all_g_rows) {
    for (int j = 0; j < store.k; ++j) renormalize_row(store.G, j);
  }
}

Checkpoint Checkpoint::from(const EmbeddingStore& store, const GruParams& gru,
                            Stage stage) {
  Checkpoint c;
  c.d = static_cast<std::uint64_t>(store.d);
  c.k = static_cast<std::uint64_t>(store.k);
  c.catalog_size = static_cast<std::uint64_t>(store.catalog_size);
  c.stage = stage;
  auto narrow = [](const std::vector<double>& src) {
    std::vector<float> dst(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<float>(src[i]);
    }
    return dst;
  };
  c.V = narrow(store.V.a);
  c.G = narrow(store.G.a);
  c.Wz = narrow(gru.Wz.a);
  c.Wr = narrow(gru.Wr.a);
  c.Wh = narrow(gru.Wh.a);
  c.Uz = narrow(gru.Uz.a);
  c.Ur = narrow(gru.Ur.a);
  c.Uh = narrow(gru.Uh.a);
  c.bz = narrow(gru.bz);
  c.br = narrow(gru.br);
  c.bh = narrow(gru.bh);
  return c;
}

void Checkpoint::restore(EmbeddingStore& store, GruParams& gru) const {
  const int dd = static_cast<int>(d);
  store.catalog_size = static_cast<int>(catalog_size);
  store.d = dd;
  store.k = static_cast<int>(k);
  auto widen = [](const std::vector<float>& src, std::vector<double>& dst) {
    dst.assign(src.begin(), src.end());
  };
  store.V = Mat(store.catalog_size, dd);
  store.G = Mat(store.k, dd);
  widen(V, store.V.a);
  widen(G, store.G.a);
  gru.d = dd;
  for (auto [m, src] : {std::pair{&gru.Wz, &Wz}, {&gru.Wr, &Wr},
                        {&gru.Wh, &Wh}, {&gru.Uz, &Uz}, {&gru.Ur, &Ur},
                        {&gru.Uh, &Uh}}) {
    *m = Mat(dd, dd);
    widen(*src, m->a);
  }
  widen(bz, gru.bz);
  widen(br, gru.br);
  widen(bh, gru.bh);
}

namespace {

constexpr char kMagic[4] = {'O', 'P', 'A', 'L'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError(std::string("truncated checkpoint reading ") + what);
  return v;
}

void put_array(std::ofstream& out, const std::vector<float>& a) {
  out.write(reinterpret_cast<const char*>(a.data()),
            static_cast<std::streamsize>(a.size() * sizeof(float)));
}

void get_array(std::ifstream& in, std::vector<float>& a, std::size_t n,
               const char* what) {
  a.resize(n);
  in.read(reinterpret_cast<char*>(a.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw IoError(std::string("truncated checkpoint reading ") + what);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, ckpt.d);
  put(out, ckpt.k);
  put(out, ckpt.catalog_size);
  put(out, static_cast<std::uint8_t>(ckpt.stage == Stage::finetune ? 1 : 0));
  put(out, std::uint8_t{0});  // reserved: optimizer state flag
  for (const auto* a : {&ckpt.V, &ckpt.G, &ckpt.Wz, &ckpt.Wr, &ckpt.Wh,
                        &ckpt.Uz, &ckpt.Ur, &ckpt.Uh, &ckpt.bz, &ckpt.br,
                        &ckpt.bh}) {
    put_array(out, *a);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw SchemaError(path.string() + ": not an OPAL checkpoint");
  }
  Checkpoint c;
  c.version = get<std::uint32_t>(in, "version");
  if (c.version != kVersion) {
    throw SchemaError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(c.version));
  }
  c.d = get<std::uint64_t>(in, "d");
  c.k = get<std::uint64_t>(in, "k");
  c.catalog_size = get<std::uint64_t>(in, "catalog_size");
  const auto stage = get<std::uint8_t>(in, "stage");
  if (stage > 1) throw SchemaError(path.string() + ": bad stage tag");
  c.stage = stage == 1 ? Stage::finetune : Stage::pretrain;
  const auto opt_flag = get<std::uint8_t>(in, "flags");
  if (opt_flag != 0) {
    throw SchemaError(path.string() +
                      ": embedded optimizer state is not supported");
  }
  const std::size_t d = c.d, k = c.k, n = c.catalog_size;
  get_array(in, c.V, n * d, "V");
  get_array(in, c.G, k * d, "G");
  get_array(in, c.Wz, d * d, "Wz");
  get_array(in, c.Wr, d * d, "Wr");
  get_array(in, c.Wh, d * d, "Wh");
  get_array(in, c.Uz, d * d, "Uz");
  get_array(in, c.Ur, d * d, "Ur");
  get_array(in, c.Uh, d * d, "Uh");
  get_array(in, c.bz, d, "bz");
  get_array(in, c.br, d, "br");
  get_array(in, c.bh, d, "bh");
  return c;
}

}  // namespace opal
