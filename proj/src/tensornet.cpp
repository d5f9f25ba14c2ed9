#include "graspsight/tensornet.hpp"

#include <cstdio>
#include <cstring>

namespace gs::tensornet {

double grad_check(ParamTableT<double>& params,
                  const std::function<double(bool run_backward)>& build, double eps) {
  params.zero_grad();
  build(true);
  std::vector<TensorT<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params.params) analytic.push_back(p.grad);

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& val = params.params[pi].value;
    for (int64_t j = 0; j < val.size(); ++j) {
      double orig = val[j];
      val[j] = orig + eps;
      double lp = build(false);
      val[j] = orig - eps;
      double lm = build(false);
      val[j] = orig;
      double numeric = (lp - lm) / (2.0 * eps);
      double a = analytic[pi][j];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > worst) worst = rel;
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoint file: magic "GSPT", u32 version=1, u32 tensor count, then per
// tensor u16 name length, name, u8 ndim, ndim x u32 dims, f32 payload.
// Little-endian throughout.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'G', 'S', 'P', 'T'};
constexpr uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_bytes(std::FILE* f, const void* p, size_t n, const std::string& path) {
  if (std::fwrite(p, 1, n, f) != n) throw io_error("short write to " + path);
}

void read_bytes(std::FILE* f, void* p, size_t n, const std::string& path) {
  if (std::fread(p, 1, n, f) != n) throw io_error("truncated checkpoint file: " + path);
}

}  // namespace

void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw io_error("cannot open checkpoint for writing: " + path);
  write_bytes(f.get(), kMagic, 4, path);
  uint32_t ver = kVersion;
  write_bytes(f.get(), &ver, 4, path);
  uint32_t count = uint32_t(tensors.size());
  write_bytes(f.get(), &count, 4, path);
  for (const auto& nt : tensors) {
    if (nt.name.size() > 0xFFFF) throw io_error("tensor name too long: " + nt.name);
    uint16_t len = uint16_t(nt.name.size());
    write_bytes(f.get(), &len, 2, path);
    write_bytes(f.get(), nt.name.data(), len, path);
    uint8_t nd = uint8_t(nt.tensor.ndim());
    write_bytes(f.get(), &nd, 1, path);
    for (int d : nt.tensor.shape) {
      uint32_t dim = uint32_t(d);
      write_bytes(f.get(), &dim, 4, path);
    }
    write_bytes(f.get(), nt.tensor.ptr(), sizeof(float) * size_t(nt.tensor.size()), path);
  }
  if (std::fflush(f.get()) != 0) throw io_error("flush failed for " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw io_error("cannot open checkpoint: " + path);
  char magic[4];
  read_bytes(f.get(), magic, 4, path);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw io_error("checkpoint magic mismatch in " + path);
  uint32_t ver = 0;
  read_bytes(f.get(), &ver, 4, path);
  if (ver != kVersion)
    throw io_error("unsupported checkpoint version " + std::to_string(ver) + " in " + path);
  uint32_t count = 0;
  read_bytes(f.get(), &count, 4, path);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = 0;
    read_bytes(f.get(), &len, 2, path);
    std::string name(len, '\0');
    if (len) read_bytes(f.get(), name.data(), len, path);
    uint8_t nd = 0;
    read_bytes(f.get(), &nd, 1, path);
    std::vector<int> shape(nd);
    for (uint8_t d = 0; d < nd; ++d) {
      uint32_t dim = 0;
      read_bytes(f.get(), &dim, 4, path);
      shape[d] = int(dim);
    }
    Tensor t(shape);
    read_bytes(f.get(), t.ptr(), sizeof(float) * size_t(t.size()), path);
    out.push_back({std::move(name), std::move(t)});
  }
  return out;
}

}  // namespace gs::tensornet
