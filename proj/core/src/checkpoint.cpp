#include "gatednet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "gatednet/error.hpp"

namespace gatednet {

namespace {

constexpr char kMagic[8] = {'G', 'D', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

void put_f64(std::ostream& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  char buf[4];
  if (!in.read(buf, 4)) throw ParseError(path + ": truncated checkpoint");
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  char buf[8];
  if (!in.read(buf, 8)) throw ParseError(path + ": truncated checkpoint");
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  char buf[8];
  if (!in.read(buf, 8)) throw ParseError(path + ": truncated checkpoint");
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

std::vector<double> get_doubles(std::istream& in, const std::string& path) {
  const std::uint64_t n = get_u64(in, path);
  std::vector<double> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(n * sizeof(double)))) {
    throw ParseError(path + ": truncated checkpoint");
  }
  return v;
}

void put_gate(std::ostream& out, const GateParams& g) {
  out.put(g.mode == GateMode::kStatic ? 0 : 1);
  put_f64(out, g.tau);
  put_f64(out, g.theta);
  out.put(g.topk_k ? 1 : 0);
  if (g.topk_k) put_u64(out, *g.topk_k);
  if (g.mode == GateMode::kStatic) {
    put_doubles(out, g.static_logits);
  } else {
    put_u64(out, g.gate_W.rows);
    put_u64(out, g.gate_W.cols);
    put_doubles(out, g.gate_W.data);
    put_doubles(out, g.gate_b);
  }
}

GateParams get_gate(std::istream& in, const std::string& path) {
  GateParams g;
  g.mode = in.get() == 0 ? GateMode::kStatic : GateMode::kDynamic;
  g.tau = get_f64(in, path);
  g.theta = get_f64(in, path);
  if (in.get() != 0) g.topk_k = get_u64(in, path);
  if (g.mode == GateMode::kStatic) {
    g.static_logits = get_doubles(in, path);
  } else {
    g.gate_W.rows = get_u64(in, path);
    g.gate_W.cols = get_u64(in, path);
    g.gate_W.data = get_doubles(in, path);
    g.gate_b = get_doubles(in, path);
  }
  return g;
}

}  // namespace

void save_checkpoint(const GatedMlp& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  put_u32(out, kVersion);

  const std::size_t L = model.layer_count();
  put_u64(out, L);
  for (std::size_t l = 0; l < L; ++l) {
    const GatedLayer& layer = model.layers[l];
    put_u64(out, layer.W.rows);
    put_u64(out, layer.W.cols);
    put_doubles(out, layer.W.data);
    put_doubles(out, layer.b);
    out.put(layer.mask ? 1 : 0);
    if (layer.mask) {
      put_u64(out, layer.mask->budget);
      out.write(reinterpret_cast<const char*>(layer.mask->bits.data()),
                static_cast<std::streamsize>(layer.mask->bits.size()));
    }
  }
  out.put(model.input_gate ? 1 : 0);
  if (model.input_gate) put_gate(out, *model.input_gate);
  for (std::size_t l = 0; l < L; ++l) {
    out.put(model.layers[l].gate ? 1 : 0);
    if (model.layers[l].gate) put_gate(out, *model.layers[l].gate);
  }
  if (!out) throw IoError("short write to " + path);
}

GatedMlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError(path + ": not a GDNCKPT checkpoint");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }

  GatedMlp model;
  const std::uint64_t L = get_u64(in, path);
  model.layers.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    GatedLayer& layer = model.layers[l];
    layer.W.rows = get_u64(in, path);
    layer.W.cols = get_u64(in, path);
    layer.W.data = get_doubles(in, path);
    layer.b = get_doubles(in, path);
    if (in.get() != 0) {
      SparseMask m;
      m.rows = layer.W.rows;
      m.cols = layer.W.cols;
      m.budget = get_u64(in, path);
      m.bits.resize(m.rows * m.cols);
      if (!in.read(reinterpret_cast<char*>(m.bits.data()),
                   static_cast<std::streamsize>(m.bits.size()))) {
        throw ParseError(path + ": truncated checkpoint");
      }
      layer.mask = std::move(m);
    }
  }
  if (in.get() != 0) model.input_gate = get_gate(in, path);
  for (std::size_t l = 0; l < L; ++l) {
    if (in.get() != 0) model.layers[l].gate = get_gate(in, path);
  }
  model.check_consistent();
  return model;
}

}  // namespace gatednet
