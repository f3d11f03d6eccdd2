#include "gatednet/data.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "gatednet/error.hpp"

namespace gatednet {

namespace {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                 const std::string& path) {
  z_stream zs{};
  // 16+MAX_WBITS: gzip envelope.
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
    throw ParseError(path + ": inflateInit failed");
  }
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[65536];
  zs.next_in = const_cast<std::uint8_t*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError(path + ": gzip stream corrupt (zlib rc " + std::to_string(rc) + ")");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::string& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    return gunzip(bytes, path);
  }
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off,
                        const std::string& path) {
  if (off + 4 > b.size()) {
    throw ParseError(path + ": truncated at byte offset " + std::to_string(b.size()) +
                     ", expected 4 bytes at " + std::to_string(off));
  }
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes,
                 bool gzip_out) {
  if (gzip_out) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open " + path + " for writing");
    if (gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())) !=
        static_cast<int>(bytes.size())) {
      gzclose(f);
      throw IoError("short gzip write to " + path);
    }
    gzclose(f);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::string hex32(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x00000000";
  for (int i = 0; i < 8; ++i) s[9 - i] = digits[(v >> (4 * i)) & 0xF];
  return s;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_maybe_gzip(images_path);
  const auto lab = read_maybe_gzip(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != kImagesMagic) {
    throw ParseError(images_path + ": bad magic " + hex32(img_magic) +
                     " at byte offset 0, expected 0x00000803");
  }
  const std::uint32_t n = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::size_t dim = std::size_t(rows) * cols;
  const std::size_t need = 16 + std::size_t(n) * dim;
  if (img.size() < need) {
    throw ParseError(images_path + ": truncated at byte offset " +
                     std::to_string(img.size()) + ", expected " + std::to_string(need));
  }

  const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != kLabelsMagic) {
    throw ParseError(labels_path + ": bad magic " + hex32(lab_magic) +
                     " at byte offset 0, expected 0x00000801");
  }
  const std::uint32_t n_lab = read_be32(lab, 4, labels_path);
  if (n_lab != n) {
    throw ParseError(labels_path + ": " + std::to_string(n_lab) + " labels for " +
                     std::to_string(n) + " images");
  }
  if (lab.size() < 8 + n) {
    throw ParseError(labels_path + ": truncated at byte offset " +
                     std::to_string(lab.size()) + ", expected " + std::to_string(8 + n));
  }

  Dataset ds;
  ds.name = "idx";
  ds.features = Matrix(n, dim);
  ds.labels.resize(n);
  ds.norm.kind = Normalization::Kind::kScale255;
  for (std::size_t s = 0; s < n; ++s) {
    double* row = ds.features.row(s);
    const std::uint8_t* px = img.data() + 16 + s * dim;
    for (std::size_t j = 0; j < dim; ++j) row[j] = px[j] / 255.0;
    ds.labels[s] = lab[8 + s];
  }
  int max_label = 0;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  ds.class_count = max_label + 1;
  return ds;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::size_t count, std::size_t rows, std::size_t cols, bool gzip) {
  if (pixels.size() != count * rows * cols) {
    throw ValidationError("write_idx_images: pixel count " + std::to_string(pixels.size()) +
                          " != " + std::to_string(count * rows * cols));
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + pixels.size());
  append_be32(out, kImagesMagic);
  append_be32(out, static_cast<std::uint32_t>(count));
  append_be32(out, static_cast<std::uint32_t>(rows));
  append_be32(out, static_cast<std::uint32_t>(cols));
  out.insert(out.end(), pixels.begin(), pixels.end());
  write_bytes(path, out, gzip);
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels,
                      bool gzip) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  append_be32(out, kLabelsMagic);
  append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  write_bytes(path, out, gzip);
}

Dataset synth_blobs(std::size_t n_per_class, int classes, std::size_t dims, double spread,
                    Rng& rng) {
  if (classes < 2) throw ValidationError("synth_blobs: need >= 2 classes");
  if (dims < 2) throw ValidationError("synth_blobs: need >= 2 dims");
  Dataset ds;
  ds.name = "blobs";
  ds.class_count = classes;
  const std::size_t n = n_per_class * static_cast<std::size_t>(classes);
  ds.features = Matrix(n, dims);
  ds.labels.resize(n);

  Matrix centers(static_cast<std::size_t>(classes), dims);
  for (double& v : centers.data) v = rng.uniform(-3.0, 3.0);

  std::size_t row = 0;
  for (int c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < n_per_class; ++k, ++row) {
      double* out = ds.features.row(row);
      const double* ctr = centers.row(static_cast<std::size_t>(c));
      for (std::size_t j = 0; j < dims; ++j) out[j] = ctr[j] + spread * rng.normal();
      ds.labels[row] = c;
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& ds,
                                            std::size_t n_train_per_class) {
  std::vector<std::size_t> train_idx, test_idx;
  std::vector<std::size_t> seen(static_cast<std::size_t>(ds.class_count), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& count = seen[static_cast<std::size_t>(ds.labels[i])];
    (count < n_train_per_class ? train_idx : test_idx).push_back(i);
    ++count;
  }
  auto build = [&ds](const std::vector<std::size_t>& idx) {
    Dataset out;
    out.name = ds.name;
    out.class_count = ds.class_count;
    out.norm = ds.norm;
    out.features = gather_rows(ds.features, idx);
    out.labels = gather_labels(ds.labels, idx);
    return out;
  };
  return {build(train_idx), build(test_idx)};
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch) {
  if (batch_size < 1) throw ValidationError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(Rng::mix(seed, 0xBA7C4 + epoch));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  out.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

void standardize(Dataset& train, Dataset& test) {
  const std::size_t d = train.dim();
  if (test.dim() != d) {
    throw DimensionError("standardize: train dim " + std::to_string(d) + " vs test dim " +
                         std::to_string(test.dim()));
  }
  std::vector<double> mean(d, 0.0), stddev(d, 0.0);
  const double n = static_cast<double>(train.size());
  for (std::size_t s = 0; s < train.size(); ++s) {
    const double* row = train.features.row(s);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= n;
  for (std::size_t s = 0; s < train.size(); ++s) {
    const double* row = train.features.row(s);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = row[j] - mean[j];
      stddev[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    stddev[j] = std::sqrt(stddev[j] / n);
    if (stddev[j] == 0.0) stddev[j] = 1.0;  // constant feature: leave centered
  }
  auto apply = [&](Dataset& ds) {
    for (std::size_t s = 0; s < ds.size(); ++s) {
      double* row = ds.features.row(s);
      for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mean[j]) / stddev[j];
    }
    ds.norm.kind = Normalization::Kind::kStandardize;
    ds.norm.mean = mean;
    ds.norm.stddev = stddev;
  };
  apply(train);
  apply(test);
}

Matrix gather_rows(const Matrix& features, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), features.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(out.row(i), features.row(idx[i]), features.cols * sizeof(double));
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

}  // namespace gatednet
