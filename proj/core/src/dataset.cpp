#include "corgi/dataset.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <sstream>

#include "corgi/rng.hpp"

namespace corgi {
namespace {

constexpr char kMagic[4] = {'C', 'G', 'D', 'S'};
constexpr char kTailMagic[4] = {'C', 'G', 'I', 'X'};
constexpr std::uint64_t kHeaderSize = 64;
constexpr std::uint64_t kEntrySize = 28;  // offset + length + tuple_count + crc

void append_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void append_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void append_f32(std::string& b, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  append_u32(b, u);
}

std::uint32_t load_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint64_t load_u64(const unsigned char* p) {
  return static_cast<std::uint64_t>(load_u32(p)) |
         (static_cast<std::uint64_t>(load_u32(p + 4)) << 32);
}
float load_f32(const unsigned char* p) {
  const std::uint32_t u = load_u32(p);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

std::uint32_t payload_crc(const void* data, std::size_t len) {
  return static_cast<std::uint32_t>(
      crc32_z(crc32_z(0, nullptr, 0), static_cast<const Bytef*>(data), len));
}

void encode_tuple(std::string& b, const Tuple& t, Encoding enc) {
  append_u64(b, t.id);
  append_f32(b, t.label);
  if (enc == Encoding::Dense) {
    for (float f : t.dense) append_f32(b, f);
  } else {
    append_u32(b, static_cast<std::uint32_t>(t.idx.size()));
    for (std::size_t k = 0; k < t.idx.size(); ++k) {
      append_u32(b, t.idx[k]);
      append_f32(b, t.val[k]);
    }
  }
}

// Decodes one tuple at *cursor, advancing it. Throws on truncation.
Tuple decode_tuple(const unsigned char* buf, std::size_t len, std::size_t& cursor,
                   Encoding enc, std::uint64_t dim) {
  auto need = [&](std::size_t n) {
    if (cursor + n > len) throw FormatError("truncated tuple in block payload");
  };
  Tuple t;
  need(12);
  t.id = load_u64(buf + cursor);
  t.label = load_f32(buf + cursor + 8);
  cursor += 12;
  if (enc == Encoding::Dense) {
    need(4 * dim);
    t.dense.resize(dim);
    for (std::uint64_t j = 0; j < dim; ++j) t.dense[j] = load_f32(buf + cursor + 4 * j);
    cursor += 4 * dim;
  } else {
    need(4);
    const std::uint32_t nnz = load_u32(buf + cursor);
    cursor += 4;
    need(8ull * nnz);
    t.idx.resize(nnz);
    t.val.resize(nnz);
    for (std::uint32_t k = 0; k < nnz; ++k) {
      t.idx[k] = load_u32(buf + cursor);
      t.val[k] = load_f32(buf + cursor + 4);
      cursor += 8;
    }
  }
  return t;
}

void validate_meta(const DatasetMeta& m) {
  if (m.dimension == 0) throw InvalidArgument("dataset dimension must be >= 1");
  if (m.block_size_bytes < 16) throw InvalidArgument("block size too small");
  if (m.task == Task::Binary && m.num_classes != 2)
    throw InvalidArgument("binary task requires num_classes == 2");
  if (m.task == Task::Multiclass && m.num_classes < 2)
    throw InvalidArgument("multiclass task requires num_classes >= 2");
}

}  // namespace

// ---------------------------------------------------------------------------
// DatasetWriter

DatasetWriter::DatasetWriter(std::string path, DatasetMeta meta)
    : path_(std::move(path)), meta_(meta) {
  validate_meta(meta_);
  meta_.version = 1;
  if (meta_.encoding == Encoding::Dense) {
    const std::uint64_t per = 12 + 4 * meta_.dimension;
    meta_.tuples_per_block = meta_.block_size_bytes / per;
    if (meta_.tuples_per_block == 0)
      throw InvalidArgument("block size smaller than one dense tuple");
  } else {
    meta_.tuples_per_block = 0;
  }
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error("cannot create dataset file: " + path_);
  // Header placeholder; counts and footer offset are patched by finalize().
  std::string zeros(kHeaderSize, '\0');
  out_.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
  block_buf_.reserve(meta_.block_size_bytes);
}

DatasetWriter::~DatasetWriter() = default;

void DatasetWriter::append(const Tuple& t) {
  if (finalized_) throw InvalidArgument("append after finalize");
  if (meta_.encoding == Encoding::Dense) {
    if (t.dense.size() != meta_.dimension || !t.idx.empty())
      throw InvalidArgument("dense dataset requires dense tuples of length d");
  } else {
    if (!t.dense.empty()) throw InvalidArgument("sparse dataset got a dense tuple");
    if (t.idx.size() != t.val.size())
      throw InvalidArgument("sparse tuple index/value size mismatch");
    for (std::size_t k = 0; k < t.idx.size(); ++k) {
      if (t.idx[k] >= meta_.dimension) {
        std::ostringstream os;
        os << "tuple " << t.id << ": feature index " << t.idx[k]
           << " out of range for dimension " << meta_.dimension;
        throw InvalidArgument(os.str());
      }
      if (k > 0 && t.idx[k] <= t.idx[k - 1])
        throw InvalidArgument("sparse tuple indices must be strictly increasing");
    }
  }
  const std::size_t sz = encoded_size(t, meta_.encoding, meta_.dimension);
  if (sz > meta_.block_size_bytes)
    throw InvalidArgument("single tuple larger than block size");
  if (block_tuples_ > 0 && block_buf_.size() + sz > meta_.block_size_bytes) flush_block();
  encode_tuple(block_buf_, t, meta_.encoding);
  ++block_tuples_;
  ++written_tuples_;
}

void DatasetWriter::flush_block() {
  if (block_tuples_ == 0) return;
  BlockEntry e;
  e.offset = kHeaderSize;
  for (const BlockEntry& prev : entries_) e.offset += prev.length;
  e.length = block_buf_.size();
  e.tuple_count = block_tuples_;
  e.crc32 = payload_crc(block_buf_.data(), block_buf_.size());
  out_.write(block_buf_.data(), static_cast<std::streamsize>(block_buf_.size()));
  entries_.push_back(e);
  block_buf_.clear();
  block_tuples_ = 0;
}

DatasetMeta DatasetWriter::finalize() {
  if (finalized_) throw InvalidArgument("finalize called twice");
  if (written_tuples_ == 0) throw InvalidArgument("dataset has no tuples");
  flush_block();
  const std::uint64_t footer_offset =
      kHeaderSize + std::accumulate(entries_.begin(), entries_.end(), std::uint64_t{0},
                                    [](std::uint64_t a, const BlockEntry& e) {
                                      return a + e.length;
                                    });
  std::string footer;
  for (const BlockEntry& e : entries_) {
    append_u64(footer, e.offset);
    append_u64(footer, e.length);
    append_u64(footer, e.tuple_count);
    append_u32(footer, e.crc32);
  }
  const std::uint32_t footer_crc = payload_crc(footer.data(), footer.size());
  append_u32(footer, footer_crc);
  footer.append(kTailMagic, 4);
  out_.write(footer.data(), static_cast<std::streamsize>(footer.size()));

  meta_.tuple_count = written_tuples_;
  std::string header;
  header.append(kMagic, 4);
  append_u32(header, meta_.version);
  header.push_back(static_cast<char>(meta_.task));
  header.push_back(static_cast<char>(meta_.encoding));
  header.push_back('\0');
  header.push_back('\0');
  append_u32(header, meta_.num_classes);
  append_u64(header, meta_.tuple_count);
  append_u64(header, meta_.dimension);
  append_u64(header, meta_.block_size_bytes);
  append_u64(header, meta_.tuples_per_block);
  append_u64(header, entries_.size());
  append_u64(header, footer_offset);
  if (header.size() != kHeaderSize) throw Error("internal: header size mismatch");
  out_.seekp(0);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
  out_.close();
  if (!out_) throw Error("write failure on " + path_);
  finalized_ = true;
  return meta_;
}

// ---------------------------------------------------------------------------
// DatasetReader

DatasetReader::DatasetReader(std::string path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_RDONLY);
  if (fd_ < 0) throw Error("cannot open dataset file: " + path_);
  const off_t fsz = ::lseek(fd_, 0, SEEK_END);
  if (fsz < static_cast<off_t>(kHeaderSize + 8))
    throw FormatError("file too small to be a dataset: " + path_);

  unsigned char hdr[kHeaderSize];
  pread_exact(hdr, kHeaderSize, 0);
  if (std::memcmp(hdr, kMagic, 4) != 0) throw FormatError("bad magic in " + path_);
  meta_.version = load_u32(hdr + 4);
  if (meta_.version != 1) throw FormatError("unsupported dataset version");
  if (hdr[8] > 2 || hdr[9] > 1) throw FormatError("bad task/encoding byte");
  meta_.task = static_cast<Task>(hdr[8]);
  meta_.encoding = static_cast<Encoding>(hdr[9]);
  meta_.num_classes = load_u32(hdr + 12);
  meta_.tuple_count = load_u64(hdr + 16);
  meta_.dimension = load_u64(hdr + 24);
  meta_.block_size_bytes = load_u64(hdr + 32);
  meta_.tuples_per_block = load_u64(hdr + 40);
  const std::uint64_t block_count = load_u64(hdr + 48);
  const std::uint64_t footer_offset = load_u64(hdr + 56);

  const std::uint64_t expect_size = footer_offset + block_count * kEntrySize + 4 + 4;
  if (static_cast<std::uint64_t>(fsz) != expect_size)
    throw FormatError("file size does not match header in " + path_);

  std::vector<unsigned char> footer(block_count * kEntrySize + 8);
  pread_exact(footer.data(), footer.size(), footer_offset);
  if (std::memcmp(footer.data() + footer.size() - 4, kTailMagic, 4) != 0)
    throw FormatError("bad tail magic in " + path_);
  const std::uint32_t want_crc = load_u32(footer.data() + footer.size() - 8);
  if (payload_crc(footer.data(), block_count * kEntrySize) != want_crc)
    throw IntegrityError("block index checksum mismatch in " + path_);

  entries_.resize(block_count);
  std::uint64_t covered = kHeaderSize, tuples = 0;
  for (std::uint64_t i = 0; i < block_count; ++i) {
    const unsigned char* p = footer.data() + i * kEntrySize;
    entries_[i].offset = load_u64(p);
    entries_[i].length = load_u64(p + 8);
    entries_[i].tuple_count = load_u64(p + 16);
    entries_[i].crc32 = load_u32(p + 24);
    if (entries_[i].offset != covered)
      throw IntegrityError("block index does not cover the data region contiguously");
    covered += entries_[i].length;
    tuples += entries_[i].tuple_count;
  }
  if (covered != footer_offset)
    throw IntegrityError("block index does not reach the footer");
  if (tuples != meta_.tuple_count)
    throw IntegrityError("block index tuple counts do not sum to the header count");
}

DatasetReader::~DatasetReader() {
  if (fd_ >= 0) ::close(fd_);
}

void DatasetReader::pread_exact(void* dst, std::uint64_t len, std::uint64_t offset) const {
  std::uint64_t done = 0;
  while (done < len) {
    const ssize_t r = ::pread(fd_, static_cast<char*>(dst) + done, len - done,
                              static_cast<off_t>(offset + done));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error("read failure on " + path_);
    }
    if (r == 0) throw FormatError("unexpected end of file in " + path_);
    done += static_cast<std::uint64_t>(r);
  }
}

std::vector<Tuple> DatasetReader::read_block(std::uint64_t block_id) const {
  if (block_id >= entries_.size()) throw InvalidArgument("block id out of range");
  const BlockEntry& e = entries_[block_id];
  std::vector<unsigned char> buf(e.length);
  pread_exact(buf.data(), e.length, e.offset);
  bytes_read_.fetch_add(e.length, std::memory_order_relaxed);
  if (payload_crc(buf.data(), buf.size()) != e.crc32) {
    std::ostringstream os;
    os << "checksum mismatch in block " << block_id << " of " << path_;
    throw IntegrityError(os.str());
  }
  std::vector<Tuple> tuples;
  tuples.reserve(e.tuple_count);
  std::size_t cursor = 0;
  for (std::uint64_t k = 0; k < e.tuple_count; ++k)
    tuples.push_back(decode_tuple(buf.data(), buf.size(), cursor, meta_.encoding,
                                  meta_.dimension));
  if (cursor != buf.size())
    throw FormatError("trailing bytes after last tuple in block");
  return tuples;
}

std::vector<DatasetReader::TupleLoc> DatasetReader::tuple_locations(
    std::uint64_t budget_bytes) const {
  const std::uint64_t need = meta_.tuple_count * sizeof(TupleLoc);
  if (need > budget_bytes) {
    std::ostringstream os;
    os << "tuple location table needs " << need << " bytes, budget is "
       << budget_bytes;
    throw InvalidArgument(os.str());
  }
  std::vector<TupleLoc> locs;
  locs.reserve(meta_.tuple_count);
  if (meta_.encoding == Encoding::Dense) {
    const std::uint64_t stride = 12 + 4 * meta_.dimension;
    for (const BlockEntry& e : entries_)
      for (std::uint64_t k = 0; k < e.tuple_count; ++k)
        locs.push_back({e.offset + k * stride, static_cast<std::uint32_t>(stride)});
  } else {
    // Sparse tuples have variable size: one sequential scan finds them.
    for (std::uint64_t b = 0; b < entries_.size(); ++b) {
      const BlockEntry& e = entries_[b];
      std::vector<unsigned char> buf(e.length);
      pread_exact(buf.data(), e.length, e.offset);
      bytes_read_.fetch_add(e.length, std::memory_order_relaxed);
      std::size_t cursor = 0;
      for (std::uint64_t k = 0; k < e.tuple_count; ++k) {
        const std::size_t start = cursor;
        (void)decode_tuple(buf.data(), buf.size(), cursor, meta_.encoding,
                           meta_.dimension);
        locs.push_back({e.offset + start, static_cast<std::uint32_t>(cursor - start)});
      }
    }
  }
  return locs;
}

Tuple DatasetReader::read_tuple(const TupleLoc& loc) const {
  std::vector<unsigned char> buf(loc.length);
  pread_exact(buf.data(), loc.length, loc.offset);
  bytes_read_.fetch_add(loc.length, std::memory_order_relaxed);
  std::size_t cursor = 0;
  Tuple t = decode_tuple(buf.data(), buf.size(), cursor, meta_.encoding, meta_.dimension);
  if (cursor != buf.size()) throw FormatError("tuple length mismatch");
  return t;
}

// ---------------------------------------------------------------------------
// Synthetic data

DatasetMeta generate_synthetic(const SyntheticSpec& spec, const std::string& path,
                               std::uint64_t block_size_bytes) {
  if (spec.tuple_count == 0) throw InvalidArgument("tuple_count must be >= 1");
  if (spec.dimension == 0) throw InvalidArgument("dimension must be >= 1");
  if (spec.noise_stddev < 0) throw InvalidArgument("noise_stddev must be >= 0");
  std::uint32_t classes = 0;
  switch (spec.task) {
    case Task::Binary: classes = 2; break;
    case Task::Multiclass: classes = spec.num_classes; break;
    case Task::Regression: classes = 1; break;
  }
  if (spec.task == Task::Multiclass && classes < 2)
    throw InvalidArgument("multiclass needs num_classes >= 2");
  if (spec.class_means.size() != classes)
    throw InvalidArgument("class_means must hold one vector per class");
  for (const auto& mvec : spec.class_means)
    if (mvec.size() != spec.dimension)
      throw InvalidArgument("class mean dimension mismatch");
  if (spec.order == SyntheticSpec::Order::FeatureOrdered &&
      spec.order_feature >= spec.dimension)
    throw InvalidArgument("order_feature out of range");

  auto g = rng::engine(spec.seed, rng::Purpose::Synthesis);
  std::normal_distribution<float> gauss(0.0f, 1.0f);

  const std::uint64_t m = spec.tuple_count;
  std::vector<Tuple> tuples;
  tuples.reserve(m);
  // Lower class ids first; sizes balanced to within one tuple, earlier
  // classes take the remainder.
  const std::uint64_t base = m / classes, rem = m % classes;
  for (std::uint32_t c = 0; c < classes; ++c) {
    const std::uint64_t count = base + (c < rem ? 1 : 0);
    for (std::uint64_t k = 0; k < count; ++k) {
      Tuple t;
      t.dense.resize(spec.dimension);
      for (std::uint64_t j = 0; j < spec.dimension; ++j)
        t.dense[j] = spec.class_means[c][j] + spec.noise_stddev * gauss(g);
      switch (spec.task) {
        case Task::Binary:
          t.label = (c == 0) ? -1.0f : 1.0f;
          break;
        case Task::Multiclass:
          t.label = static_cast<float>(c);
          break;
        case Task::Regression: {
          double s = 0.0;
          for (float f : t.dense) s += f;
          t.label = static_cast<float>(s) + spec.noise_stddev * gauss(g);
          break;
        }
      }
      tuples.push_back(std::move(t));
    }
  }

  switch (spec.order) {
    case SyntheticSpec::Order::LabelClustered:
      break;  // already grouped by class
    case SyntheticSpec::Order::Shuffled:
      rng::fisher_yates(tuples, g);
      break;
    case SyntheticSpec::Order::FeatureOrdered:
      std::stable_sort(tuples.begin(), tuples.end(),
                       [&](const Tuple& a, const Tuple& b) {
                         return a.dense[spec.order_feature] < b.dense[spec.order_feature];
                       });
      break;
  }
  for (std::uint64_t i = 0; i < m; ++i) tuples[i].id = i;

  DatasetMeta meta;
  meta.task = spec.task;
  meta.encoding = Encoding::Dense;
  meta.num_classes = (spec.task == Task::Regression) ? 0 : classes;
  meta.dimension = spec.dimension;
  meta.block_size_bytes = block_size_bytes;
  DatasetWriter w(path, meta);
  for (const Tuple& t : tuples) w.append(t);
  return w.finalize();
}

// ---------------------------------------------------------------------------
// LIBSVM ingestion

DatasetMeta ingest_libsvm(const std::string& text_path, const std::string& out_path,
                          const IngestOptions& opt) {
  std::ifstream in(text_path);
  if (!in) throw Error("cannot open " + text_path);

  std::vector<Tuple> tuples;
  std::uint64_t max_index = 0;  // 0-based max seen
  bool any_feature = false;
  std::string line;
  std::uint64_t lineno = 0;
  auto fail = [&](const std::string& what) {
    std::ostringstream os;
    os << text_path << ":" << lineno << ": " << what;
    throw ParseError(os.str());
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) fail("missing label");
    char* end = nullptr;
    const double label = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("bad label '" + tok + "'");
    Tuple t;
    t.id = tuples.size();
    t.label = static_cast<float>(label);
    if (opt.task == Task::Binary && label != 1.0 && label != -1.0)
      fail("binary label must be +1 or -1");
    if (opt.task == Task::Multiclass &&
        (label < 0 || label != std::floor(label) ||
         (opt.num_classes > 0 && label >= opt.num_classes)))
      fail("multiclass label must be an integer class id");
    while (ls >> tok) {
      const std::size_t colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        fail("bad feature token '" + tok + "'");
      errno = 0;
      const long long raw = std::strtoll(tok.c_str(), &end, 10);
      if (end != tok.c_str() + colon || errno != 0 || raw < 1)
        fail("feature index must be a 1-based integer in '" + tok + "'");
      const char* vs = tok.c_str() + colon + 1;
      const double v = std::strtod(vs, &end);
      if (end == vs || *end != '\0') fail("bad feature value in '" + tok + "'");
      const std::uint64_t zero_based = static_cast<std::uint64_t>(raw) - 1;
      if (!t.idx.empty() && zero_based <= t.idx.back())
        fail("feature indices must be strictly increasing");
      if (opt.dimension > 0 && zero_based >= opt.dimension) {
        std::ostringstream os;
        os << "feature index " << raw << " exceeds dimension " << opt.dimension;
        fail(os.str());
      }
      t.idx.push_back(static_cast<std::uint32_t>(zero_based));
      t.val.push_back(static_cast<float>(v));
      max_index = std::max(max_index, zero_based);
      any_feature = true;
    }
    tuples.push_back(std::move(t));
  }
  if (tuples.empty()) throw ParseError(text_path + ": no tuples found");

  DatasetMeta meta;
  meta.task = opt.task;
  meta.encoding = opt.encoding;
  meta.num_classes = (opt.task == Task::Regression) ? 0
                     : (opt.task == Task::Binary)   ? 2
                                                    : opt.num_classes;
  meta.dimension = opt.dimension > 0 ? opt.dimension : (any_feature ? max_index + 1 : 1);
  meta.block_size_bytes = opt.block_size_bytes;
  DatasetWriter w(out_path, meta);
  if (opt.encoding == Encoding::Dense) {
    for (Tuple& t : tuples) {
      Tuple d;
      d.id = t.id;
      d.label = t.label;
      d.dense.assign(meta.dimension, 0.0f);
      for (std::size_t k = 0; k < t.idx.size(); ++k) d.dense[t.idx[k]] = t.val[k];
      w.append(d);
    }
  } else {
    for (const Tuple& t : tuples) w.append(t);
  }
  return w.finalize();
}

// ---------------------------------------------------------------------------
// Reorderings

namespace {

// Shared rewrite: apply `perm` (output position -> source tuple) by random
// single-tuple reads against the location table.
DatasetMeta rewrite_permuted(DatasetReader& r, const std::vector<std::uint64_t>& perm,
                             const std::string& out_path) {
  const auto locs = r.tuple_locations(256ull << 20);
  DatasetWriter w(out_path, r.meta());
  for (std::uint64_t src : perm) w.append(r.read_tuple(locs[src]));
  return w.finalize();
}

// Sequential scan of all tuples, applying fn(position, tuple).
template <typename Fn>
void scan_tuples(DatasetReader& r, Fn&& fn) {
  std::uint64_t pos = 0;
  for (std::uint64_t b = 0; b < r.block_count(); ++b)
    for (Tuple& t : r.read_block(b)) fn(pos++, t);
}

}  // namespace

DatasetMeta order_by_label(const std::string& in_path, const std::string& out_path) {
  DatasetReader r(in_path);
  std::vector<float> keys(r.meta().tuple_count);
  scan_tuples(r, [&](std::uint64_t pos, Tuple& t) { keys[pos] = t.label; });
  std::vector<std::uint64_t> perm(keys.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint64_t a, std::uint64_t b) { return keys[a] < keys[b]; });
  return rewrite_permuted(r, perm, out_path);
}

DatasetMeta order_by_feature(const std::string& in_path, std::uint32_t feature,
                             const std::string& out_path) {
  DatasetReader r(in_path);
  if (feature >= r.meta().dimension)
    throw InvalidArgument("order_by_feature: feature index out of range");
  std::vector<float> keys(r.meta().tuple_count);
  scan_tuples(r, [&](std::uint64_t pos, Tuple& t) {
    float v = 0.0f;  // sparse tuples: a missing coordinate reads as zero
    if (t.is_dense()) {
      v = t.dense[feature];
    } else {
      for (std::size_t k = 0; k < t.idx.size(); ++k)
        if (t.idx[k] == feature) {
          v = t.val[k];
          break;
        }
    }
    keys[pos] = v;
  });
  std::vector<std::uint64_t> perm(keys.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint64_t a, std::uint64_t b) { return keys[a] < keys[b]; });
  return rewrite_permuted(r, perm, out_path);
}

DatasetMeta full_shuffle(const std::string& in_path, const std::string& out_path,
                         std::uint64_t seed, std::uint64_t budget_bytes) {
  DatasetReader r(in_path);
  const auto locs = r.tuple_locations(budget_bytes);
  std::vector<std::uint64_t> perm(locs.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto g = rng::engine(seed, rng::Purpose::FullShuffle);
  rng::fisher_yates(perm, g);
  DatasetWriter w(out_path, r.meta());
  for (std::uint64_t src : perm) w.append(r.read_tuple(locs[src]));
  return w.finalize();
}

std::uint32_t file_crc32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<char> buf(1 << 20);
  uLong crc = crc32_z(0, nullptr, 0);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize got = in.gcount();
    if (got > 0)
      crc = crc32_z(crc, reinterpret_cast<const Bytef*>(buf.data()),
                    static_cast<std::size_t>(got));
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace corgi
