#include "banditfh/action_table.hpp"

#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <system_error>
#include <type_traits>

#include "banditfh/errors.hpp"

namespace banditfh {

namespace {

void put_bytes(std::vector<std::uint8_t>& out, const void* src, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(src);
  out.insert(out.end(), p, p + n);
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  put_bytes(out, &value, sizeof value);  // little-endian host assumed
}

template <class T>
T read_le(const std::uint8_t* p) {
  T value;
  std::memcpy(&value, p, sizeof value);
  return value;
}

std::vector<std::uint8_t> encode_header(const PriorSpec& prior, std::uint32_t horizon,
                                        double bayes, std::uint64_t payload_len) {
  std::vector<std::uint8_t> h;
  h.reserve(kTableHeaderBytes);
  put_bytes(h, kTableMagic, 4);
  put_le<std::uint16_t>(h, kTableVersion);
  put_le<std::uint32_t>(h, horizon);
  put_le<double>(h, prior.s_c0);
  put_le<double>(h, prior.f_c0);
  put_le<double>(h, prior.s_d0);
  put_le<double>(h, prior.f_d0);
  put_le<double>(h, bayes);
  put_le<std::uint64_t>(h, payload_len);
  return h;
}

struct HeaderFields {
  std::uint32_t horizon;
  PriorSpec prior;
  double bayes;
  std::uint64_t payload_len;
};

HeaderFields decode_header(const std::uint8_t* h) {
  if (std::memcmp(h, kTableMagic, 4) != 0)
    throw TableFormatError("not an action-table file (bad magic)");
  const auto version = read_le<std::uint16_t>(h + 4);
  if (version != kTableVersion)
    throw TableFormatError("unsupported action-table version " + std::to_string(version));
  HeaderFields f;
  f.horizon = read_le<std::uint32_t>(h + 6);
  f.prior.s_c0 = read_le<double>(h + 10);
  f.prior.f_c0 = read_le<double>(h + 18);
  f.prior.s_d0 = read_le<double>(h + 26);
  f.prior.f_d0 = read_le<double>(h + 34);
  f.bayes = read_le<double>(h + 42);
  f.payload_len = read_le<std::uint64_t>(h + 50);
  return f;
}

std::vector<std::uint64_t> build_layer_offsets(const LayerIndexer& idx) {
  std::vector<std::uint64_t> offsets(idx.horizon() + 2);
  offsets[0] = 0;
  for (std::uint32_t t = 0; t <= idx.horizon(); ++t)
    offsets[t + 1] = offsets[t] + packed_layer_bytes(idx.layer_size(t));
  return offsets;
}

std::FILE* open_or_throw(const std::filesystem::path& path, const char* mode) {
  std::FILE* f = std::fopen(path.c_str(), mode);
  if (f == nullptr)
    throw std::system_error(errno, std::generic_category(),
                            "cannot open '" + path.string() + "'");
  return f;
}

void seek_or_throw(std::FILE* f, std::uint64_t pos) {
  if (fseeko(f, static_cast<off_t>(pos), SEEK_SET) != 0)
    throw std::system_error(errno, std::generic_category(), "seek failed");
}

void write_or_throw(std::FILE* f, const void* data, std::size_t n) {
  if (std::fwrite(data, 1, n, f) != n)
    throw std::system_error(errno, std::generic_category(), "write failed");
}

void read_or_throw(std::FILE* f, void* data, std::size_t n, const char* what) {
  if (std::fread(data, 1, n, f) != n) throw TableFormatError(what);
}

}  // namespace

std::uint64_t packed_layer_bytes(std::uint64_t layer_states) { return (layer_states + 3) / 4; }

std::uint64_t packed_payload_bytes(const LayerIndexer& idx) {
  std::uint64_t total = 0;
  for (std::uint32_t t = 0; t <= idx.horizon(); ++t)
    total += packed_layer_bytes(idx.layer_size(t));
  return total;
}

void pack_codes(std::span<const Action> codes, std::span<std::uint8_t> out) {
  if (out.size() < packed_layer_bytes(codes.size()))
    throw std::invalid_argument("pack_codes output buffer too small");
  std::size_t i = 0;
  for (; i + 4 <= codes.size(); i += 4) {
    out[i / 4] = static_cast<std::uint8_t>(
        std::uint8_t(codes[i]) | (std::uint8_t(codes[i + 1]) << 2) |
        (std::uint8_t(codes[i + 2]) << 4) | (std::uint8_t(codes[i + 3]) << 6));
  }
  if (i < codes.size()) {
    std::uint8_t acc = 0;
    for (std::size_t j = i; j < codes.size(); ++j)
      acc |= std::uint8_t(std::uint8_t(codes[j]) << (2 * (j - i)));
    out[i / 4] = acc;
  }
}

void unpack_codes(std::span<const std::uint8_t> packed, std::span<Action> out) {
  if (packed.size() < packed_layer_bytes(out.size()))
    throw std::invalid_argument("unpack_codes input buffer too small");
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<Action>((packed[i / 4] >> (2 * (i % 4))) & 3u);
}

ActionTable::ActionTable(const PriorSpec& prior, std::uint32_t horizon)
    : prior_(prior), indexer_(horizon) {
  layer_offsets_ = build_layer_offsets(indexer_);
  payload_.assign(layer_offsets_.back(), 0);
}

Action ActionTable::code(std::uint32_t t, std::uint64_t rank) const {
  if (t > horizon() || rank >= indexer_.layer_size(t))
    throw std::domain_error("action lookup outside the lattice");
  const std::uint8_t byte = payload_[layer_offsets_[t] + rank / 4];
  return static_cast<Action>((byte >> (2 * (rank % 4))) & 3u);
}

Action ActionTable::code_at(const PhysicalState& x) const {
  return code(x.epoch(), indexer_.rank(x));
}

void ActionTable::set_layer(std::uint32_t t, std::span<const std::uint8_t> packed) {
  const std::uint64_t bytes = layer_offsets_[t + 1] - layer_offsets_[t];
  if (packed.size() != bytes) throw std::invalid_argument("packed layer size mismatch");
  std::memcpy(payload_.data() + layer_offsets_[t], packed.data(), packed.size());
}

std::span<const std::uint8_t> ActionTable::layer(std::uint32_t t) const {
  if (t > horizon()) throw std::domain_error("layer beyond horizon");
  return {payload_.data() + layer_offsets_[t], layer_offsets_[t + 1] - layer_offsets_[t]};
}

void save_table(const ActionTable& table, const std::filesystem::path& path) {
  const auto header =
      encode_header(table.prior(), table.horizon(), table.bayes_successes(),
                    table.payload_bytes());
  std::FILE* f = open_or_throw(path, "wb");
  try {
    write_or_throw(f, header.data(), header.size());
    write_or_throw(f, table.payload().data(), table.payload().size());
    const auto crc = static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), table.payload().data(),
              static_cast<uInt>(table.payload().size())));
    write_or_throw(f, &crc, sizeof crc);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  if (std::fclose(f) != 0)
    throw std::system_error(errno, std::generic_category(), "close failed");
}

ActionTable load_table(const std::filesystem::path& path) {
  std::FILE* f = open_or_throw(path, "rb");
  try {
    std::uint8_t header[kTableHeaderBytes];
    read_or_throw(f, header, sizeof header, "truncated action-table header");
    const HeaderFields fields = decode_header(header);
    fields.prior.validate();
    ActionTable table(fields.prior, fields.horizon);
    if (fields.payload_len != table.payload_bytes())
      throw TableFormatError("payload length does not match the stored horizon");
    std::vector<std::uint8_t> payload(fields.payload_len);
    read_or_throw(f, payload.data(), payload.size(), "truncated action-table payload");
    std::uint32_t stored_crc;
    read_or_throw(f, &stored_crc, sizeof stored_crc, "missing action-table checksum");
    const auto crc = static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), payload.data(), static_cast<uInt>(payload.size())));
    if (crc != stored_crc) throw TableFormatError("action-table checksum mismatch");
    std::uint64_t offset = 0;
    for (std::uint32_t t = 0; t <= fields.horizon; ++t) {
      const std::uint64_t bytes = packed_layer_bytes(table.indexer().layer_size(t));
      table.set_layer(t, {payload.data() + offset, bytes});
      offset += bytes;
    }
    table.set_bayes_successes(fields.bayes);
    std::fclose(f);
    return table;
  } catch (...) {
    std::fclose(f);
    throw;
  }
}

TableFileWriter::TableFileWriter(const std::filesystem::path& path, const PriorSpec& prior,
                                 std::uint32_t horizon)
    : path_(path), indexer_(horizon) {
  layer_offsets_ = build_layer_offsets(indexer_);
  layer_crc_.assign(horizon + 1, 0);
  layer_written_.assign(horizon + 1, false);
  file_ = open_or_throw(path, "wb");
  const auto header = encode_header(prior, horizon, 0.0, layer_offsets_.back());
  try {
    write_or_throw(file_, header.data(), header.size());
  } catch (...) {
    std::fclose(file_);
    file_ = nullptr;
    throw;
  }
}

TableFileWriter::~TableFileWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void TableFileWriter::write_layer(std::uint32_t t, std::span<const std::uint8_t> packed) {
  if (finished_ || file_ == nullptr) throw std::logic_error("writer already finished");
  const std::uint64_t bytes = layer_offsets_[t + 1] - layer_offsets_[t];
  if (t > indexer_.horizon() || packed.size() != bytes)
    throw std::invalid_argument("packed layer size mismatch");
  seek_or_throw(file_, kTableHeaderBytes + layer_offsets_[t]);
  write_or_throw(file_, packed.data(), packed.size());
  layer_crc_[t] = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), packed.data(), static_cast<uInt>(packed.size())));
  layer_written_[t] = true;
}

void TableFileWriter::finish(double bayes_successes) {
  if (finished_ || file_ == nullptr) throw std::logic_error("writer already finished");
  for (std::uint32_t t = 0; t <= indexer_.horizon(); ++t)
    if (!layer_written_[t])
      throw std::logic_error("layer " + std::to_string(t) + " was never written");
  // Layer CRCs were taken as written; combine them in payload order.
  uLong crc = crc32(0L, Z_NULL, 0);
  for (std::uint32_t t = 0; t <= indexer_.horizon(); ++t) {
    const std::uint64_t bytes = layer_offsets_[t + 1] - layer_offsets_[t];
    crc = crc32_combine(crc, layer_crc_[t], static_cast<z_off_t>(bytes));
  }
  const auto crc32_value = static_cast<std::uint32_t>(crc);
  seek_or_throw(file_, kTableHeaderBytes + layer_offsets_.back());
  write_or_throw(file_, &crc32_value, sizeof crc32_value);
  // Patch the Bayes number, now that the recursion has reached the root.
  seek_or_throw(file_, 42);
  write_or_throw(file_, &bayes_successes, sizeof bayes_successes);
  finished_ = true;
  const int rc = std::fclose(file_);
  file_ = nullptr;
  if (rc != 0) throw std::system_error(errno, std::generic_category(), "close failed");
}

void RamTableSource::fetch_layer(std::uint32_t t, std::vector<std::uint8_t>& packed) {
  const auto layer = table_->layer(t);
  packed.assign(layer.begin(), layer.end());
}

FileTableSource::FileTableSource(const std::filesystem::path& path, Verify verify) {
  file_ = open_or_throw(path, "rb");
  try {
    std::uint8_t header[kTableHeaderBytes];
    read_or_throw(file_, header, sizeof header, "truncated action-table header");
    const HeaderFields fields = decode_header(header);
    fields.prior.validate();
    horizon_ = fields.horizon;
    prior_ = fields.prior;
    bayes_successes_ = fields.bayes;
    layer_offsets_ = build_layer_offsets(LayerIndexer(horizon_));
    if (fields.payload_len != layer_offsets_.back())
      throw TableFormatError("payload length does not match the stored horizon");
    if (verify == Verify::checksum) {
      // One sequential scan verifies the payload checksum up front.
      uLong crc = crc32(0L, Z_NULL, 0);
      std::vector<std::uint8_t> buf(1 << 20);
      std::uint64_t remaining = fields.payload_len;
      while (remaining > 0) {
        const std::size_t chunk =
            static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), remaining));
        read_or_throw(file_, buf.data(), chunk, "truncated action-table payload");
        crc = crc32(crc, buf.data(), static_cast<uInt>(chunk));
        remaining -= chunk;
      }
      std::uint32_t stored_crc;
      read_or_throw(file_, &stored_crc, sizeof stored_crc, "missing action-table checksum");
      if (static_cast<std::uint32_t>(crc) != stored_crc)
        throw TableFormatError("action-table checksum mismatch");
    } else if (fseeko(file_, 0, SEEK_END) != 0 ||
               static_cast<std::uint64_t>(ftello(file_)) !=
                   kTableHeaderBytes + fields.payload_len + 4) {
      throw TableFormatError("truncated action-table payload");
    }
  } catch (...) {
    std::fclose(file_);
    file_ = nullptr;
    throw;
  }
}

FileTableSource::~FileTableSource() {
  if (file_ != nullptr) std::fclose(file_);
}

void FileTableSource::fetch_layer(std::uint32_t t, std::vector<std::uint8_t>& packed) {
  if (t > horizon_) throw std::domain_error("layer beyond horizon");
  const std::uint64_t bytes = layer_offsets_[t + 1] - layer_offsets_[t];
  packed.resize(bytes);
  seek_or_throw(file_, kTableHeaderBytes + layer_offsets_[t]);
  read_or_throw(file_, packed.data(), bytes, "truncated action-table payload");
}

}  // namespace banditfh
