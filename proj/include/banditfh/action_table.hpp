#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "banditfh/beta.hpp"
#include "banditfh/designs.hpp"
#include "banditfh/states.hpp"

namespace banditfh {

// BFH1 file layout (little-endian):
//   magic "BFH1" | version u16 = 1 | horizon u32 | prior 4 x f64
//   | bayes number f64 | payload length u64
//   | packed 2-bit action codes, layer-major then rank order, each layer
//     padded to a byte boundary | CRC32 of the payload.
// Within a byte, state i of a layer occupies bits 2*(i mod 4) .. 2*(i mod 4)+1.
// Terminal-layer codes are stored as 0 and never read.

inline constexpr char kTableMagic[4] = {'B', 'F', 'H', '1'};
inline constexpr std::uint16_t kTableVersion = 1;
inline constexpr std::size_t kTableHeaderBytes = 4 + 2 + 4 + 4 * 8 + 8 + 8;

/// Packed payload bytes of one layer: four codes per byte.
std::uint64_t packed_layer_bytes(std::uint64_t layer_states);

/// Packed payload bytes of a whole table for the given horizon.
std::uint64_t packed_payload_bytes(const LayerIndexer& idx);

void pack_codes(std::span<const Action> codes, std::span<std::uint8_t> out);
void unpack_codes(std::span<const std::uint8_t> packed, std::span<Action> out);

/// The Bayes-optimal action for every state of every layer, in memory.
class ActionTable {
 public:
  ActionTable(const PriorSpec& prior, std::uint32_t horizon);

  std::uint32_t horizon() const { return indexer_.horizon(); }
  const PriorSpec& prior() const { return prior_; }
  const LayerIndexer& indexer() const { return indexer_; }

  double bayes_successes() const { return bayes_successes_; }
  void set_bayes_successes(double v) { bayes_successes_ = v; }

  Action code(std::uint32_t t, std::uint64_t rank) const;
  Action code_at(const PhysicalState& x) const;

  void set_layer(std::uint32_t t, std::span<const std::uint8_t> packed);
  std::span<const std::uint8_t> layer(std::uint32_t t) const;

  std::span<const std::uint8_t> payload() const { return payload_; }
  std::uint64_t payload_bytes() const { return payload_.size(); }

 private:
  PriorSpec prior_;
  LayerIndexer indexer_;
  double bayes_successes_ = 0.0;
  std::vector<std::uint64_t> layer_offsets_;  // byte offset of each layer, plus end
  std::vector<std::uint8_t> payload_;
};

void save_table(const ActionTable& table, const std::filesystem::path& path);
ActionTable load_table(const std::filesystem::path& path);

/// Streams a table to disk while it is being solved; layers may arrive in any
/// order.  finish() patches the Bayes number and writes the payload CRC.
class TableFileWriter {
 public:
  TableFileWriter(const std::filesystem::path& path, const PriorSpec& prior,
                  std::uint32_t horizon);
  ~TableFileWriter();
  TableFileWriter(const TableFileWriter&) = delete;
  TableFileWriter& operator=(const TableFileWriter&) = delete;

  void write_layer(std::uint32_t t, std::span<const std::uint8_t> packed);
  void finish(double bayes_successes);

 private:
  std::filesystem::path path_;
  LayerIndexer indexer_;
  std::FILE* file_ = nullptr;
  std::vector<std::uint64_t> layer_offsets_;
  std::vector<std::uint32_t> layer_crc_;
  std::vector<bool> layer_written_;
  bool finished_ = false;
};

/// Read access to a solved table for evaluation sweeps, one layer at a time.
class TableSource {
 public:
  virtual ~TableSource() = default;
  virtual std::uint32_t horizon() const = 0;
  virtual PriorSpec prior() const = 0;
  virtual double bayes_successes() const = 0;
  virtual void fetch_layer(std::uint32_t t, std::vector<std::uint8_t>& packed) = 0;
};

class RamTableSource final : public TableSource {
 public:
  explicit RamTableSource(const ActionTable& table) : table_(&table) {}
  std::uint32_t horizon() const override { return table_->horizon(); }
  PriorSpec prior() const override { return table_->prior(); }
  double bayes_successes() const override { return table_->bayes_successes(); }
  void fetch_layer(std::uint32_t t, std::vector<std::uint8_t>& packed) override;

 private:
  const ActionTable* table_;
};

/// Streams layers from a BFH1 file.  The header is validated on open and the
/// payload CRC is verified with one sequential scan; verification may be
/// skipped for files this process just wrote.
class FileTableSource final : public TableSource {
 public:
  enum class Verify : std::uint8_t { checksum, none };
  explicit FileTableSource(const std::filesystem::path& path,
                           Verify verify = Verify::checksum);
  ~FileTableSource();
  FileTableSource(const FileTableSource&) = delete;
  FileTableSource& operator=(const FileTableSource&) = delete;

  std::uint32_t horizon() const override { return horizon_; }
  PriorSpec prior() const override { return prior_; }
  double bayes_successes() const override { return bayes_successes_; }
  void fetch_layer(std::uint32_t t, std::vector<std::uint8_t>& packed) override;

 private:
  std::FILE* file_ = nullptr;
  std::uint32_t horizon_ = 0;
  PriorSpec prior_;
  double bayes_successes_ = 0.0;
  std::vector<std::uint64_t> layer_offsets_;
};

}  // namespace banditfh
