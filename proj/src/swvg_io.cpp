#include <zlib.h>

#include <limits>

#include "fgd/error.hpp"
#include "fgd/swvg.hpp"
#include "io_util.hpp"

namespace fgd {

namespace {

constexpr char kIndexMagic[4] = {'F', 'G', 'D', 'I'};
constexpr std::uint32_t kIndexVersion = 1;
// Points are stored at 32-bit, so the sphere check on load uses the 32-bit
// tolerance.
constexpr double kStoredSphereTolerance = 1e-4;

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  const char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(
        std::min<std::size_t>(left, std::numeric_limits<uInt>::max()));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(p), chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_index(const Index& index) {
  const auto& points = index.points;
  const auto& graph = index.graph;
  const auto& bound = points.bound();
  if (graph.node_count() != points.size()) {
    throw InvalidArgument("graph and points disagree on node count");
  }

  detail::ByteWriter out;
  out.put_bytes(std::string_view(kIndexMagic, 4));
  out.put<std::uint32_t>(kIndexVersion);
  out.put<std::uint8_t>(static_cast<std::uint8_t>(bound.mode));
  out.put<double>(bound.U);
  out.put<double>(bound.max_row_norm);

  out.put<std::uint64_t>(points.size());
  out.put<std::uint32_t>(static_cast<std::uint32_t>(points.dim()));
  for (float v : points.data()) out.put(v);

  for (std::uint8_t level : graph.levels()) out.put(level);
  for (int layer = 0; layer <= graph.max_level(); ++layer) {
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      const auto id = static_cast<WordId>(i);
      if (graph.level(id) < layer) continue;
      const auto list = graph.neighbors(id, layer);
      if (list.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw InvalidArgument("adjacency list too long for the index format");
      }
      out.put<std::uint16_t>(static_cast<std::uint16_t>(list.size()));
      for (WordId v : list) out.put<std::uint32_t>(v);
    }
  }
  out.put<std::uint32_t>(crc32_of(out.buffer()));
  return std::move(out.buffer());
}

Index deserialize_index(std::string_view bytes, const std::string& where) {
  if (bytes.size() < 4 + sizeof(std::uint32_t)) {
    throw FormatError(where + ": truncated index file (" +
                      std::to_string(bytes.size()) + " bytes)");
  }
  if (bytes.substr(0, 4) != std::string_view(kIndexMagic, 4)) {
    throw FormatError(where + ": bad magic (expected FGDI)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, bytes.data() + body.size(), sizeof(stored_crc));
  if (crc32_of(body) != stored_crc) {
    throw FormatError(where + ": checksum mismatch (file is corrupt or truncated)");
  }

  detail::ByteReader in(body.data(), body.size(), where);
  in.get_bytes(4);
  const auto version = in.get<std::uint32_t>();
  if (version != kIndexVersion) {
    in.fail("unsupported index version " + std::to_string(version));
  }
  TransformBound bound;
  const auto mode = in.get<std::uint8_t>();
  if (mode > static_cast<std::uint8_t>(BoundMode::explicit_norm)) {
    in.fail("unknown bound mode " + std::to_string(mode));
  }
  bound.mode = static_cast<BoundMode>(mode);
  bound.U = in.get<double>();
  bound.max_row_norm = in.get<double>();

  const auto vocab = in.get<std::uint64_t>();
  const auto dim_plus_2 = in.get<std::uint32_t>();
  if (vocab == 0 || vocab > std::numeric_limits<WordId>::max()) {
    in.fail("invalid vocabulary size " + std::to_string(vocab));
  }
  if (dim_plus_2 < 3) in.fail("invalid point dimension " + std::to_string(dim_plus_2));
  if (vocab * dim_plus_2 > in.remaining() / sizeof(float)) {
    in.fail("truncated point section");
  }
  std::vector<float> data(vocab * dim_plus_2);
  for (auto& v : data) v = in.get<float>();

  std::vector<std::uint8_t> levels(vocab);
  for (auto& level : levels) level = in.get<std::uint8_t>();
  const int top = *std::max_element(levels.begin(), levels.end());
  std::vector<std::vector<std::vector<WordId>>> adjacency(
      static_cast<std::size_t>(top) + 1,
      std::vector<std::vector<WordId>>(vocab));
  for (int layer = 0; layer <= top; ++layer) {
    for (std::size_t i = 0; i < vocab; ++i) {
      if (levels[i] < layer) continue;
      const auto count = in.get<std::uint16_t>();
      auto& list = adjacency[static_cast<std::size_t>(layer)][i];
      list.resize(count);
      for (auto& v : list) v = in.get<std::uint32_t>();
    }
  }
  if (in.remaining() != 0) in.fail("trailing bytes before checksum");

  Index index;
  try {
    index.points = TransformedPoints::from_rows(std::move(data), vocab,
                                                dim_plus_2 - 2, bound,
                                                kStoredSphereTolerance);
    index.graph = SwvgGraph(std::move(levels), std::move(adjacency));
  } catch (const Error& e) {
    throw FormatError(where + ": " + e.what());
  }
  return index;
}

void save_index(const Index& index, const std::filesystem::path& path) {
  detail::write_file(path, serialize_index(index));
}

Index load_index(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return deserialize_index(std::string_view(bytes.data(), bytes.size()),
                           path.string());
}

}  // namespace fgd
