#include "fgd/projection.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "fgd/error.hpp"
#include "io_util.hpp"

namespace fgd {

namespace {

constexpr char kProjectionMagic[4] = {'F', 'G', 'D', 'P'};
constexpr std::uint32_t kProjectionVersion = 1;

}  // namespace

VocabularyProjection::VocabularyProjection(std::vector<std::string> tokens,
                                           std::vector<float> weights,
                                           std::vector<float> biases,
                                           std::size_t dim, bool has_bias)
    : tokens_(std::move(tokens)),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      dim_(dim),
      has_bias_(has_bias) {
  if (dim_ == 0) throw InvalidArgument("projection dim must be >= 1");
  if (tokens_.empty()) throw InvalidArgument("projection vocabulary is empty");
  if (tokens_.size() > std::numeric_limits<WordId>::max()) {
    throw InvalidArgument("vocabulary too large for 32-bit word ids");
  }
  if (weights_.size() != tokens_.size() * dim_) {
    throw InvalidArgument("weight matrix has " + std::to_string(weights_.size()) +
                          " entries, expected " +
                          std::to_string(tokens_.size() * dim_));
  }
  if (biases_.empty() && !has_bias_) biases_.assign(tokens_.size(), 0.0f);
  if (biases_.size() != tokens_.size()) {
    throw InvalidArgument("bias vector length " + std::to_string(biases_.size()) +
                          " does not match vocabulary size " +
                          std::to_string(tokens_.size()));
  }
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw InvalidArgument("empty token for word " + std::to_string(i));
    }
    if (!ids_.emplace(tokens_[i], static_cast<WordId>(i)).second) {
      throw InvalidArgument("duplicate token '" + tokens_[i] + "' for word " +
                            std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i])) {
      throw InvalidArgument("non-finite weight for word " +
                            std::to_string(i / dim_) + " column " +
                            std::to_string(i % dim_));
    }
  }
  for (std::size_t i = 0; i < biases_.size(); ++i) {
    if (!std::isfinite(biases_[i])) {
      throw InvalidArgument("non-finite bias for word " + std::to_string(i));
    }
  }
}

std::optional<WordId> VocabularyProjection::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

double VocabularyProjection::logit(WordId id, std::span<const double> h) const {
  if (h.size() != dim_) {
    throw DimensionError("context vector has dimension " +
                         std::to_string(h.size()) + ", projection expects " +
                         std::to_string(dim_));
  }
  const auto w = weights(id);
  double acc = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) acc += static_cast<double>(w[k]) * h[k];
  return acc + static_cast<double>(biases_[id]);
}

FrequencyTable::FrequencyTable(std::vector<double> counts)
    : counts_(std::move(counts)) {
  if (counts_.empty()) throw InvalidArgument("frequency table is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (!std::isfinite(counts_[i]) || counts_[i] < 0.0) {
      throw InvalidArgument("invalid count for word " + std::to_string(i));
    }
    sum += counts_[i];
  }
  if (!(sum > 0.0)) throw InvalidArgument("frequency counts sum to zero");
  freq_.resize(counts_.size());
  all_positive_ = true;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    freq_[i] = counts_[i] / sum;
    all_positive_ = all_positive_ && freq_[i] > 0.0;
  }
  total_ = std::accumulate(freq_.begin(), freq_.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Text projection format

namespace {

VocabularyProjection parse_text_projection(std::string_view text,
                                           const std::string& where) {
  detail::LineCursor lines(text);
  std::string_view line;
  auto fail = [&](const std::string& msg) -> void {
    throw FormatError(where + ": " + msg + " at line " +
                      std::to_string(lines.line_number()));
  };

  bool got_header = false;
  while (lines.next(line)) {
    if (!detail::split_fields(line).empty()) {
      got_header = true;
      break;
    }
  }
  if (!got_header) throw FormatError(where + ": empty file");

  const auto header = detail::split_fields(line);
  std::uint64_t vocab = 0, dim = 0;
  int bias_flag = -1;
  if (header.size() != 2 && header.size() != 3) fail("malformed header");
  if (!detail::parse_number(header[0], vocab) || vocab == 0) {
    fail("malformed header (vocab_size)");
  }
  if (!detail::parse_number(header[1], dim) || dim == 0) {
    fail("malformed header (dim)");
  }
  if (header.size() == 3) {
    if (header[2] == "0") {
      bias_flag = 0;
    } else if (header[2] == "1") {
      bias_flag = 1;
    } else {
      fail("malformed header (has_bias must be 0 or 1)");
    }
  }

  std::vector<std::string> tokens;
  std::vector<float> weights;
  std::vector<float> biases;
  tokens.reserve(vocab);
  weights.reserve(vocab * dim);
  std::unordered_map<std::string_view, std::size_t> seen;

  while (lines.next(line)) {
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (tokens.size() == vocab) fail("more rows than declared vocab_size");
    const std::size_t values = fields.size() - 1;
    if (bias_flag < 0) {
      // Header without a bias flag: the first row decides.
      if (values == dim) {
        bias_flag = 0;
      } else if (values == dim + 1) {
        bias_flag = 1;
      } else {
        fail("row length mismatch");
      }
    }
    if (values != dim + static_cast<std::size_t>(bias_flag)) {
      fail("row length mismatch");
    }
    if (!seen.emplace(fields[0], lines.line_number()).second) {
      fail("duplicate token '" + std::string(fields[0]) + "'");
    }
    for (std::size_t k = 1; k < fields.size(); ++k) {
      float v = 0.0f;
      if (!detail::parse_number(fields[k], v)) {
        fail("invalid number '" + std::string(fields[k]) + "'");
      }
      if (!std::isfinite(v)) fail("non-finite value");
      if (k <= dim) {
        weights.push_back(v);
      } else {
        biases.push_back(v);
      }
    }
    tokens.emplace_back(fields[0]);
  }
  if (tokens.size() != vocab) {
    throw FormatError(where + ": expected " + std::to_string(vocab) +
                      " rows, found " + std::to_string(tokens.size()));
  }
  return VocabularyProjection(std::move(tokens), std::move(weights),
                              std::move(biases), dim, bias_flag == 1);
}

std::string format_text_projection(const VocabularyProjection& p) {
  std::string out;
  out += std::to_string(p.vocab_size()) + " " + std::to_string(p.dim()) + " " +
         (p.has_bias() ? "1" : "0") + "\n";
  for (std::size_t i = 0; i < p.vocab_size(); ++i) {
    const auto id = static_cast<WordId>(i);
    out += p.token(id);
    for (float v : p.weights(id)) {
      out += ' ';
      detail::append_number(out, v);
    }
    if (p.has_bias()) {
      out += ' ';
      detail::append_number(out, p.bias(id));
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary projection format

VocabularyProjection parse_binary_projection(const std::vector<char>& bytes,
                                             const std::string& where) {
  if (bytes.empty()) throw FormatError(where + ": empty file");
  detail::ByteReader in(bytes.data(), bytes.size(), where);
  if (in.get_bytes(4) != std::string_view(kProjectionMagic, 4)) {
    in.fail("bad magic (expected FGDP)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kProjectionVersion) {
    in.fail("unsupported version " + std::to_string(version));
  }
  const auto vocab = in.get<std::uint64_t>();
  const auto dim = in.get<std::uint32_t>();
  const auto flags = in.get<std::uint32_t>();
  if (vocab == 0) in.fail("vocab_size is zero");
  if (dim == 0) in.fail("dim is zero");
  if ((flags & ~1u) != 0) in.fail("unknown flag bits");
  const bool has_bias = (flags & 1u) != 0;
  // Every word needs at least its u16 length prefix.
  if (vocab > in.remaining() / 2) in.fail("vocab_size exceeds file size");

  std::vector<std::string> tokens;
  tokens.reserve(vocab);
  std::unordered_map<std::string_view, std::size_t> seen;
  for (std::uint64_t i = 0; i < vocab; ++i) {
    const auto len = in.get<std::uint16_t>();
    const auto offset = in.offset();
    const auto token = in.get_bytes(len);
    if (token.empty()) {
      throw FormatError(where + ": empty token at offset " + std::to_string(offset));
    }
    if (!seen.emplace(token, i).second) {
      throw FormatError(where + ": duplicate token '" + std::string(token) +
                        "' at offset " + std::to_string(offset));
    }
    tokens.emplace_back(token);
  }

  auto read_floats = [&](std::size_t count, std::vector<float>& out) {
    if (count > in.remaining() / sizeof(float)) in.fail("truncated float section");
    out.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
      const auto offset = in.offset();
      out[k] = in.get<float>();
      if (!std::isfinite(out[k])) {
        throw FormatError(where + ": non-finite value at offset " +
                          std::to_string(offset));
      }
    }
  };
  std::vector<float> weights;
  std::vector<float> biases;
  read_floats(vocab * dim, weights);
  if (has_bias) read_floats(vocab, biases);
  if (in.remaining() != 0) in.fail("trailing bytes after projection data");
  return VocabularyProjection(std::move(tokens), std::move(weights),
                              std::move(biases), dim, has_bias);
}

std::string format_binary_projection(const VocabularyProjection& p) {
  detail::ByteWriter out;
  out.put_bytes(std::string_view(kProjectionMagic, 4));
  out.put<std::uint32_t>(kProjectionVersion);
  out.put<std::uint64_t>(p.vocab_size());
  out.put<std::uint32_t>(static_cast<std::uint32_t>(p.dim()));
  out.put<std::uint32_t>(p.has_bias() ? 1u : 0u);
  for (const auto& token : p.tokens()) {
    if (token.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidArgument("token longer than 65535 bytes cannot be stored");
    }
    out.put<std::uint16_t>(static_cast<std::uint16_t>(token.size()));
    out.put_bytes(token);
  }
  for (float v : p.weight_data()) out.put(v);
  if (p.has_bias()) {
    for (float v : p.bias_data()) out.put(v);
  }
  return std::move(out.buffer());
}

}  // namespace

VocabularyProjection load_projection(const std::filesystem::path& path,
                                     ProjectionFormat format) {
  const auto bytes = detail::read_file(path);
  const std::string where = path.string();
  if (format == ProjectionFormat::binary) {
    return parse_binary_projection(bytes, where);
  }
  return parse_text_projection(std::string_view(bytes.data(), bytes.size()),
                               where);
}

VocabularyProjection load_projection(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string where = path.string();
  if (bytes.size() >= 4 &&
      std::string_view(bytes.data(), 4) == std::string_view(kProjectionMagic, 4)) {
    return parse_binary_projection(bytes, where);
  }
  return parse_text_projection(std::string_view(bytes.data(), bytes.size()),
                               where);
}

void save_projection(const VocabularyProjection& projection,
                     const std::filesystem::path& path,
                     ProjectionFormat format) {
  detail::write_file(path, format == ProjectionFormat::binary
                               ? format_binary_projection(projection)
                               : format_text_projection(projection));
}

FrequencyTable load_frequencies(const std::filesystem::path& path,
                                const VocabularyProjection& projection,
                                double floor) {
  if (!(floor >= 0.0) || !std::isfinite(floor)) {
    throw InvalidArgument("frequency floor must be finite and >= 0");
  }
  const auto bytes = detail::read_file(path);
  const std::string where = path.string();
  detail::LineCursor lines(std::string_view(bytes.data(), bytes.size()));
  auto fail = [&](const std::string& msg) -> void {
    throw FormatError(where + ": " + msg + " at line " +
                      std::to_string(lines.line_number()));
  };

  std::vector<double> counts(projection.vocab_size(), 0.0);
  std::vector<bool> seen(projection.vocab_size(), false);
  std::string_view line;
  while (lines.next(line)) {
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) fail("expected '<token> <count>'");
    const auto id = projection.find(fields[0]);
    if (!id) fail("unknown token '" + std::string(fields[0]) + "'");
    if (seen[*id]) fail("duplicate token '" + std::string(fields[0]) + "'");
    double count = 0.0;
    if (!detail::parse_number(fields[1], count) || !std::isfinite(count) ||
        count < 0.0) {
      fail("invalid count '" + std::string(fields[1]) + "'");
    }
    seen[*id] = true;
    counts[*id] = count;
  }
  for (auto& c : counts) {
    if (c == 0.0) c = floor;
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) {
    throw FormatError(where + ": all counts are zero after applying floor");
  }
  return FrequencyTable(std::move(counts));
}

void save_frequencies(const FrequencyTable& table,
                      const VocabularyProjection& projection,
                      const std::filesystem::path& path) {
  if (table.size() != projection.vocab_size()) {
    throw InvalidArgument("frequency table size does not match vocabulary");
  }
  std::string out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += projection.token(static_cast<WordId>(i));
    out += ' ';
    detail::append_number(out, table.counts()[i]);
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace fgd
