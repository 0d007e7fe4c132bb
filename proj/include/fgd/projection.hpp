#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fgd {

/// Words are identified by their 0-based position in the projection file.
using WordId = std::uint32_t;

enum class ProjectionFormat { text, binary };

/**
 * The trained output layer of a language model: one weight row and one bias
 * per vocabulary word. Weights are held at 32-bit; every reduction over them
 * (norms, dot products) accumulates at 64-bit.
 *
 * Immutable once constructed. The constructor validates all invariants:
 * non-empty unique tokens, aligned lengths, finite values, dim >= 1 and
 * vocab_size >= 1.
 */
class VocabularyProjection {
 public:
  VocabularyProjection(std::vector<std::string> tokens,
                       std::vector<float> weights, std::vector<float> biases,
                       std::size_t dim, bool has_bias);

  std::size_t vocab_size() const noexcept { return tokens_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool has_bias() const noexcept { return has_bias_; }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(WordId id) const { return tokens_.at(id); }
  std::optional<WordId> find(std::string_view token) const;

  std::span<const float> weights(WordId id) const noexcept {
    return {weights_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }
  float bias(WordId id) const noexcept { return biases_[id]; }

  /// Row-major |V| x d weight matrix.
  std::span<const float> weight_data() const noexcept { return weights_; }
  std::span<const float> bias_data() const noexcept { return biases_; }

  /// w_i^T h + b_i accumulated at 64-bit.
  double logit(WordId id, std::span<const double> h) const;

  friend bool operator==(const VocabularyProjection& a,
                         const VocabularyProjection& b) {
    return a.dim_ == b.dim_ && a.has_bias_ == b.has_bias_ &&
           a.tokens_ == b.tokens_ && a.weights_ == b.weights_ &&
           a.biases_ == b.biases_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<float> weights_;
  std::vector<float> biases_;
  std::size_t dim_;
  bool has_bias_;
  std::unordered_map<std::string, WordId> ids_;
};

/// Word-frequency prior aligned to a projection's word ids.
class FrequencyTable {
 public:
  /// Counts must be finite and non-negative with a positive sum.
  explicit FrequencyTable(std::vector<double> counts);

  std::size_t size() const noexcept { return counts_.size(); }
  std::span<const double> counts() const noexcept { return counts_; }
  std::span<const double> normalized() const noexcept { return freq_; }
  double operator[](WordId id) const noexcept { return freq_[id]; }

  /// Sum of the normalized frequencies as actually stored (1 up to rounding).
  /// Tail masses are computed against this value, not against 1.
  double total() const noexcept { return total_; }
  bool all_positive() const noexcept { return all_positive_; }

 private:
  std::vector<double> counts_;
  std::vector<double> freq_;
  double total_ = 0.0;
  bool all_positive_ = false;
};

/**
 * Text format: header `<vocab_size> <dim> [<has_bias:0|1>]`, then one line per
 * word `<token> <w_1> ... <w_dim> [<bias>]`. When the header omits the bias
 * flag, the first row decides: dim floats means no bias, dim + 1 means bias.
 *
 * Binary format (little-endian): "FGDP", u32 version = 1, u64 vocab_size,
 * u32 dim, u32 flags (bit 0 = has_bias), per word u16 byte length + UTF-8
 * bytes, f32 weights row-major, then f32 biases when flagged.
 */
VocabularyProjection load_projection(const std::filesystem::path& path,
                                     ProjectionFormat format);

/// Detects binary files by their magic and falls back to text otherwise.
VocabularyProjection load_projection(const std::filesystem::path& path);

void save_projection(const VocabularyProjection& projection,
                     const std::filesystem::path& path,
                     ProjectionFormat format);

/// Reads `<token> <count>` lines. Tokens absent from the file, or present
/// with a zero count, receive `floor`.
FrequencyTable load_frequencies(const std::filesystem::path& path,
                                const VocabularyProjection& projection,
                                double floor = 1.0);

void save_frequencies(const FrequencyTable& table,
                      const VocabularyProjection& projection,
                      const std::filesystem::path& path);

}  // namespace fgd
