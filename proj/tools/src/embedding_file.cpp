#include "calm/cli/embedding_file.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "calm/cli/errors.hpp"
#include "calm/cli/format.hpp"

namespace calm::cli {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'L', 'M'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 8 + 4;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

// True when renormalizing f in double and rounding back to float gives f.
bool is_float_fixed_point(const std::vector<float>& f, std::vector<float>* next) {
  double n2 = 0.0;
  for (float x : f) n2 += static_cast<double>(x) * x;
  const double n = std::sqrt(n2);
  bool same = true;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto g = static_cast<float>(static_cast<double>(f[i]) / n);
    if (g != f[i]) same = false;
    if (next != nullptr) (*next)[i] = g;
  }
  return same;
}

// Float rounding of a unit row, chosen so that load followed by save
// reproduces the same bits.
std::vector<float> quantize_row(std::span<const double> row) {
  std::vector<float> f(row.size());
  std::vector<float> next(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) f[i] = static_cast<float>(row[i]);
  for (int it = 0; it < 4; ++it) {
    if (is_float_fixed_point(f, &next)) return f;
    f.swap(next);
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (float toward : {2.0f, -2.0f}) {
      std::vector<float> h = f;
      h[i] = std::nextafter(h[i], toward);
      if (is_float_fixed_point(h, nullptr)) return h;
    }
  }
  return f;
}

LoadedEmbeddings renormalize(Matrix raw, std::vector<ClassId> labels) {
  double worst = 0.0;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    auto row = raw.row(i);
    const double n = norm(row);
    const double dev = std::abs(n - 1.0);
    if (!(dev <= kMaxLoadDeviation)) {
      throw IoError("row " + std::to_string(i) + " has norm " + format_number(n) + ", deviation above " +
                    format_number(kMaxLoadDeviation));
    }
    worst = std::max(worst, dev);
    for (double& v : row) v /= n;
  }
  try {
    return {EmbeddingSet(std::move(raw), std::move(labels)), worst};
  } catch (const Error& e) {
    throw IoError(e.detail());
  }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = line.find(sep, start);
    out.push_back(line.substr(start, at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw IoError("line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

EmbeddingFormat format_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? EmbeddingFormat::Csv : EmbeddingFormat::Binary;
}

std::string encode_binary(const EmbeddingSet& set) {
  std::string out;
  out.reserve(kHeaderBytes + set.size() * (set.dim() + 1) * 4);
  out.append(kMagic, 4);
  put_le(out, kEmbeddingFileVersion);
  put_le(out, static_cast<std::uint64_t>(set.size()));
  put_le(out, static_cast<std::uint32_t>(set.dim()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (float v : quantize_row(set.row(i))) put_le(out, v);
  }
  for (ClassId label : set.labels()) put_le(out, static_cast<std::uint32_t>(label));
  return out;
}

std::string encode_csv(const EmbeddingSet& set) {
  std::string out = "label";
  for (std::size_t k = 0; k < set.dim(); ++k) out += ",v" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += std::to_string(set.label(i));
    for (float v : quantize_row(set.row(i))) {
      out += ',';
      out += format_number(static_cast<double>(v));
    }
    out += '\n';
  }
  return out;
}

LoadedEmbeddings decode_binary(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("not an embedding file (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint16_t>(bytes, pos);
  if (version != kEmbeddingFileVersion) throw IoError("unsupported embedding file version " + std::to_string(version));
  const auto n = get_le<std::uint64_t>(bytes, pos);
  const auto m = get_le<std::uint32_t>(bytes, pos);
  // Guard the size arithmetic before trusting the header.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
  if (m == 0 || n > limit / (static_cast<std::uint64_t>(m) + 1)) throw IoError("implausible header sizes");
  const std::uint64_t expected = kHeaderBytes + n * m * 4 + n * 4;
  if (bytes.size() != expected) {
    throw IoError("size mismatch: header implies " + std::to_string(expected) + " bytes, file has " +
                  std::to_string(bytes.size()));
  }
  Matrix raw(n, m);
  for (double& v : raw.data()) v = static_cast<double>(get_le<float>(bytes, pos));
  std::vector<ClassId> labels(n);
  for (ClassId& label : labels) label = get_le<std::uint32_t>(bytes, pos);
  return renormalize(std::move(raw), std::move(labels));
}

LoadedEmbeddings decode_csv(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw IoError("empty CSV");

  const auto header = split(lines[0], ',');
  if (header.size() < 2 || header[0] != "label") throw IoError("CSV header must start with 'label'");
  const std::size_t m = header.size() - 1;
  for (std::size_t k = 0; k < m; ++k) {
    if (header[k + 1] != "v" + std::to_string(k)) throw IoError("CSV header column " + std::to_string(k + 1) + " must be v" + std::to_string(k));
  }

  const std::size_t n = lines.size() - 1;
  Matrix raw(n, m);
  std::vector<ClassId> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = split(lines[i + 1], ',');
    if (fields.size() != m + 1) {
      throw IoError("line " + std::to_string(i + 2) + ": expected " + std::to_string(m + 1) + " fields");
    }
    labels[i] = parse_field<std::uint32_t>(fields[0], i + 2);
    for (std::size_t k = 0; k < m; ++k) raw(i, k) = static_cast<double>(parse_field<float>(fields[k + 1], i + 2));
  }
  return renormalize(std::move(raw), std::move(labels));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  write_text_file(path, format_for(path) == EmbeddingFormat::Csv ? encode_csv(set) : encode_binary(set));
}

LoadedEmbeddings load_embeddings(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  return format_for(path) == EmbeddingFormat::Csv ? decode_csv(bytes) : decode_binary(bytes);
}

}  // namespace calm::cli
