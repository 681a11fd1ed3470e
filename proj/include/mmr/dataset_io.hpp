#pragma once

// Dataset binary format (little-endian):
//
//   "MMR1"        4 ASCII bytes
//   u32 version   = 1
//   u32 n_samples
//   u32 d_A
//   u32 d_V
//   u32 K
//   u32 flags     bit 0 = multi-label
//   per sample: d_A f32 audio, d_V f32 video, K f32 label
//
// Values are stored as 32-bit floats; loading widens them to double, so a
// dataset whose values are float-representable round-trips bit-exactly.
//
// A CSV alternative is accepted for ingestion: a header line naming the
// columns a0..a{d_A-1}, v0..v{d_V-1}, y0..y{K-1}, then one sample per line.

#include <charconv>
#include <sstream>
#include <string>
#include <string_view>

#include "mmr/byteio.hpp"
#include "mmr/data.hpp"

namespace mmr {

inline constexpr std::string_view kDatasetMagic = "MMR1";
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 6 * 4;

/// Rounds every stored value to float precision, the resolution of the
/// on-disk format.
inline void quantize_to_float(Dataset& d) {
  for (auto& s : d.samples)
    for (Vector* v : {&s.audio, &s.video, &s.label})
      for (double& x : *v) x = static_cast<double>(static_cast<float>(x));
}

inline std::vector<char> encode_dataset(const Dataset& d) {
  d.validate();
  byteio::Writer w;
  w.bytes(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(d.size()));
  w.u32(static_cast<std::uint32_t>(d.audio_dim));
  w.u32(static_cast<std::uint32_t>(d.video_dim));
  w.u32(static_cast<std::uint32_t>(d.num_classes));
  w.u32(d.multi_label ? 1u : 0u);
  for (const auto& s : d.samples)
    for (const Vector* v : {&s.audio, &s.video, &s.label})
      for (double x : *v) w.f32(static_cast<float>(x));
  return w.buffer();
}

inline Dataset decode_dataset(std::string_view bytes) {
  byteio::Reader r(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != kDatasetMagic) throw FormatError("bad dataset magic", 0);
  r.bytes(4, "magic");
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kDatasetVersion) throw FormatError("unsupported dataset version", version_at);
  Dataset d;
  const std::uint32_t n = r.u32("n_samples");
  d.audio_dim = r.u32("d_A");
  d.video_dim = r.u32("d_V");
  d.num_classes = r.u32("K");
  const std::size_t flags_at = r.offset();
  const std::uint32_t flags = r.u32("flags");
  if (flags & ~1u) throw FormatError("unknown flag bits", flags_at);
  d.multi_label = (flags & 1u) != 0;
  const std::size_t row_bytes = (d.audio_dim + d.video_dim + d.num_classes) * 4;
  if (row_bytes == 0) throw FormatError("zero dimensions in header", kDatasetHeaderBytes - 4);
  const std::size_t expected_end = kDatasetHeaderBytes + static_cast<std::size_t>(n) * row_bytes;
  if (bytes.size() < expected_end) {
    // report the offset of the first sample that does not fit
    const std::size_t complete = (bytes.size() - kDatasetHeaderBytes) / row_bytes;
    throw FormatError("n_samples=" + std::to_string(n) + " exceeds payload (" +
                          std::to_string(complete) + " complete samples)",
                      kDatasetHeaderBytes + complete * row_bytes);
  }
  if (bytes.size() > expected_end) throw FormatError("trailing bytes after dataset", expected_end);
  d.samples.resize(n);
  for (auto& s : d.samples) {
    s.audio.resize(d.audio_dim);
    s.video.resize(d.video_dim);
    s.label.resize(d.num_classes);
    for (Vector* v : {&s.audio, &s.video, &s.label})
      for (double& x : *v) x = r.f32("sample value");
  }
  try {
    d.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid dataset content: ") + e.what(), kDatasetHeaderBytes);
  }
  return d;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Parses the CSV ingestion format. Multi-label mode is inferred: any row
/// with a label sum other than 1 marks the dataset multi-label.
inline Dataset parse_dataset_csv(std::string_view text) {
  Dataset d;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::vector<char> kinds;
  bool header_done = false;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t line_start = pos;
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (!header_done) {
      for (auto f : fields) {
        if (f.empty() || (f[0] != 'a' && f[0] != 'v' && f[0] != 'y'))
          throw FormatError("unrecognised CSV column '" + std::string(f) + "'", line_start);
        kinds.push_back(f[0]);
        (f[0] == 'a' ? d.audio_dim : f[0] == 'v' ? d.video_dim : d.num_classes)++;
      }
      header_done = true;
      continue;
    }
    if (fields.size() != kinds.size())
      throw FormatError("CSV line " + std::to_string(line_no) + " has the wrong column count", line_start);
    MultiModalSample s;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      double v = 0.0;
      const auto f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw FormatError("CSV line " + std::to_string(line_no) + ": bad number '" + std::string(f) + "'",
                          line_start);
      (kinds[i] == 'a' ? s.audio : kinds[i] == 'v' ? s.video : s.label).push_back(v);
    }
    double mass = 0.0;
    for (double y : s.label) mass += y;
    if (mass != 1.0) d.multi_label = true;
    d.samples.push_back(std::move(s));
  }
  if (!header_done) throw FormatError("CSV input has no header", 0);
  try {
    d.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid CSV dataset: ") + e.what(), 0);
  }
  return d;
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  byteio::write_file(path, encode_dataset(d));
}

/// Loads either format; files ending in ".csv" are parsed as CSV.
inline Dataset load_dataset(const std::string& path) {
  const std::string bytes = byteio::read_file(path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return parse_dataset_csv(bytes);
  return decode_dataset(bytes);
}

}  // namespace mmr
