#include "reid/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string_view>

#include "reid/errors.hpp"

namespace reid {
namespace {

constexpr std::array<char, 4> kFeatureMagic = {'R', 'R', 'F', '1'};
constexpr std::array<char, 4> kDistanceMagic = {'R', 'R', 'D', '1'};

std::string describe(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + describe(path) + " for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + describe(path));
  return bytes;
}

void spill(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + describe(path) + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed on " + describe(path));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

// Sequential little-endian reader over an in-memory file image.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw IoError("truncated file " + describe(path_));
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t(static_cast<unsigned char>(s[b])) << (8 * b);
    return v;
  }

  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t(static_cast<unsigned char>(s[b])) << (8 * b);
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  const std::filesystem::path& path_;
};

void check_magic(ByteReader& r, const std::array<char, 4>& magic,
                 const std::filesystem::path& path) {
  auto m = r.take(4);
  if (std::memcmp(m.data(), magic.data(), 4) != 0) {
    throw FormatError("bad magic in " + describe(path) + ": expected '" +
                      std::string(magic.begin(), magic.end()) + "'");
  }
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\v\f";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

int parse_int(std::string_view field, const std::filesystem::path& path, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(describe(path) + " line " + std::to_string(line) + ": '" +
                     std::string(field) + "' is not an integer");
  }
  return v;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    fn(std::string_view(text).substr(start, end - start), line_no);
    start = end + 1;
  }
}

}  // namespace

void write_features(const FeatureSet& set, const std::filesystem::path& path) {
  std::string out;
  out.reserve(12 + set.size() * (8 + 4 * set.dim()));
  out.append(kFeatureMagic.begin(), kFeatureMagic.end());
  put_u32(out, static_cast<std::uint32_t>(set.size()));
  put_u32(out, static_cast<std::uint32_t>(set.dim()));
  for (const auto& id : set.ids()) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
  }
  for (float v : set.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  spill(out, path);
}

FeatureSet read_features(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  ByteReader r(bytes, path);
  check_magic(r, kFeatureMagic, path);
  const std::uint32_t n = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim == 0) throw FormatError("zero feature dimension in " + describe(path));
  std::vector<std::string> ids;
  ids.reserve(std::min<std::size_t>(n, r.remaining() / 4));
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32();
    ids.emplace_back(r.take(len));
  }
  const std::size_t count = std::size_t(n) * dim;
  if (r.remaining() < count * 4) throw IoError("truncated file " + describe(path));
  std::vector<float> data(count);
  for (auto& v : data) v = std::bit_cast<float>(r.u32());
  if (r.remaining() != 0) throw FormatError("trailing bytes in " + describe(path));
  try {
    return FeatureSet(std::move(ids), dim, std::move(data));
  } catch (const ValidationError& e) {
    throw ValidationError(describe(path) + ": " + e.what());
  }
}

LabelTable read_labels(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  LabelTable table;
  for_each_line(text, [&](std::string_view raw, std::size_t line) {
    auto s = trim(raw);
    if (s.empty()) return;
    std::array<std::string_view, 3> fields;
    std::size_t nf = 0;
    std::size_t start = 0;
    while (true) {
      auto comma = s.find(',', start);
      if (nf == fields.size()) {
        throw ParseError(describe(path) + " line " + std::to_string(line) +
                         ": expected 3 comma-separated fields");
      }
      fields[nf++] = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (nf != 3 || fields[0].empty()) {
      throw ParseError(describe(path) + " line " + std::to_string(line) +
                       ": expected 'image_id,identity,camera'");
    }
    Label label{parse_int(fields[1], path, line), parse_int(fields[2], path, line)};
    try {
      table.add(std::string(fields[0]), label);
    } catch (const ValidationError& e) {
      throw ValidationError(describe(path) + " line " + std::to_string(line) + ": " + e.what());
    }
  });
  return table;
}

void write_labels(const LabelTable& labels, const std::filesystem::path& path) {
  std::string out;
  for (const auto& [id, l] : labels.entries()) {
    out += id;
    out += ',' + std::to_string(l.identity) + ',' + std::to_string(l.camera) + '\n';
  }
  spill(out, path);
}

TrackTable read_tracks(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  std::vector<Track> tracks;
  for_each_line(text, [&](std::string_view raw, std::size_t) {
    std::istringstream words{std::string(raw)};
    Track track;
    for (std::string id; words >> id;) track.push_back(std::move(id));
    if (!track.empty()) tracks.push_back(std::move(track));
  });
  try {
    return TrackTable(std::move(tracks));
  } catch (const ValidationError& e) {
    throw ValidationError(describe(path) + ": " + e.what());
  }
}

void write_tracks(const TrackTable& tracks, const std::filesystem::path& path) {
  std::string out;
  for (const auto& track : tracks.tracks()) {
    for (std::size_t i = 0; i < track.size(); ++i) {
      if (i) out += ' ';
      out += track[i];
    }
    out += '\n';
  }
  spill(out, path);
}

void write_submission(const RankList& ranks, const std::vector<std::string>& gallery_ids,
                      std::size_t top_k, const std::filesystem::path& path) {
  if (top_k < 1) throw ValidationError("submission top_k must be >= 1");
  validate_ranks(ranks, gallery_ids.size());
  std::string out;
  for (const auto& list : ranks) {
    const std::size_t n = std::min(top_k, list.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += ' ';
      out += gallery_ids[list[i]];
    }
    out += '\n';
  }
  spill(out, path);
}

RankList read_submission(const std::filesystem::path& path,
                         const std::vector<std::string>& gallery_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gallery_ids.size(); ++i) index.emplace(gallery_ids[i], i);
  const std::string text = slurp(path);
  RankList ranks;
  for_each_line(text, [&](std::string_view raw, std::size_t line) {
    std::istringstream words{std::string(raw)};
    std::vector<std::size_t> list;
    for (std::string id; words >> id;) {
      auto it = index.find(id);
      if (it == index.end()) {
        throw ValidationError(describe(path) + " line " + std::to_string(line) +
                              ": unknown gallery id '" + id + "'");
      }
      list.push_back(it->second);
    }
    ranks.push_back(std::move(list));
  });
  validate_ranks(ranks, gallery_ids.size());
  return ranks;
}

void write_distances(const DistanceMatrix& dist, const std::filesystem::path& path) {
  std::string out;
  out.reserve(12 + dist.values().size() * 8);
  out.append(kDistanceMagic.begin(), kDistanceMagic.end());
  put_u32(out, static_cast<std::uint32_t>(dist.rows()));
  put_u32(out, static_cast<std::uint32_t>(dist.cols()));
  for (double v : dist.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  spill(out, path);
}

DistanceMatrix read_distances(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  ByteReader r(bytes, path);
  check_magic(r, kDistanceMagic, path);
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  if (r.remaining() < rows * cols * 8) throw IoError("truncated file " + describe(path));
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = std::bit_cast<double>(r.u64());
  if (r.remaining() != 0) throw FormatError("trailing bytes in " + describe(path));
  DistanceMatrix dist(rows, cols, std::move(values));
  dist.validate();
  return dist;
}

}  // namespace reid
