#include "fovea/dataset.hpp"

#include <cstring>

#include "fovea/binary_io.hpp"
#include "fovea/error.hpp"
#include "text_util.hpp"

namespace fovea {

namespace {

constexpr char kMagic[8] = {'F', 'O', 'V', 'E', 'A', 'D', 'S', '\0'};

std::string entries_text(const SceneDistribution& dist) {
  std::string out;
  for (const auto& [k, v] : to_entries(dist)) out += k + " = " + v + "\n";
  return out;
}

SceneDistribution parse_entries_text(const std::string& text) {
  std::map<std::string, std::string> entries;
  for (const auto& line : detail::split(text, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed distribution line: " + line);
    entries[std::string(detail::trim(std::string_view(line).substr(0, eq)))] =
        std::string(detail::trim(std::string_view(line).substr(eq + 1)));
  }
  return distribution_from_entries(entries);
}

void check_field(const char* field, std::uint32_t got, int want) {
  if (static_cast<int>(got) != want) {
    throw SchemaError(field, "file has " + std::to_string(got) + ", expected " + std::to_string(want));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  const auto& d = ds.dist;
  const int K = d.attribute_count;
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic));
  w.u32(kDatasetVersion);
  w.u64(ds.config_hash);
  w.str(entries_text(d));
  w.u32(static_cast<std::uint32_t>(d.dims.width));
  w.u32(static_cast<std::uint32_t>(d.dims.height));
  w.u32(static_cast<std::uint32_t>(d.dims.channels));
  w.u32(static_cast<std::uint32_t>(K));
  w.u32(static_cast<std::uint32_t>(d.class_count));
  w.u32(static_cast<std::uint32_t>(ds.scenes.size()));
  for (const Scene& s : ds.scenes) {
    if (s.image.dims() != d.dims || static_cast<int>(s.attributes.size()) != K ||
        static_cast<int>(s.anchors.size()) != K) {
      throw ShapeError("scene does not match the dataset distribution");
    }
    w.u64(s.seed);
    for (int v : s.bbox_gt.to_array()) w.i32(v);
    w.i32(s.class_id);
    for (auto a : s.attributes) w.u8(a);
    for (const auto& p : s.anchors) {
      w.i32(p.x);
      w.i32(p.y);
    }
    for (float v : s.image.data) w.f32(v);
  }
  w.seal();
  return std::move(w.buffer());
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes, const std::optional<SceneDistribution>& expected) {
  ByteReader r(bytes);
  auto magic = r.bytes(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw FormatError("not a dataset file (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kDatasetVersion) {
    throw VersionError("dataset version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kDatasetVersion) + ")");
  }
  Dataset ds;
  ds.config_hash = r.u64("config hash");
  const std::string dist_text = r.str("distribution");
  const std::uint32_t width = r.u32("width"), height = r.u32("height"), channels = r.u32("channels");
  const std::uint32_t K = r.u32("attribute_count"), C = r.u32("class_count"), count = r.u32("count");

  if (expected) {
    check_field("width", width, expected->dims.width);
    check_field("height", height, expected->dims.height);
    check_field("channels", channels, expected->dims.channels);
    check_field("attribute_count", K, expected->attribute_count);
    check_field("class_count", C, expected->class_count);
  }

  const std::uint64_t pixels = std::uint64_t{width} * height * channels;
  const std::uint64_t record = 8 + 16 + 4 + K + 8ull * K + 4 * pixels;
  const std::uint64_t need = record * count + 4;
  if (r.remaining() < need) {
    throw TruncatedError("dataset declares " + std::to_string(count) + " scenes but the file holds only " +
                         std::to_string(r.remaining()) + " of " + std::to_string(need) + " bytes");
  }
  if (r.remaining() > need) throw FormatError("dataset has trailing bytes beyond the declared scene count");
  verify_crc(bytes, "dataset");

  ds.dist = parse_entries_text(dist_text);
  if (ds.dist.dims != ImageDims{static_cast<int>(width), static_cast<int>(height), static_cast<int>(channels)} ||
      ds.dist.attribute_count != static_cast<int>(K) || ds.dist.class_count != static_cast<int>(C)) {
    throw FormatError("dataset header disagrees with its embedded distribution");
  }

  ds.scenes.resize(count);
  for (Scene& s : ds.scenes) {
    s.seed = r.u64("seed");
    s.bbox_gt.x0 = r.i32("bbox");
    s.bbox_gt.y0 = r.i32("bbox");
    s.bbox_gt.x1 = r.i32("bbox");
    s.bbox_gt.y1 = r.i32("bbox");
    s.class_id = r.i32("class");
    s.attributes.resize(K);
    for (auto& a : s.attributes) a = r.u8("attributes");
    s.anchors.resize(K);
    for (auto& p : s.anchors) {
      p.x = r.i32("anchor");
      p.y = r.i32("anchor");
    }
    s.image = Image(static_cast<int>(channels), static_cast<int>(height), static_cast<int>(width));
    for (auto& v : s.image.data) v = r.f32("pixels");
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  const auto bytes = encode_dataset(dataset);
  write_file_atomic(path, bytes);
}

Dataset load_dataset(const std::filesystem::path& path, const std::optional<SceneDistribution>& expected) {
  const auto bytes = read_file(path);
  return decode_dataset(bytes, expected);
}

}  // namespace fovea
