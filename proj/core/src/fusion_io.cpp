// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <json.hpp>

#include "popcast/error.hpp"
#include "popcast/fusion.hpp"
#include "popcast/text_io.hpp"

namespace popcast {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kMagic = "PCFUSION";
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "fusion model files assume a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_doubles(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::BadModelFile, "fusion model file is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void fill(std::vector<double>& v) {
    const auto s = take(v.size() * sizeof(double));
    std::memcpy(v.data(), s.data(), s.size());
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string format_fusion(const FusionNet& net) {
  Json header;
  header["format"] = "popcast-fusion";
  header["seed"] = net.seed();
  header["dropout"] = net.dropout();
  Json branches = Json::array();
  for (const auto& b : net.branches()) {
    branches.push_back({{"source_id", b.spec.source_id},
                        {"input_dim", b.spec.input_dim},
                        {"kind", b.spec.kind == BranchKind::Text ? "text" : "video"},
                        {"unified_width", b.spec.unified_width}});
  }
  header["branches"] = std::move(branches);
  header["head_widths"] = net.head_widths();
  const std::string meta = header.dump();

  std::string out(kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, meta.size());
  out += meta;
  for (const auto& b : net.branches()) {
    put_doubles(out, b.projection.weight);
    put_doubles(out, b.projection.bias);
    put_doubles(out, b.gamma);
    put_doubles(out, b.beta);
    put_doubles(out, b.running_mean);
    put_doubles(out, b.running_var);
  }
  for (const auto& l : net.head()) {
    put_doubles(out, l.weight);
    put_doubles(out, l.bias);
  }
  return out;
}

FusionNet parse_fusion(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) throw Error(ErrorCode::BadModelFile, "not a fusion model file");
  if (in.get<std::uint32_t>() != kVersion) throw Error(ErrorCode::BadModelFile, "unsupported fusion model version");
  const auto meta_len = in.get<std::uint64_t>();
  Json header;
  std::vector<BranchSpec> specs;
  std::vector<std::size_t> widths;
  std::uint64_t seed = 0;
  double dropout = 0.0;
  try {
    header = Json::parse(in.take(meta_len));
    if (header.at("format").get<std::string>() != "popcast-fusion") {
      throw Error(ErrorCode::BadModelFile, "not a fusion model file");
    }
    for (const auto& b : header.at("branches")) {
      BranchSpec s;
      s.source_id = b.at("source_id").get<int>();
      s.input_dim = b.at("input_dim").get<std::size_t>();
      s.kind = b.at("kind").get<std::string>() == "text" ? BranchKind::Text : BranchKind::Video;
      s.unified_width = b.at("unified_width").get<std::size_t>();
      specs.push_back(s);
    }
    widths = header.at("head_widths").get<std::vector<std::size_t>>();
    seed = header.at("seed").get<std::uint64_t>();
    dropout = header.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadModelFile, e.what());
  }

  FusionNet net = build_fusion_net(specs, widths, seed, dropout);
  for (auto& b : net.branches_) {
    in.fill(b.projection.weight);
    in.fill(b.projection.bias);
    in.fill(b.gamma);
    in.fill(b.beta);
    in.fill(b.running_mean);
    in.fill(b.running_var);
  }
  for (auto& l : net.head_) {
    in.fill(l.weight);
    in.fill(l.bias);
  }
  if (!in.done()) throw Error(ErrorCode::BadModelFile, "trailing bytes after fusion parameters");
  return net;
}

void save_fusion(const FusionNet& net, const std::filesystem::path& path) { write_file_atomic(path, format_fusion(net)); }

FusionNet load_fusion(const std::filesystem::path& path) { return parse_fusion(read_file(path)); }

}  // namespace popcast
