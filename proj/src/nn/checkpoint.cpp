#include "mito/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mito/error.hpp"

namespace mito::net {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'T', 'O', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SegNet& model, const nlohmann::json& meta) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["net"] = model->config();
  header["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  header["manifest"] = nlohmann::json::array();

  std::vector<float> flat;
  for (const auto& item : model->named_parameters()) {
    const auto t = item.value().detach().to(torch::kFloat32).contiguous();
    header["manifest"].push_back({{"name", item.key()}, {"shape", t.sizes().vec()}, {"offset", flat.size()}});
    flat.insert(flat.end(), t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  }
  const std::string text = header.dump();
  const uint64_t len = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  unsigned char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(lenbuf), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (!out) throw Error(ErrorKind::Io, "short write on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingCheckpoint, "no checkpoint at " + path.string());
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  unsigned char lenbuf[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0 || !in.read(reinterpret_cast<char*>(lenbuf), 8)) {
    throw Error(ErrorKind::Io, path.string() + " is not a checkpoint");
  }
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<uint64_t>(lenbuf[i]) << (8 * i);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw Error(ErrorKind::Io, "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("bad checkpoint header: ") + e.what());
  }
  if (header.value("version", 0) != kCheckpointVersion) {
    throw Error(ErrorKind::Io, "unsupported checkpoint version in " + path.string());
  }

  NetConfig cfg;
  from_json(header.at("net"), cfg);
  Checkpoint ck;
  ck.model = SegNet(cfg);
  ck.meta = header.value("meta", nlohmann::json::object());

  std::vector<float> flat;
  const auto start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(in.tellg() - start);
  in.seekg(start);
  flat.resize(bytes / sizeof(float));
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)));

  auto params = ck.model->named_parameters();
  if (header["manifest"].size() != params.size()) throw Error(ErrorKind::Io, "manifest does not match the network");
  torch::NoGradGuard guard;
  for (const auto& entry : header["manifest"]) {
    const auto name = entry.at("name").get<std::string>();
    auto* p = params.find(name);
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    const auto offset = entry.at("offset").get<size_t>();
    if (p == nullptr || p->sizes().vec() != shape) throw Error(ErrorKind::Io, "manifest mismatch at " + name);
    if (offset + p->numel() > flat.size()) throw Error(ErrorKind::Io, "truncated tensor data");
    p->copy_(torch::from_blob(flat.data() + offset, shape, torch::kFloat32));
  }
  return ck;
}

}  // namespace mito::net
