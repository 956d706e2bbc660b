#include "texunwarp/checkpoint.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstring>
#include <fstream>
#include <memory>

#include "texunwarp/error.hpp"

namespace texunwarp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr std::array<char, 8> kMagic = {'T', 'U', 'W', 'C', 'K', 'P', 'T', '1'};

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw StateError("sha256 init failed");
  }
  void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx_.get(), data, size); }
  std::string hex() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out, &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s += digits[out[i] >> 4];
      s += digits[out[i] & 15];
    }
    return s;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kUInt8: return "uint8";
    default: throw StateError(std::string("unsupported tensor dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_name(const std::string& s) {
  if (s == "float32") return torch::kFloat32;
  if (s == "float64") return torch::kFloat64;
  if (s == "int64") return torch::kInt64;
  if (s == "uint8") return torch::kUInt8;
  throw StateError("unsupported tensor dtype " + s);
}

torch::Tensor cpu_contiguous(const torch::Tensor& t) { return t.detach().to(torch::kCPU).contiguous(); }

void update_tensor(Sha256& h, const std::string& name, const torch::Tensor& t) {
  const torch::Tensor c = cpu_contiguous(t);
  h.update(name.data(), name.size() + 1);
  h.update(c.data_ptr(), c.nbytes());
}
}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::pretrain_input: return "pretrain_input";
    case Stage::pretrain_gt: return "pretrain_gt";
    case Stage::corrector: return "corrector";
    case Stage::end_to_end: return "end_to_end";
    case Stage::no_corrector: return "no_corrector";
  }
  return "pretrain_input";
}

Stage stage_from_string(std::string_view s) {
  for (auto st : {Stage::pretrain_input, Stage::pretrain_gt, Stage::corrector, Stage::end_to_end, Stage::no_corrector})
    if (to_string(st) == s) return st;
  throw ParameterError("unknown stage '" + std::string(s) + "'");
}

const TensorEntry* Checkpoint::find(std::string_view name) const {
  for (const auto& e : parameters)
    if (e.name == name) return &e;
  return nullptr;
}

bool Checkpoint::has_prefix(std::string_view prefix) const {
  for (const auto& e : parameters)
    if (std::string_view(e.name).starts_with(prefix)) return true;
  return false;
}

std::string Checkpoint::digest(std::string_view prefix) const {
  Sha256 h;
  for (const auto& e : parameters)
    if (std::string_view(e.name).starts_with(prefix)) update_tensor(h, e.name, e.value);
  return h.hex();
}

std::string sha256_hex(const void* data, std::size_t size) {
  Sha256 h;
  h.update(data, size);
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string tensors_digest(const std::vector<std::pair<std::string, torch::Tensor>>& tensors) {
  Sha256 h;
  for (const auto& [name, t] : tensors) update_tensor(h, name, t);
  return h.hex();
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  json header;
  header["format"] = "texunwarp-checkpoint";
  header["version"] = 1;
  header["stage"] = to_string(ckpt.stage);
  header["model"] = ckpt.model;
  header["config"] = ckpt.config;
  header["tensors"] = json::array();

  std::vector<torch::Tensor> blobs;
  std::uint64_t offset = 0;
  auto add = [&](const std::string& group, const TensorEntry& e) {
    torch::Tensor c = cpu_contiguous(e.value);
    header["tensors"].push_back({{"group", group},
                                 {"name", e.name},
                                 {"dtype", dtype_name(c.scalar_type())},
                                 {"shape", c.sizes().vec()},
                                 {"offset", offset},
                                 {"nbytes", c.nbytes()},
                                 {"frozen", e.frozen}});
    offset += c.nbytes();
    blobs.push_back(std::move(c));
  };
  for (const auto& e : ckpt.parameters) add("param", e);
  if (ckpt.rng_state.defined()) add("rng", {"rng_state", ckpt.rng_state, false});

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  std::array<unsigned char, 8> len{};
  for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>((text.size() >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(len.data()), len.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blobs) out.write(static_cast<const char*>(b.data_ptr()), static_cast<std::streamsize>(b.nbytes()));
  if (!out) throw IoError("short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw StateError(path.string() + " is not a texunwarp checkpoint");
  std::array<unsigned char, 8> len{};
  in.read(reinterpret_cast<char*>(len.data()), len.size());
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i) header_len |= static_cast<std::uint64_t>(len[i]) << (8 * i);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw StateError("truncated checkpoint header in " + path.string());
  const std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    if (header.at("format") != "texunwarp-checkpoint" || header.at("version") != 1)
      throw StateError("unsupported checkpoint format in " + path.string());
    ckpt.stage = stage_from_string(header.at("stage").get<std::string>());
    ckpt.model = header.at("model").get<ModelConfig>();
    ckpt.config = header.at("config");
    for (const auto& t : header.at("tensors")) {
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto nbytes = t.at("nbytes").get<std::uint64_t>();
      if (offset + nbytes > blob.size()) throw StateError("checkpoint tensor data out of range");
      torch::Tensor value =
          torch::empty(t.at("shape").get<std::vector<int64_t>>(), dtype_from_name(t.at("dtype").get<std::string>()));
      if (value.nbytes() != nbytes) throw StateError("checkpoint tensor size mismatch");
      std::memcpy(value.data_ptr(), blob.data() + offset, nbytes);
      TensorEntry e{t.at("name").get<std::string>(), value, t.at("frozen").get<bool>()};
      const std::string group = t.at("group").get<std::string>();
      if (group == "param")
        ckpt.parameters.push_back(std::move(e));
      else
        ckpt.rng_state = e.value;
    }
  } catch (const json::exception& e) {
    throw StateError("malformed checkpoint header: " + std::string(e.what()));
  }
  return ckpt;
}

bool checkpoints_equal(const Checkpoint& a, const Checkpoint& b) {
  auto same = [](const std::vector<TensorEntry>& x, const std::vector<TensorEntry>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].name != y[i].name || x[i].frozen != y[i].frozen || x[i].value.scalar_type() != y[i].value.scalar_type() ||
          !torch::equal(x[i].value, y[i].value))
        return false;
    return true;
  };
  if (a.stage != b.stage || !(a.model == b.model) || a.config != b.config) return false;
  if (a.rng_state.defined() != b.rng_state.defined()) return false;
  if (a.rng_state.defined() && !torch::equal(a.rng_state, b.rng_state)) return false;
  return same(a.parameters, b.parameters);
}

}  // namespace texunwarp
