#include "longtail/model/checkpoint.hpp"

#include "json.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace longtail {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'L', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
              {"num_heads", c.num_heads},   {"d_ffn", c.d_ffn},
              {"num_layers", c.num_layers}, {"max_len", c.max_len},
              {"dropout", c.dropout}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.d_ffn = j.at("d_ffn").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const Vocabulary& vocab, std::int64_t step) {
  params.config.validate();
  if (vocab.size() != params.config.vocab_size)
    throw std::invalid_argument("checkpoint: vocabulary size " + std::to_string(vocab.size()) +
                                " does not match model vocab_size " +
                                std::to_string(params.config.vocab_size));

  auto tensors = tensor_list(params);
  std::vector<std::pair<std::string, const Mat<float>*>> manifest(tensors.begin(), tensors.end());
  if (params.output_projection)
    manifest.emplace_back("output_projection", &*params.output_projection);

  json header;
  header["config"] = config_to_json(params.config);
  header["step"] = step;
  json vocab_json = json::array();
  for (TokenId id = 0; id < vocab.size(); ++id)
    vocab_json.push_back(json::array({vocab.token_of(id), vocab.count_of(id)}));
  header["vocab"] = std::move(vocab_json);

  json tensor_json = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, mat] : manifest) {
    tensor_json.push_back(json{{"name", name},
                               {"rows", mat->rows()},
                               {"cols", mat->cols()},
                               {"offset", offset}});
    offset += static_cast<std::uint64_t>(mat->size()) * sizeof(float);
  }
  header["tensors"] = std::move(tensor_json);

  const std::string header_bytes = header.dump();
  const std::string tmp_path = path + ".tmp";
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp_path);
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint64_t>(header_bytes.size()));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    for (const auto& [name, mat] : manifest)
      out.write(reinterpret_cast<const char*>(mat->data()),
                static_cast<std::streamsize>(mat->size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + tmp_path);
  }
  std::filesystem::rename(tmp_path, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t))
    throw std::runtime_error("checkpoint truncated: " + path);
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, sizeof(version));
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " in " + path);
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + 8, sizeof(header_len));
  const std::size_t blob_start = 16 + header_len;
  if (bytes.size() < blob_start)
    throw std::runtime_error("checkpoint truncated: " + path);

  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(blob_start));
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint header in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ModelConfig config = config_from_json(header.at("config"));
  config.validate();
  ckpt.step = header.at("step").get<std::int64_t>();

  const auto& vocab_json = header.at("vocab");
  if (static_cast<int>(vocab_json.size()) != config.vocab_size)
    throw std::runtime_error("checkpoint vocabulary size mismatch in " + path);
  for (std::size_t i = 0; i < vocab_json.size(); ++i) {
    const std::string token = vocab_json[i][0].get<std::string>();
    const Count count = vocab_json[i][1].get<Count>();
    if (i < static_cast<std::size_t>(Specials::count)) {
      if (ckpt.vocab.token_of(static_cast<TokenId>(i)) != token)
        throw std::runtime_error("checkpoint vocabulary lost its reserved tokens: " + path);
      continue;
    }
    ckpt.vocab.add(token, count);
  }

  // Shape holder; every manifest tensor overwrites its slot below.
  ckpt.params = init_params<float>(config, 0);
  auto tensors = tensor_list(ckpt.params);

  std::uint64_t expected_blob = 0;
  for (const auto& t : header.at("tensors"))
    expected_blob += t.at("rows").get<std::uint64_t>() * t.at("cols").get<std::uint64_t>() *
                     sizeof(float);
  if (bytes.size() != blob_start + expected_blob)
    throw std::runtime_error("checkpoint blob size mismatch in " + path + ": expected " +
                             std::to_string(blob_start + expected_blob) + " bytes, file has " +
                             std::to_string(bytes.size()));

  std::size_t loaded = 0;
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const Eigen::Index rows = t.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = t.at("cols").get<Eigen::Index>();
    const std::uint64_t offset = t.at("offset").get<std::uint64_t>();

    Mat<float>* dest = nullptr;
    if (name == "output_projection") {
      ckpt.params.output_projection.emplace(rows, cols);
      dest = &*ckpt.params.output_projection;
    } else {
      for (auto& [tname, mat] : tensors)
        if (tname == name) {
          dest = mat;
          break;
        }
      if (!dest) throw std::runtime_error("unknown tensor '" + name + "' in " + path);
      if (dest->rows() != rows || dest->cols() != cols)
        throw std::runtime_error("tensor '" + name + "' shape mismatch in " + path);
      ++loaded;
    }
    if (blob_start + offset + rows * cols * sizeof(float) > bytes.size())
      throw std::runtime_error("tensor '" + name + "' overruns blob in " + path);
    std::memcpy(dest->data(), bytes.data() + blob_start + offset,
                static_cast<std::size_t>(rows * cols) * sizeof(float));
  }
  if (loaded != tensors.size())
    throw std::runtime_error("checkpoint is missing tensors: " + path);
  return ckpt;
}

}  // namespace longtail
