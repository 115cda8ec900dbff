#include "skh/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

namespace skh {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'H', '1'};
constexpr std::uint64_t kMaxNameLen = 4096;

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw ParseError("truncated checkpoint file: " + path);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  return std::bit_cast<double>(get_u64(in, path));
}

nlohmann::ordered_json read_header(std::istream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic))
    throw ParseError("not a checkpoint file: " + path);
  const std::uint64_t len = get_u64(in, path);
  std::string text(static_cast<std::size_t>(len), '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated checkpoint header: " + path);
  try {
    return nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError("bad checkpoint header in " + path + ": " + e.what());
  }
}

void read_params_into(std::istream& in, ParamRegistry& reg, const std::string& path) {
  std::size_t filled = 0;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint64_t name_len = get_u64(in, path);
    if (name_len == 0 || name_len > kMaxNameLen)
      throw ParseError("corrupt parameter record in checkpoint file: " + path);
    std::string name(static_cast<std::size_t>(name_len), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in) throw ParseError("truncated checkpoint file: " + path);
    const std::uint64_t rank = get_u64(in, path);
    if (rank > 8) throw ParseError("corrupt parameter record in checkpoint file: " + path);
    Shape shape(static_cast<std::size_t>(rank));
    std::size_t numel = 1;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      shape[d] = static_cast<std::size_t>(get_u64(in, path));
      numel *= shape[d];
    }
    std::vector<double> values(numel);
    for (double& x : values) x = get_f64(in, path);
    if (!reg.has(name))
      throw ValidationError("checkpoint parameter '" + name + "' is not in the model");
    Tensor& t = reg.get(name);
    if (t.shape != shape)
      throw DimensionError("checkpoint parameter '" + name + "': stored shape " +
                           shape_str(shape) + " does not match model shape " +
                           shape_str(t.shape));
    t.data = std::move(values);
    ++filled;
  }
  if (filled != reg.size())
    throw ValidationError("checkpoint holds " + std::to_string(filled) +
                          " parameters, the model expects " + std::to_string(reg.size()));
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const CheckpointExtra& extra) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write checkpoint file: " + path);
  out.write(kMagic, 4);
  nlohmann::ordered_json header;
  header["format_version"] = 1;
  header["config"] = config_to_json(model.config);
  nlohmann::ordered_json toks = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < model.vocab.size(); ++i) toks.push_back(model.vocab.token(i));
  header["vocab"] = std::move(toks);
  header["rng_state"] = extra.rng_state;
  header["best_val_ks_f1"] = extra.best_val_ks_f1;
  const std::string text = header.dump();
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const std::string& name : model.params.names()) {
    const Tensor& t = model.params.get(name);
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.shape.size());
    for (std::size_t d : t.shape) put_u64(out, d);
    for (double x : t.data) put_f64(out, x);
  }
  if (!out) throw ParseError("failed while writing checkpoint file: " + path);
}

Model load_checkpoint(const std::string& path, CheckpointExtra* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint file: " + path);
  const nlohmann::ordered_json header = read_header(in, path);
  Model model;
  try {
    if (header.at("format_version").get<int>() != 1)
      throw ParseError("unsupported checkpoint format version in " + path);
    model.config = config_from_json(header.at("config"));
    const auto& toks = header.at("vocab");
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const std::string tok = toks[i].get<std::string>();
      if (i < model.vocab.size()) {
        if (model.vocab.token(i) != tok)
          throw ParseError("checkpoint vocab reserved block mismatch at index " +
                           std::to_string(i));
      } else if (model.vocab.add(tok) != i) {
        throw ParseError("checkpoint vocab duplicates token '" + tok + "'");
      }
    }
    if (extra) {
      extra->rng_state = header.at("rng_state").get<std::uint64_t>();
      extra->best_val_ks_f1 = header.at("best_val_ks_f1").get<double>();
    }
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError("bad checkpoint header in " + path + ": " + e.what());
  }
  add_model_params(model);
  read_params_into(in, model.params, path);
  return model;
}

void load_checkpoint_params(const std::string& path, Model& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint file: " + path);
  read_header(in, path);
  read_params_into(in, model.params, path);
}

}  // namespace skh
