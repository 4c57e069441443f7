#include "uct/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "uct/dump.hpp"
#include "uct/errors.hpp"

namespace uct {

namespace {

std::string kernels_file(int layer) { return "layer" + std::to_string(layer) + "_kernels.uct"; }
std::string bias_file(int layer) { return "layer" + std::to_string(layer) + "_bias.uct"; }

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> split_ints(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const NetParams& theta, const CheckpointInfo& info) {
  theta.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  for (int n = 0; n < theta.depth(); ++n) {
    const auto rows = static_cast<std::uint32_t>(theta.out_channels(n));
    write_dump(dir / kernels_file(n), rows, static_cast<std::uint32_t>(theta.in_channels(n) * NetParams::kTaps),
               theta.kernels(n));
    write_dump(dir / bias_file(n), rows, 1, theta.bias(n));
  }

  const auto manifest = dir / "manifest.txt";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << std::setprecision(17) << kCheckpointMagic << '\n'
      << "N=" << theta.depth() << '\n'
      << "M=" << theta.memory() << '\n'
      << "channels=" << join(theta.channels) << '\n'
      << "gradient_mode=" << to_string(theta.mode()) << '\n'
      << "grid=" << info.grid.nx << ',' << info.grid.ny << '\n'
      << "extent=" << info.grid.extent_x << ',' << info.grid.extent_y << '\n'
      << "seed=" << info.seed << '\n'
      << "step=" << info.step << '\n';
  for (int n = 0; n < theta.depth(); ++n)
    out << "layer" << n << '=' << kernels_file(n) << ',' << bias_file(n) << '\n';
  if (!out) throw IoError("failed writing " + manifest.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.txt";
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw IoError(manifest.string() + ": not a checkpoint manifest (bad magic)");

  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(manifest.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError(manifest.string() + ": missing key '" + key + "'");
    return it->second;
  };

  Checkpoint cp;
  try {
    const auto channels = split_ints(field("channels"));
    cp.theta = NetParams(channels);
    if (std::stoi(field("N")) != cp.theta.depth()) throw ConfigError("manifest N disagrees with channel list");
    if (std::stoi(field("M")) != cp.theta.memory()) throw ConfigError("manifest M disagrees with channel list");
    if (parse_gradient_mode(field("gradient_mode")) != cp.theta.mode())
      throw ConfigError("manifest gradient_mode disagrees with channel list");
    const auto grid = split_ints(field("grid"));
    if (grid.size() != 2) throw IoError(manifest.string() + ": grid must be 'nx,ny'");
    double ex = grid[0];
    double ey = grid[1];
    if (kv.count("extent")) {
      std::stringstream ss(kv["extent"]);
      char comma = 0;
      ss >> ex >> comma >> ey;
    }
    cp.info.grid = ImageGrid(grid[0], grid[1], ex, ey);
    cp.info.seed = std::stoull(field("seed"));
    cp.info.step = std::stoull(field("step"));
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) throw;
    throw IoError(manifest.string() + ": bad value (" + e.what() + ")");
  }

  for (int n = 0; n < cp.theta.depth(); ++n) {
    const RawArray k = read_dump(dir / kernels_file(n));
    const RawArray b = read_dump(dir / bias_file(n));
    if (k.rows != static_cast<std::uint32_t>(cp.theta.out_channels(n)) ||
        k.cols != static_cast<std::uint32_t>(cp.theta.in_channels(n) * NetParams::kTaps) ||
        b.rows != static_cast<std::uint32_t>(cp.theta.out_channels(n)) || b.cols != 1)
      throw ConfigError("checkpoint layer " + std::to_string(n) + " arrays do not match the manifest channels");
    std::copy(k.values.begin(), k.values.end(), cp.theta.kernels(n).begin());
    std::copy(b.values.begin(), b.values.end(), cp.theta.bias(n).begin());
  }
  if (!cp.theta.all_finite()) throw ConfigError("checkpoint contains non-finite parameters");
  return cp;
}

}  // namespace uct
