#include <fstream>
#include <map>

#include "framescope/mvgf.hpp"
#include "framescope/projector.hpp"
#include "json.hpp"

namespace framescope {

namespace {

using nlohmann::json;

constexpr const char* kManifestFormat = "framescope-projector";
constexpr int kManifestVersion = 1;

json config_to_json(const ProjectorConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"c_in", c.c_in},
          {"c_hidden", c.c_hidden},
          {"c_out", c.c_out},
          {"grid_in", {c.grid_in_h, c.grid_in_w}},
          {"grid_out", {c.grid_out_h, c.grid_out_w}}};
}

ProjectorConfig config_from_json(const json& j) {
  ProjectorConfig c;
  c.kind = parse_projector_kind(j.at("kind").get<std::string>());
  c.c_in = j.at("c_in").get<std::size_t>();
  c.c_hidden = j.at("c_hidden").get<std::size_t>();
  c.c_out = j.at("c_out").get<std::size_t>();
  c.grid_in_h = j.at("grid_in").at(0).get<std::size_t>();
  c.grid_in_w = j.at("grid_in").at(1).get<std::size_t>();
  c.grid_out_h = j.at("grid_out").at(0).get<std::size_t>();
  c.grid_out_w = j.at("grid_out").at(1).get<std::size_t>();
  c.validate();
  return c;
}

}  // namespace

void save_projector(const std::filesystem::path& dir, const ProjectorConfig& cfg,
                    const ProjectorParams<float>& p) {
  cfg.validate();
  p.validate(cfg);
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, const Tensor32*>> roles = {
      {"ffn1.weight", &p.ffn1.weight}, {"ffn1.bias", &p.ffn1.bias},
      {"ffn2.weight", &p.ffn2.weight}, {"ffn2.bias", &p.ffn2.bias}};
  if (p.posenc) {
    roles.emplace_back("posenc.kernel", &p.posenc->kernel);
    roles.emplace_back("posenc.bias", &p.posenc->bias);
  }
  json tensors = json::array();
  for (const auto& [role, t] : roles) {
    const std::string file = role + ".mvgf";
    write_features(dir / file, *t);
    tensors.push_back({{"role", role}, {"file", file}, {"dtype", "f32"}, {"shape", t->shape()}});
  }
  const json manifest = {{"format", kManifestFormat},
                         {"version", kManifestVersion},
                         {"config", config_to_json(cfg)},
                         {"tensors", tensors}};
  std::ofstream f(dir / "manifest.json");
  if (!f) throw IoError("cannot write manifest in '" + dir.string() + "'");
  f << manifest.dump(2) << "\n";
}

LoadedProjector load_projector(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw IoError("no manifest.json in '" + dir.string() + "'");
  json manifest;
  try {
    f >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("projector manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kManifestFormat || manifest.value("version", 0) != kManifestVersion) {
    throw FormatError("projector manifest: unrecognised format or version");
  }
  LoadedProjector out;
  try {
    out.config = config_from_json(manifest.at("config"));
    std::map<std::string, Tensor32> by_role;
    for (const auto& entry : manifest.at("tensors")) {
      by_role.emplace(entry.at("role").get<std::string>(),
                      read_features_as<float>(dir / entry.at("file").get<std::string>()));
    }
    auto take = [&](const std::string& role) {
      auto it = by_role.find(role);
      if (it == by_role.end()) throw FormatError("projector manifest: missing tensor '" + role + "'");
      return std::move(it->second);
    };
    out.params.ffn1 = {take("ffn1.weight"), take("ffn1.bias")};
    out.params.ffn2 = {take("ffn2.weight"), take("ffn2.bias")};
    if (out.config.kind == ProjectorKind::et_proj) {
      out.params.posenc = ConvParams<float>{take("posenc.kernel"), take("posenc.bias")};
    }
  } catch (const json::exception& e) {
    throw FormatError("projector manifest: " + std::string(e.what()));
  }
  out.params.validate(out.config);
  return out;
}

}  // namespace framescope
