#include "erckit/checkpoint.hpp"

#include <json.hpp>

namespace erc::nn {

using json = nlohmann::ordered_json;

namespace {

json tensor_entry(const std::string& name, const Tensor& t, const char* group) {
  json e;
  e["name"] = name;
  if (group) e["group"] = group;
  e["shape"] = {t.rows, t.cols};
  e["data"] = t.data;
  return e;
}

Tensor tensor_from_entry(const json& e, const std::string& origin) {
  const auto& shape = e.at("shape");
  if (!shape.is_array() || shape.size() != 2)
    throw DataError(origin + ": malformed shape for " + e.value("name", "?"));
  int r = shape[0].get<int>(), c = shape[1].get<int>();
  Tensor t(r, c);
  const auto& data = e.at("data");
  if (!data.is_array() || data.size() != t.size())
    throw DataError(origin + ": data length mismatch for " + e.value("name", "?"));
  for (size_t i = 0; i < t.size(); ++i) t.data[i] = data[i].get<double>();
  return t;
}

}  // namespace

std::string checkpoint_to_string(const ParamRegistry& reg) {
  json doc;
  doc["format"] = "erckit-checkpoint";
  doc["version"] = 1;
  doc["params"] = json::array();
  for (const Parameter* p : reg.params())
    doc["params"].push_back(tensor_entry(p->name, p->value, group_name(p->group)));
  doc["buffers"] = json::array();
  for (const auto& [name, t] : reg.buffers())
    doc["buffers"].push_back(tensor_entry(name, *t, nullptr));
  return doc.dump(2) + "\n";
}

void save_checkpoint(const ParamRegistry& reg, const std::string& path) {
  write_text_file(path, checkpoint_to_string(reg));
}

void load_checkpoint_string(ParamRegistry& reg, const std::string& content,
                            const std::string& origin) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::exception& e) {
    throw DataError(origin + ": not valid JSON: " + e.what());
  }
  try {
    if (doc.value("format", "") != "erckit-checkpoint")
      throw DataError(origin + ": not a checkpoint file");
    if (doc.value("version", 0) != 1) throw DataError(origin + ": unsupported checkpoint version");

    const auto& jp = doc.at("params");
    const auto& jb = doc.at("buffers");
    auto& params = reg.params();
    auto& buffers = reg.buffers();
    if (jp.size() != params.size() || jb.size() != buffers.size())
      throw DataError(origin + ": checkpoint does not match model (entry count differs)");

    std::vector<Tensor> new_params(params.size());
    std::vector<bool> seen_p(params.size(), false);
    for (const auto& e : jp) {
      std::string name = e.at("name").get<std::string>();
      size_t i = 0;
      for (; i < params.size(); ++i)
        if (params[i]->name == name) break;
      if (i == params.size()) throw DataError(origin + ": unknown parameter " + name);
      if (seen_p[i]) throw DataError(origin + ": duplicate parameter " + name);
      if (group_from_name(e.at("group").get<std::string>()) != params[i]->group)
        throw DataError(origin + ": group mismatch for " + name);
      Tensor t = tensor_from_entry(e, origin);
      if (!t.same_shape(params[i]->value)) throw DataError(origin + ": shape mismatch for " + name);
      new_params[i] = std::move(t);
      seen_p[i] = true;
    }

    std::vector<Tensor> new_buffers(buffers.size());
    std::vector<bool> seen_b(buffers.size(), false);
    for (const auto& e : jb) {
      std::string name = e.at("name").get<std::string>();
      size_t i = 0;
      for (; i < buffers.size(); ++i)
        if (buffers[i].first == name) break;
      if (i == buffers.size()) throw DataError(origin + ": unknown buffer " + name);
      if (seen_b[i]) throw DataError(origin + ": duplicate buffer " + name);
      Tensor t = tensor_from_entry(e, origin);
      if (!t.same_shape(*buffers[i].second))
        throw DataError(origin + ": shape mismatch for " + name);
      new_buffers[i] = std::move(t);
      seen_b[i] = true;
    }

    for (size_t i = 0; i < params.size(); ++i) {
      params[i]->value = std::move(new_params[i]);
      params[i]->zero_grad();
    }
    for (size_t i = 0; i < buffers.size(); ++i) *buffers[i].second = std::move(new_buffers[i]);
  } catch (const json::exception& e) {
    throw DataError(origin + ": malformed checkpoint: " + e.what());
  }
}

void load_checkpoint(ParamRegistry& reg, const std::string& path) {
  load_checkpoint_string(reg, read_text_file(path), path);
}

ParamSnapshot snapshot(const ParamRegistry& reg) {
  ParamSnapshot s;
  for (const Parameter* p : reg.params()) s.params.push_back(p->value);
  for (const auto& [name, t] : reg.buffers()) s.buffers.push_back(*t);
  return s;
}

void restore(ParamRegistry& reg, const ParamSnapshot& snap) {
  auto& params = reg.params();
  auto& buffers = reg.buffers();
  if (snap.params.size() != params.size() || snap.buffers.size() != buffers.size())
    throw DataError("snapshot does not match registry");
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap.params[i];
  for (size_t i = 0; i < buffers.size(); ++i) *buffers[i].second = snap.buffers[i];
}

}  // namespace erc::nn
