#include "mcdseg/checkpoint.hpp"

#include "mcdseg/config.hpp"

namespace mcdseg {

using nlohmann::json;

template <typename T>
TensorContainer checkpoint_container(const UNetModel<T>& model, const TrainingState& state) {
  TensorContainer c;
  std::vector<std::int64_t> steps;
  for (const auto& [name, p] : model.parameters()) {
    c.put("param/" + name, p->value.value());
    c.put("adam_m/" + name, p->adam_m);
    c.put("adam_v/" + name, p->adam_v);
    steps.push_back(static_cast<std::int64_t>(p->step_count));
  }
  c.put_i64("adam_steps", Shape{steps.size()}, steps);
  for (const auto& [name, s] : model.batch_norm_states()) {
    c.put("bn/" + name + "/running_mean", s->running_mean);
    c.put("bn/" + name + "/running_var", s->running_var);
  }
  c.metadata = {{"kind", "checkpoint"},
                {"dtype", std::is_same_v<T, float> ? "f32" : "f64"},
                {"unet", to_json(model.config())},
                {"adam", to_json(state.adam)},
                {"epoch", state.epoch},
                {"rng",
                 {{"algorithm", RngStream::kAlgorithm},
                  {"seed", state.rng.seed()},
                  {"stream_id", state.rng.stream_id()},
                  {"position", state.rng.position()}}},
                {"extra", state.extra}};
  return c;
}

UNetConfig checkpoint_unet_config(const TensorContainer& c) {
  if (!c.metadata.is_object() || c.metadata.value("kind", "") != "checkpoint" || !c.metadata.contains("unet")) {
    throw BadHeader("file is not a model checkpoint");
  }
  try {
    return unet_config_from_json(c.metadata.at("unet"));
  } catch (const ConfigError& e) {
    throw BadHeader(std::string("checkpoint has an unreadable network config: ") + e.what());
  }
}

template <typename T>
TrainingState restore_checkpoint(const TensorContainer& c, UNetModel<T>& model) {
  const UNetConfig stored = checkpoint_unet_config(c);
  if (!(stored == model.config())) {
    throw ConfigMismatch("checkpoint network config " + to_json(stored).dump() + " does not match " +
                         to_json(model.config()).dump());
  }
  const std::string want = std::is_same_v<T, float> ? "f32" : "f64";
  if (c.metadata.value("dtype", "") != want) {
    throw ConfigMismatch("checkpoint dtype " + c.metadata.value("dtype", std::string("?")) + " does not match " + want);
  }

  auto fetch = [&](const std::string& key, const Shape& expect) {
    const auto& e = c.entry(key);
    if (e.shape != expect) throw ConfigMismatch("checkpoint tensor '" + key + "' has shape " + shape_str(e.shape));
    return c.get<T>(key);
  };

  const auto steps = c.get_i64("adam_steps");
  auto params = model.parameters();
  if (steps.size() != params.size()) throw ConfigMismatch("checkpoint parameter count differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    p->value.value() = fetch("param/" + name, p->shape());
    p->adam_m = fetch("adam_m/" + name, p->shape());
    p->adam_v = fetch("adam_v/" + name, p->shape());
    p->step_count = static_cast<std::uint64_t>(steps[i]);
    p->zero_grad();
  }
  for (auto& [name, s] : model.batch_norm_states()) {
    s->running_mean = fetch("bn/" + name + "/running_mean", s->running_mean.shape());
    s->running_var = fetch("bn/" + name + "/running_var", s->running_var.shape());
  }

  TrainingState st;
  try {
    st.adam = adam_config_from_json(c.metadata.at("adam"));
    st.epoch = c.metadata.at("epoch").get<std::uint64_t>();
    const auto& r = c.metadata.at("rng");
    if (r.at("algorithm").get<std::string>() != RngStream::kAlgorithm) {
      throw ConfigMismatch("checkpoint RNG algorithm differs");
    }
    st.rng = RngStream(r.at("seed").get<std::uint64_t>(), r.at("stream_id").get<std::uint64_t>());
    st.rng.set_position(r.at("position").get<std::uint64_t>());
    st.extra = c.metadata.value("extra", json::object());
  } catch (const json::exception& e) {
    throw BadHeader(std::string("checkpoint metadata incomplete: ") + e.what());
  }
  return st;
}

template <typename T>
UNetModel<T> load_model(const std::filesystem::path& path, TrainingState* state) {
  const TensorContainer c = TensorContainer::load(path);
  RngStream init(0, 0);
  UNetModel<T> model(checkpoint_unet_config(c), init);
  TrainingState st = restore_checkpoint(c, model);
  if (state) *state = std::move(st);
  return model;
}

template TensorContainer checkpoint_container<float>(const UNetModel<float>&, const TrainingState&);
template TensorContainer checkpoint_container<double>(const UNetModel<double>&, const TrainingState&);
template TrainingState restore_checkpoint<float>(const TensorContainer&, UNetModel<float>&);
template TrainingState restore_checkpoint<double>(const TensorContainer&, UNetModel<double>&);
template UNetModel<float> load_model<float>(const std::filesystem::path&, TrainingState*);
template UNetModel<double> load_model<double>(const std::filesystem::path&, TrainingState*);

}  // namespace mcdseg
