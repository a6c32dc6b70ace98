#include "dgkd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dgkd/error.hpp"
#include "dgkd/rng.hpp"

namespace dgkd {

std::string family_name(ModelFamily f) {
  return f == ModelFamily::kMlp ? "mlp" : "plain_cnn";
}

ModelFamily family_from_name(const std::string& name) {
  if (name == "mlp") return ModelFamily::kMlp;
  if (name == "plain_cnn") return ModelFamily::kPlainCnn;
  throw ParameterError("unknown model family '" + name + "'");
}

std::vector<int> default_channel_schedule(int depth, int base, int cap) {
  std::vector<int> out;
  for (int i = 0; i < depth - 1; ++i) {
    out.push_back(std::min(base << (i / 2), cap));
  }
  return out;
}

void ModelSpec::validate() const {
  if (depth < 1) throw StructuralError("model depth must be >= 1");
  if (num_classes < 2) throw StructuralError("num_classes must be >= 2");
  if (input_signature.empty()) throw StructuralError("input signature is empty");
  for (std::size_t e : input_signature) {
    if (e == 0) throw StructuralError("input signature extents must be positive");
  }
  if (family == ModelFamily::kMlp) {
    if (hidden_width < 1) throw StructuralError("mlp hidden width must be >= 1");
  } else {
    if (input_signature.size() != 3) {
      throw StructuralError("plain_cnn input signature must be {C,H,W}");
    }
    if (!channel_schedule.empty() &&
        channel_schedule.size() != static_cast<std::size_t>(depth - 1)) {
      throw StructuralError("channel schedule length must equal depth-1");
    }
    for (int c : channel_schedule) {
      if (c < 1) throw StructuralError("channel widths must be positive");
    }
  }
}

std::string ModelSpec::id() const {
  return (family == ModelFamily::kMlp ? "mlp-d" : "cnn-d") + std::to_string(depth);
}

std::string ModelSpec::descriptor() const {
  nlohmann::json j;
  j["family"] = family_name(family);
  j["depth"] = depth;
  j["num_classes"] = num_classes;
  j["input_signature"] = input_signature;
  if (family == ModelFamily::kMlp) {
    j["hidden_width"] = hidden_width;
  } else {
    j["channel_schedule"] =
        channel_schedule.empty() ? default_channel_schedule(depth) : channel_schedule;
  }
  return j.dump();
}

ModelSpec ModelSpec::from_descriptor(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw CheckpointError("unreadable model descriptor");
  }
  ModelSpec spec;
  try {
    spec.family = family_from_name(j.at("family").get<std::string>());
    spec.depth = j.at("depth").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.input_signature = j.at("input_signature").get<std::vector<std::size_t>>();
    if (spec.family == ModelFamily::kMlp) {
      spec.hidden_width = j.at("hidden_width").get<int>();
    } else {
      spec.channel_schedule = j.at("channel_schedule").get<std::vector<int>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad model descriptor: ") + e.what());
  }
  spec.validate();
  return spec;
}

namespace {

// Spatial trace of the plain CNN: pool after every second conv while the map
// is poolable, then pool down to at most 4x4 before the classifier so the
// head size is depth-independent once channels saturate. Returns the flatten
// length feeding the classifier and, optionally, pool positions.
struct CnnTrace {
  std::vector<bool> pool_after;  // size depth-1
  int tail_pools = 0;
  std::size_t flat = 0;
};

CnnTrace trace_cnn(const ModelSpec& spec, const std::vector<int>& channels) {
  std::size_t h = spec.input_signature[1];
  std::size_t w = spec.input_signature[2];
  CnnTrace t;
  t.pool_after.assign(channels.size(), false);
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if ((i + 1) % 2 == 0 && h >= 2 && w >= 2) {
      t.pool_after[i] = true;
      h /= 2;
      w /= 2;
    }
  }
  while ((h > 4 || w > 4) && h >= 2 && w >= 2) {
    ++t.tail_pools;
    h /= 2;
    w /= 2;
  }
  const std::size_t last_ch =
      channels.empty() ? spec.input_signature[0]
                       : static_cast<std::size_t>(channels.back());
  t.flat = last_ch * h * w;
  return t;
}

}  // namespace

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
  spec.validate();
  std::vector<LayerShape> shapes;
  if (spec.family == ModelFamily::kMlp) {
    std::size_t in = shape_size(spec.input_signature);
    const std::size_t width = static_cast<std::size_t>(spec.hidden_width);
    for (int i = 1; i < spec.depth; ++i) {
      const std::string base = "fc" + std::to_string(i);
      shapes.push_back({base + ".weight", {in, width}, in});
      shapes.push_back({base + ".bias", {width}, 0});
      in = width;
    }
    const std::size_t classes = static_cast<std::size_t>(spec.num_classes);
    shapes.push_back({"head.weight", {in, classes}, in});
    shapes.push_back({"head.bias", {classes}, 0});
  } else {
    const std::vector<int> channels = spec.channel_schedule.empty()
                                          ? default_channel_schedule(spec.depth)
                                          : spec.channel_schedule;
    std::size_t in_ch = spec.input_signature[0];
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const std::string base = "conv" + std::to_string(i + 1);
      const std::size_t out_ch = static_cast<std::size_t>(channels[i]);
      shapes.push_back({base + ".weight", {out_ch, in_ch, 3, 3}, in_ch * 9});
      shapes.push_back({base + ".bias", {out_ch}, 0});
      in_ch = out_ch;
    }
    const CnnTrace t = trace_cnn(spec, channels);
    const std::size_t classes = static_cast<std::size_t>(spec.num_classes);
    shapes.push_back({"head.weight", {t.flat, classes}, t.flat});
    shapes.push_back({"head.bias", {classes}, 0});
  }
  return shapes;
}

ParameterSet build_model(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "model-init"));
  ParameterSet params;
  params.seed = seed;
  for (const LayerShape& ls : layer_shapes(spec)) {
    Tensor t(ls.shape);
    if (ls.fan_in > 0) {
      const double limit = std::sqrt(6.0 / static_cast<double>(ls.fan_in));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    }
    t.requires_grad = true;
    params.tensors.emplace_back(ls.name, std::move(t));
  }
  return params;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const LayerShape& ls : layer_shapes(spec)) n += shape_size(ls.shape);
  return n;
}

std::vector<ModelSpec> capacity_order(const std::vector<ModelSpec>& specs) {
  if (specs.empty()) throw LadderError("capacity_order: empty spec list");
  std::vector<std::pair<std::size_t, ModelSpec>> ranked;
  for (const ModelSpec& s : specs) ranked.emplace_back(parameter_count(s), s);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
    if (ranked[i].first == ranked[i + 1].first) {
      throw LadderError("ambiguous capacity ladder: " + ranked[i].second.id() +
                        " and " + ranked[i + 1].second.id() + " both have " +
                        std::to_string(ranked[i].first) + " parameters");
    }
  }
  std::vector<ModelSpec> out;
  for (auto& [count, s] : ranked) out.push_back(std::move(s));
  return out;
}

Tensor* ParameterSet::find(const std::string& name) {
  for (auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor* ParameterSet::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

ForwardResult forward(const ParameterSet& params, const ModelSpec& spec,
                      const Tensor& batch, bool train) {
  spec.validate();
  if (batch.rank() < 1 || batch.size() % shape_size(spec.input_signature) != 0) {
    throw StructuralError("batch " + shape_to_string(batch.shape()) +
                          " does not match input signature " +
                          shape_to_string(spec.input_signature));
  }
  const std::vector<LayerShape> shapes = layer_shapes(spec);
  if (shapes.size() != params.tensors.size()) {
    throw StructuralError("parameter set does not match spec " + spec.id());
  }

  ForwardResult fr;
  fr.param_nodes.reserve(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (params.tensors[i].second.shape() != shapes[i].shape) {
      throw StructuralError("parameter '" + params.tensors[i].first +
                            "' has shape " +
                            shape_to_string(params.tensors[i].second.shape()) +
                            ", spec wants " + shape_to_string(shapes[i].shape));
    }
    Tensor leaf = params.tensors[i].second;
    leaf.requires_grad = train;
    leaf.grad.reset();
    fr.param_nodes.push_back(fr.tape.leaf(std::move(leaf)));
  }

  Tensor input = batch;
  input.requires_grad = false;
  input.grad.reset();

  if (spec.family == ModelFamily::kMlp) {
    NodeId x = fr.tape.leaf(std::move(input));
    if (fr.tape.value(x).rank() != 2) x = fr.tape.flatten(x);
    std::size_t p = 0;
    for (int i = 1; i < spec.depth; ++i, p += 2) {
      x = fr.tape.affine(x, fr.param_nodes[p], fr.param_nodes[p + 1]);
      x = fr.tape.relu(x);
    }
    fr.logits = fr.tape.affine(x, fr.param_nodes[p], fr.param_nodes[p + 1]);
  } else {
    if (input.rank() != 4 ||
        input.extent(1) != spec.input_signature[0] ||
        input.extent(2) != spec.input_signature[1] ||
        input.extent(3) != spec.input_signature[2]) {
      throw StructuralError("plain_cnn batch must be [B," +
                            shape_to_string(spec.input_signature) + "], got " +
                            shape_to_string(input.shape()));
    }
    const std::vector<int> channels = spec.channel_schedule.empty()
                                          ? default_channel_schedule(spec.depth)
                                          : spec.channel_schedule;
    const CnnTrace trace = trace_cnn(spec, channels);
    NodeId x = fr.tape.leaf(std::move(input));
    std::size_t p = 0;
    for (std::size_t i = 0; i < channels.size(); ++i, p += 2) {
      x = fr.tape.conv2d3x3(x, fr.param_nodes[p], fr.param_nodes[p + 1]);
      x = fr.tape.relu(x);
      if (trace.pool_after[i]) x = fr.tape.max_pool2x2(x);
    }
    for (int i = 0; i < trace.tail_pools; ++i) x = fr.tape.max_pool2x2(x);
    x = fr.tape.flatten(x);
    fr.logits = fr.tape.affine(x, fr.param_nodes[p], fr.param_nodes[p + 1]);
  }
  return fr;
}

Tensor forward_logits(const ParameterSet& params, const ModelSpec& spec,
                      const Tensor& batch) {
  ForwardResult fr = forward(params, spec, batch, /*train=*/false);
  return fr.tape.value(fr.logits);
}

}  // namespace dgkd
