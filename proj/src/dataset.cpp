#include "mcdseg/dataset.hpp"

#include <cstring>

namespace mcdseg {

std::uint64_t split_stream_id(const std::string& name) {
  // FNV-1a, stable across platforms.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SeriesSplit generate_split(const std::string& name, std::size_t n_series, const PhantomConfig& config,
                           std::uint64_t seed) {
  config.validate();
  SeriesSplit split;
  split.name = name;
  split.series.resize(n_series);
  const RngStream root(seed, split_stream_id(name));
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < n_series; ++k) {
    RngStream rng = root.child(k);
    split.series[k] = generate_series(config, rng);
  }
  return split;
}

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& name) {
  return dir / (name + ".tensors");
}

TensorContainer split_container(const SeriesSplit& split, const nlohmann::json& metadata) {
  const std::size_t s = split.series.size();
  const std::size_t h = s ? split.series[0].height : 0, w = s ? split.series[0].width : 0;
  const std::size_t plane = h * w;
  Tensor<double> control(Shape{s, kPairsPerSeries, h, w}), labeled(Shape{s, kPairsPerSeries, h, w});
  std::vector<std::uint8_t> ref(s * plane), blood(s * plane), bg(s * plane);
  Tensor<double> mbf(Shape{s}), sigma(Shape{s}), geometry(Shape{s, 4});
  for (std::size_t k = 0; k < s; ++k) {
    const ASLSeries& a = split.series[k];
    if (a.height != h || a.width != w) throw DimensionError("split: series have different image sizes");
    for (std::size_t p = 0; p < kPairsPerSeries; ++p) {
      std::memcpy(control.ptr() + (k * kPairsPerSeries + p) * plane, a.control[p].ptr(), plane * sizeof(double));
      std::memcpy(labeled.ptr() + (k * kPairsPerSeries + p) * plane, a.labeled[p].ptr(), plane * sizeof(double));
    }
    std::memcpy(ref.data() + k * plane, a.reference_mask.pixels().data(), plane);
    std::memcpy(blood.data() + k * plane, a.blood_mask.pixels().data(), plane);
    std::memcpy(bg.data() + k * plane, a.background_mask.pixels().data(), plane);
    mbf[k] = a.true_mbf;
    sigma[k] = a.noise_sigma;
    geometry[k * 4 + 0] = a.center_y;
    geometry[k * 4 + 1] = a.center_x;
    geometry[k * 4 + 2] = a.inner_radius;
    geometry[k * 4 + 3] = a.outer_radius;
  }
  TensorContainer c;
  c.metadata = metadata;
  c.metadata["kind"] = "asl_series";
  c.metadata["split"] = split.name;
  c.metadata["n_series"] = s;
  c.put("control", control);
  c.put("labeled", labeled);
  c.put_u8("reference_mask", Shape{s, h, w}, ref);
  c.put_u8("blood_mask", Shape{s, h, w}, blood);
  c.put_u8("background_mask", Shape{s, h, w}, bg);
  c.put("true_mbf", mbf);
  c.put("noise_sigma", sigma);
  c.put("geometry", geometry);
  return c;
}

SeriesSplit split_from_container(const TensorContainer& c, const std::string& name) {
  if (c.metadata.value("kind", "") != "asl_series") throw InputError("file is not an ASL series split");
  const Tensor<double> control = c.get<double>("control");
  const Tensor<double> labeled = c.get<double>("labeled");
  if (control.rank() != 4 || control.dim(1) != kPairsPerSeries || !(control.shape() == labeled.shape())) {
    throw BadHeader("split: control/labeled tensors have unexpected shapes");
  }
  const std::size_t s = control.dim(0), h = control.dim(2), w = control.dim(3), plane = h * w;
  Shape ms;
  const auto ref = c.get_u8("reference_mask", &ms);
  if (ms != Shape{s, h, w}) throw BadHeader("split: reference_mask shape mismatch");
  const auto blood = c.get_u8("blood_mask");
  const auto bg = c.get_u8("background_mask");
  const Tensor<double> mbf = c.get<double>("true_mbf");
  const Tensor<double> sigma = c.get<double>("noise_sigma");
  const Tensor<double> geometry = c.get<double>("geometry");
  if (blood.size() != s * plane || bg.size() != s * plane || mbf.size() != s || sigma.size() != s ||
      geometry.size() != 4 * s) {
    throw BadHeader("split: per-series tensors disagree with the image count");
  }

  SeriesSplit split;
  split.name = name.empty() ? c.metadata.value("split", std::string{}) : name;
  split.series.resize(s);
  auto mask_at = [&](const std::vector<std::uint8_t>& v, std::size_t k) {
    return BinaryMask(h, w, std::vector<std::uint8_t>(v.begin() + k * plane, v.begin() + (k + 1) * plane));
  };
  for (std::size_t k = 0; k < s; ++k) {
    ASLSeries& a = split.series[k];
    a.height = h;
    a.width = w;
    for (std::size_t p = 0; p < kPairsPerSeries; ++p) {
      const std::size_t off = (k * kPairsPerSeries + p) * plane;
      a.control.emplace_back(Shape{h, w}, std::vector<double>(control.ptr() + off, control.ptr() + off + plane));
      a.labeled.emplace_back(Shape{h, w}, std::vector<double>(labeled.ptr() + off, labeled.ptr() + off + plane));
    }
    a.reference_mask = mask_at(ref, k);
    a.blood_mask = mask_at(blood, k);
    a.background_mask = mask_at(bg, k);
    a.true_mbf = mbf[k];
    a.noise_sigma = sigma[k];
    a.center_y = geometry[k * 4 + 0];
    a.center_x = geometry[k * 4 + 1];
    a.inner_radius = geometry[k * 4 + 2];
    a.outer_radius = geometry[k * 4 + 3];
  }
  return split;
}

void save_split(const std::filesystem::path& path, const SeriesSplit& split, const nlohmann::json& metadata) {
  split_container(split, metadata).save(path);
}

SeriesSplit load_split(const std::filesystem::path& path, const std::string& name) {
  if (!std::filesystem::exists(path)) throw IoError("dataset split '" + path.string() + "' does not exist");
  return split_from_container(TensorContainer::load(path), name);
}

std::vector<Sample> make_samples(const SeriesSplit& split, ImageSubset subset) {
  std::vector<Sample> out;
  for (std::size_t k = 0; k < split.series.size(); ++k) {
    const ASLSeries& a = split.series[k];
    const Tensor<float> mask = a.reference_mask.to_tensor<float>().reshaped(Shape{1, a.height, a.width});
    for (std::size_t p = 0; p < kPairsPerSeries; ++p) {
      for (int lab = 0; lab < 2; ++lab) {
        if (subset == ImageSubset::control && lab) continue;
        if (subset == ImageSubset::labeled && !lab) continue;
        const Tensor<double>& img = lab ? a.labeled[p] : a.control[p];
        Sample s;
        s.image = normalize_image(img).cast<float>().reshaped(Shape{1, a.height, a.width});
        s.mask = mask;
        s.series = k;
        s.pair = p;
        s.labeled = lab != 0;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

void stack_batch(const std::vector<Sample>& samples, std::span<const std::size_t> order, Tensor<float>& images,
                 Tensor<float>& masks) {
  if (order.empty()) throw UsageError("stack_batch: empty batch");
  const Shape& s = samples.at(order[0]).image.shape();
  const std::size_t plane = numel(s);
  images = Tensor<float>(Shape{order.size(), 1, s[1], s[2]});
  masks = Tensor<float>(Shape{order.size(), 1, s[1], s[2]});
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Sample& x = samples.at(order[i]);
    std::memcpy(images.ptr() + i * plane, x.image.ptr(), plane * sizeof(float));
    std::memcpy(masks.ptr() + i * plane, x.mask.ptr(), plane * sizeof(float));
  }
}

}  // namespace mcdseg
