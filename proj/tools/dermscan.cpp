#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "dermscan/config.hpp"
#include "dermscan/error.hpp"
#include "dermscan/imgproc.hpp"
#include "dermscan/pipeline.hpp"
#include "dermscan/png_io.hpp"
#include "dermscan/random.hpp"
#include "dermscan/synth.hpp"

namespace fs = std::filesystem;
using namespace dermscan;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Prefixes errors with the pipeline stage that raised them.
template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), name + ": " + e.what());
  }
}

struct Common {
  std::string config_path;
  int jobs = 0;
  std::optional<std::uint64_t> seed;
};

RunConfig load_run_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) {
    try {
      cfg = load_config(c.config_path);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidArgument) throw UsageError(e.what());
      throw;
    }
  }
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

json report_header(const RunConfig& cfg) { return {{"tool", tool_version()}, {"config", config_to_json(cfg)}}; }

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SkinModel resolve_skin_model(const std::string& path, const RunConfig& cfg) {
  if (!path.empty()) return stage("skin model", [&] { return load_skin_model(path); });
  SkinModel m = synthetic_skin_model(7, cfg.skin_components);
  m.theta = cfg.skin_theta;
  return m;
}

// --- feature tables -------------------------------------------------------

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<int> labels;  // -1 when unknown
  FeatureMatrix rows;
};

std::string table_to_csv(const FeatureTable& t) {
  std::ostringstream out;
  out << "id,label";
  for (const FeatureInfo& f : feature_catalog()) out << ',' << f.name;
  out << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out << t.ids[i] << ',';
    if (t.labels[i] >= 0) out << t.labels[i];
    for (double v : t.rows[i]) out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

FeatureTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, "'" + path + "' is empty");
  const auto header = split(line);
  const auto& catalog = feature_catalog();
  if (header.size() != catalog.size() + 2 || header[0] != "id" || header[1] != "label")
    throw Error(ErrorKind::Format, "'" + path + "' does not have the id,label,<catalog> header");
  for (std::size_t i = 0; i < catalog.size(); ++i)
    if (header[i + 2] != catalog[i].name)
      throw Error(ErrorKind::Format, "column '" + header[i + 2] + "' does not match catalog entry '" + catalog[i].name + "'");
  FeatureTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": wrong number of columns");
    t.ids.push_back(cells[0]);
    try {
      t.labels.push_back(cells[1].empty() ? -1 : std::stoi(cells[1]));
      std::vector<double> row;
      for (std::size_t i = 2; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
      t.rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return t;
}

void require_labels(const FeatureTable& t) {
  for (std::size_t i = 0; i < t.labels.size(); ++i)
    if (t.labels[i] != 0 && t.labels[i] != 1)
      throw Error(ErrorKind::Format, "row '" + t.ids[i] + "' has no 0/1 label");
}

// --- corpus analysis ------------------------------------------------------

struct CorpusAnalysis {
  FeatureTable table;
  json failures = json::array();
  std::vector<double> tdr_fine, tdr_coarse;
};

CorpusAnalysis analyze_corpus(const std::string& manifest_path, const SkinModel& skin, const RunConfig& cfg, int jobs,
                              bool use_gt_masks) {
  const CorpusManifest m = stage("manifest", [&] { return read_manifest(manifest_path); });
  const fs::path base = fs::path(manifest_path).parent_path();
  const std::size_t n = m.entries.size();
  std::vector<std::optional<std::vector<double>>> rows(n);
  std::vector<std::string> errors(n);
  std::vector<double> fine(n, -1.0), coarse(n, -1.0);
  parallel_for(n, jobs, [&](std::size_t i) {
    const CorpusEntry& e = m.entries[i];
    try {
      const RasterImage image = read_png((base / e.image).string());
      std::optional<BinaryMask> gt;
      if (!e.mask.empty()) gt = read_mask_png((base / e.mask).string());
      if (use_gt_masks) {
        if (!gt) throw Error(ErrorKind::Format, "entry has no mask");
        rows[i] = extract_all(image, *gt).values;
        return;
      }
      const ImageAnalysis a = analyze_image(image, skin, cfg.segmentation);
      rows[i] = a.features.values;
      if (gt) {
        fine[i] = tdr(*gt, a.segmentation.fine);
        coarse[i] = tdr(*gt, a.segmentation.coarse_upsampled);
      }
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });
  CorpusAnalysis out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i]) {
      out.failures.push_back({{"image", m.entries[i].image}, {"error", errors[i]}});
      continue;
    }
    out.table.ids.push_back(m.entries[i].image);
    out.table.labels.push_back(m.entries[i].label);
    out.table.rows.push_back(std::move(*rows[i]));
    if (fine[i] >= 0.0) {
      out.tdr_fine.push_back(fine[i]);
      out.tdr_coarse.push_back(coarse[i]);
    }
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

json box_json(const Box& b) { return {b.x0, b.y0, b.x1, b.y1}; }

// --- subcommands ----------------------------------------------------------

void cmd_synth(const Common& common, const std::string& out_dir, const std::string& preset_name,
               std::optional<int> benign, std::optional<int> melanoma) {
  const RunConfig cfg = load_run_config(common);
  const CorpusPreset preset = corpus_preset(preset_name);
  const CorpusManifest m = stage("synth", [&] {
    return gen_corpus(benign.value_or(preset.n_benign), melanoma.value_or(preset.n_melanoma), preset_name, cfg.seed,
                      out_dir);
  });
  std::cout << "wrote " << m.entries.size() << " images to " << out_dir << "\n";
}

void cmd_train_skin(const Common& common, const std::string& out, const std::vector<std::string>& skin_images,
                    const std::vector<std::string>& nonskin_images, const std::string& manifest, bool synthetic,
                    std::optional<int> components, std::optional<double> theta) {
  RunConfig cfg = load_run_config(common);
  if (components) cfg.skin_components = *components;
  if (theta) cfg.skin_theta = *theta;
  const int sources = (synthetic ? 1 : 0) + (manifest.empty() ? 0 : 1) + (skin_images.empty() ? 0 : 1);
  if (sources != 1) throw UsageError("give exactly one of --synthetic, --manifest or --skin/--nonskin");
  if (!skin_images.empty() && nonskin_images.empty()) throw UsageError("--skin needs --nonskin");

  SkinModel model;
  if (synthetic) {
    model = stage("train-skin", [&] { return synthetic_skin_model(cfg.seed, cfg.skin_components); });
  } else {
    std::vector<Rgb> skin, other;
    if (!manifest.empty()) {
      // Skin is everything outside the lesion masks; non-skin is lesion
      // pixels plus uniformly drawn colours.
      const CorpusManifest m = stage("manifest", [&] { return read_manifest(manifest); });
      const fs::path base = fs::path(manifest).parent_path();
      Rng rng(cfg.seed);
      for (const CorpusEntry& e : m.entries) {
        const RasterImage img = read_png((base / e.image).string());
        const BinaryMask mask = read_mask_png((base / e.mask).string());
        for (int y = 0; y < img.height(); y += 3)
          for (int x = 0; x < img.width(); x += 3) (mask(x, y) ? other : skin).push_back(img.at(x, y));
      }
      const std::size_t extra = std::max<std::size_t>(skin.size(), 1000);
      for (std::size_t i = 0; i < extra; ++i)
        other.push_back({static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                         static_cast<std::uint8_t>(rng.below(256))});
    } else {
      for (const auto& p : skin_images) {
        const RasterImage img = read_png(p);
        for (int y = 0; y < img.height(); ++y)
          for (int x = 0; x < img.width(); ++x) skin.push_back(img.at(x, y));
      }
      for (const auto& p : nonskin_images) {
        const RasterImage img = read_png(p);
        for (int y = 0; y < img.height(); ++y)
          for (int x = 0; x < img.width(); ++x) other.push_back(img.at(x, y));
      }
    }
    model = stage("train-skin", [&] {
      return train_skin_model(skin, other, cfg.skin_components, cfg.seed, cfg.skin_theta);
    });
  }
  model.theta = cfg.skin_theta;
  save_skin_model(out, model);
  std::cout << "wrote skin model to " << out << (model.variance_floored ? " (variance floor applied)" : "") << "\n";
}

void cmd_segment(const Common& common, const std::string& image_path, const std::string& skin_path,
                 const std::string& out_mask, const std::string& report_path) {
  const RunConfig cfg = load_run_config(common);
  const SkinModel skin = resolve_skin_model(skin_path, cfg);
  const RasterImage image = stage("read image", [&] { return read_png(image_path); });
  const BinaryMask skin_mask = stage("skin detection", [&] { return detect_skin(image, skin); });
  const LesionSegmentation seg = stage("segmentation", [&] { return segment_lesion(image, skin_mask, cfg.segmentation); });
  if (!out_mask.empty()) write_mask_png(out_mask, seg.fine);
  const auto regions = connected_components(seg.fine, 8);
  json r = report_header(cfg);
  r["image"] = image_path;
  r["coarse"] = {{"width", seg.coarse.width},
                 {"height", seg.coarse.height},
                 {"otsu_threshold", seg.coarse.stage.otsu_threshold},
                 {"area", seg.coarse.region.area},
                 {"bbox", box_json(seg.coarse.region.bbox)}};
  r["crop"] = box_json(seg.crop);
  r["fine"] = {{"otsu_threshold", seg.fine_stage.otsu_threshold}};
  if (!regions.empty()) {
    const Region& g = regions.front();
    r["lesion"] = {{"area", g.area}, {"centroid", {g.cx, g.cy}}, {"bbox", box_json(g.bbox)}};
  }
  if (!report_path.empty() || out_mask.empty()) emit(report_path, r.dump(2) + "\n");
}

void cmd_features(const Common& common, bool catalog_only, const std::string& image_path, const std::string& mask_path,
                  const std::string& manifest, bool gt_masks, const std::string& skin_path, const std::string& out) {
  if (catalog_only) {
    std::ostringstream s;
    s << "index,name,category,block\n";
    const auto& c = feature_catalog();
    for (std::size_t i = 0; i < c.size(); ++i)
      s << i << ',' << c[i].name << ',' << category_name(c[i].category) << ',' << block_name(c[i].block) << '\n';
    emit(out, s.str());
    return;
  }
  if (image_path.empty() == manifest.empty()) throw UsageError("give exactly one of --image or --manifest");
  const RunConfig cfg = load_run_config(common);
  FeatureTable t;
  if (!manifest.empty()) {
    const SkinModel skin = resolve_skin_model(skin_path, cfg);
    CorpusAnalysis a = analyze_corpus(manifest, skin, cfg, common.jobs, gt_masks);
    for (const auto& f : a.failures)
      std::cerr << "skipped " << f["image"].get<std::string>() << ": " << f["error"].get<std::string>() << "\n";
    t = std::move(a.table);
  } else {
    const RasterImage image = stage("read image", [&] { return read_png(image_path); });
    FeatureVector fv;
    if (!mask_path.empty()) {
      const BinaryMask mask = stage("read mask", [&] { return read_mask_png(mask_path); });
      fv = stage("features", [&] { return extract_all(image, mask); });
    } else {
      const SkinModel skin = resolve_skin_model(skin_path, cfg);
      fv = stage("analysis", [&] { return analyze_image(image, skin, cfg.segmentation).features; });
    }
    t.ids.push_back(image_path);
    t.labels.push_back(-1);
    t.rows.push_back(fv.values);
  }
  emit(out, table_to_csv(t));
}

void cmd_select(const Common& common, const std::string& features, const std::string& out) {
  const RunConfig cfg = load_run_config(common);
  const FeatureTable t = read_table(features);
  require_labels(t);
  const auto sel = stage("selection", [&] { return select_blocks(t.rows, t.labels, cfg); });
  json r = report_header(cfg);
  r["samples"] = t.rows.size();
  json blocks = json::array();
  for (const BlockSelection& s : sel) {
    json names = json::array();
    for (std::size_t i : s.features) names.push_back(feature_catalog()[i].name);
    blocks.push_back({{"block", std::string(block_name(s.block))}, {"features", names}, {"scores", s.scores}});
  }
  r["selection"] = blocks;
  emit(out, r.dump(2) + "\n");
}

FeatureTable load_training_table(const Common& common, const RunConfig& cfg, const std::string& manifest,
                                 const std::string& features, const SkinModel& skin, json* failures,
                                 std::vector<double>* tdr_fine, std::vector<double>* tdr_coarse) {
  if (manifest.empty() == features.empty()) throw UsageError("give exactly one of --manifest or --features");
  if (!features.empty()) {
    FeatureTable t = read_table(features);
    require_labels(t);
    return t;
  }
  CorpusAnalysis a = analyze_corpus(manifest, skin, cfg, common.jobs, false);
  if (failures) *failures = a.failures;
  if (tdr_fine) *tdr_fine = a.tdr_fine;
  if (tdr_coarse) *tdr_coarse = a.tdr_coarse;
  return std::move(a.table);
}

void cmd_train(const Common& common, const std::string& manifest, const std::string& features,
               const std::string& skin_path, const std::string& out) {
  const RunConfig cfg = load_run_config(common);
  const SkinModel skin = resolve_skin_model(skin_path, cfg);
  json failures = json::array();
  const FeatureTable t = load_training_table(common, cfg, manifest, features, skin, &failures, nullptr, nullptr);
  TrainedModel model = stage("training", [&] { return train_model(t.rows, t.labels, cfg); });
  model.skin = skin;
  save_model(out, model);
  std::cout << "trained on " << t.rows.size() << " samples";
  if (!failures.empty()) std::cout << " (" << failures.size() << " images skipped)";
  std::cout << "; wrote " << out << "\n";
}

void cmd_predict(const Common& common, const std::string& bundle, const std::string& image_path,
                 const std::string& out) {
  const TrainedModel model = stage("model", [&] { return load_model(bundle); });
  RunConfig cfg = config_from_json(model.config);
  if (!common.config_path.empty()) cfg = load_run_config(common);
  if (!model.skin) throw Error(ErrorKind::Format, "model bundle has no skin model");
  const RasterImage image = stage("read image", [&] { return read_png(image_path); });
  const ImageAnalysis a = stage("analysis", [&] { return analyze_image(image, *model.skin, cfg.segmentation); });
  const Verdict v = stage("classification", [&] { return classify_lesion(model, a.features.values); });
  json r = report_header(cfg);
  r["image"] = image_path;
  json soft = json::object();
  for (const auto& [b, s] : v.member_soft) soft[std::string(block_name(b))] = s;
  r["soft"] = soft;
  r["fusion"] = fusion_mode_name(model.fusion.mode);
  r["fused_soft"] = v.fused_soft;
  r["verdict"] = v.fused_hard ? "melanoma" : "benign";
  r["fused_hard"] = v.fused_hard;
  emit(out, r.dump(2) + "\n");
}

void cmd_evaluate(const Common& common, const std::string& manifest, const std::string& features,
                  const std::string& skin_path, const std::string& out, const std::string& roc_path) {
  const RunConfig cfg = load_run_config(common);
  const SkinModel skin = resolve_skin_model(skin_path, cfg);
  json failures = json::array();
  std::vector<double> fine, coarse;
  const FeatureTable t = load_training_table(common, cfg, manifest, features, skin, &failures, &fine, &coarse);
  const CvResult cv = stage("cross-validation", [&] { return cross_validate_features(t.rows, t.labels, cfg); });
  json r = report_header(cfg);
  long pos = 0;
  for (int l : t.labels) pos += l;
  r["samples"] = {{"total", t.rows.size()}, {"melanoma", pos}, {"benign", static_cast<long>(t.rows.size()) - pos}};
  r["skipped"] = failures;
  if (!fine.empty()) r["segmentation"] = {{"images", fine.size()}, {"mean_tdr_fine", mean(fine)}, {"mean_tdr_coarse", mean(coarse)}};
  r["cross_validation"] = cv_to_json(cv);
  emit(out, r.dump(2) + "\n");
  if (!roc_path.empty() && cv.roc) {
    std::ostringstream s;
    s << "fpr,tpr,threshold\n";
    for (const RocPoint& p : cv.roc->points)
      s << fmt(1.0 - p.specificity) << ',' << fmt(p.sensitivity) << ',' << (std::isfinite(p.threshold) ? fmt(p.threshold) : "inf")
        << '\n';
    emit(roc_path, s.str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lesion segmentation, feature extraction and melanoma classification"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "JSON run configuration");
  app.add_option("--jobs", common.jobs, "worker threads for per-image work (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", common.seed, "override the configured seed");

  std::string out, image, mask, manifest, features, skin_model, report, roc, bundle, preset = "standard";
  std::optional<int> benign, melanoma, components;
  std::optional<double> theta;
  std::vector<std::string> skin_images, nonskin_images;
  bool synthetic = false, catalog = false, gt_masks = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic lesion corpus");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--preset", preset, "standard (100/100) or paper-shape (99/55)");
  synth->add_option("--benign", benign, "number of benign images")->check(CLI::PositiveNumber);
  synth->add_option("--melanoma", melanoma, "number of melanoma images")->check(CLI::PositiveNumber);

  auto* train_skin = app.add_subcommand("train-skin", "fit the skin / non-skin colour mixtures");
  train_skin->add_option("--out", out, "skin model JSON")->required();
  train_skin->add_flag("--synthetic", synthetic, "train on the generator's skin tones");
  train_skin->add_option("--manifest", manifest, "corpus manifest; skin = pixels outside the lesion masks");
  train_skin->add_option("--skin", skin_images, "PNG images whose pixels are all skin");
  train_skin->add_option("--nonskin", nonskin_images, "PNG images whose pixels are all non-skin");
  train_skin->add_option("--components", components, "mixture components per class")->check(CLI::PositiveNumber);
  train_skin->add_option("--theta", theta, "likelihood-ratio threshold");

  auto* segment = app.add_subcommand("segment", "segment the lesion in one image");
  segment->add_option("--image", image, "input PNG")->required();
  segment->add_option("--skin-model", skin_model, "skin model JSON (default: synthetic)");
  segment->add_option("--out", out, "output mask PNG");
  segment->add_option("--report", report, "JSON report path (default stdout when no --out)");

  auto* feat = app.add_subcommand("features", "extract the feature catalog");
  feat->add_flag("--catalog", catalog, "print the catalog instead");
  feat->add_option("--image", image, "input PNG");
  feat->add_option("--mask", mask, "lesion mask PNG (skips segmentation)");
  feat->add_option("--manifest", manifest, "corpus manifest");
  feat->add_flag("--gt-masks", gt_masks, "use the manifest's masks instead of segmenting");
  feat->add_option("--skin-model", skin_model, "skin model JSON (default: synthetic)");
  feat->add_option("--out", out, "CSV output (default stdout)");

  auto* select = app.add_subcommand("select", "run per-category feature selection");
  select->add_option("--features", features, "feature CSV with labels")->required();
  select->add_option("--out", out, "JSON report (default stdout)");

  auto* train = app.add_subcommand("train", "train the classifier bundle");
  train->add_option("--manifest", manifest, "corpus manifest");
  train->add_option("--features", features, "feature CSV with labels");
  train->add_option("--skin-model", skin_model, "skin model JSON to embed (default: synthetic)");
  train->add_option("--out", out, "model bundle JSON")->required();

  auto* predict = app.add_subcommand("predict", "classify one image");
  predict->add_option("--bundle", bundle, "model bundle JSON")->required();
  predict->add_option("--image", image, "input PNG")->required();
  predict->add_option("--out", out, "JSON verdict (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "stratified cross-validation report");
  evaluate->add_option("--manifest", manifest, "corpus manifest");
  evaluate->add_option("--features", features, "feature CSV with labels");
  evaluate->add_option("--skin-model", skin_model, "skin model JSON (default: synthetic)");
  evaluate->add_option("--out", out, "JSON report (default stdout)");
  evaluate->add_option("--roc", roc, "ROC points CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth) cmd_synth(common, out, preset, benign, melanoma);
    else if (*train_skin) cmd_train_skin(common, out, skin_images, nonskin_images, manifest, synthetic, components, theta);
    else if (*segment) cmd_segment(common, image, skin_model, out, report);
    else if (*feat) cmd_features(common, catalog, image, mask, manifest, gt_masks, skin_model, out);
    else if (*select) cmd_select(common, features, out);
    else if (*train) cmd_train(common, manifest, features, skin_model, out);
    else if (*predict) cmd_predict(common, bundle, image, out);
    else if (*evaluate) cmd_evaluate(common, manifest, features, skin_model, out, roc);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
