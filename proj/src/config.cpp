#include "dermscan/config.hpp"

#include <fstream>
#include <set>

#include "dermscan/error.hpp"

namespace dermscan {

namespace {

std::string methods_name(SegMethods m) {
  switch (m) {
    case SegMethods::Both: return "both";
    case SegMethods::OtsuOnly: return "otsu";
    case SegMethods::MstOnly: return "mst";
  }
  return "?";
}

SegMethods parse_methods(const std::string& s) {
  if (s == "both") return SegMethods::Both;
  if (s == "otsu") return SegMethods::OtsuOnly;
  if (s == "mst") return SegMethods::MstOnly;
  throw Error(ErrorKind::InvalidArgument, "unknown segmentation methods '" + s + "' (expected both, otsu or mst)");
}

// Reads known keys of one JSON object and rejects anything else.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorKind::InvalidArgument, "config section '" + path_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::InvalidArgument, "config key '" + where(key) + "' has the wrong type");
    }
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, where(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + where(k) + "'");
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

FeatureBlock parse_block(const std::string& s) {
  for (FeatureBlock b : {FeatureBlock::Color, FeatureBlock::Border, FeatureBlock::Asymmetry, FeatureBlock::GlcmEdge,
                         FeatureBlock::Lbp})
    if (block_name(b) == s) return b;
  throw Error(ErrorKind::InvalidArgument,
              "unknown feature block '" + s + "' (expected color, border, asymmetry, glcm_edge or lbp)");
}

std::string tool_version() { return "dermscan 0.1.0"; }

void RunConfig::validate() const {
  segmentation.validate();
  selection.validate();
  svm.validate();
  if (skin_components < 1) throw Error(ErrorKind::InvalidArgument, "skin.components must be at least 1");
  if (!(skin_theta > 0.0)) throw Error(ErrorKind::InvalidArgument, "skin.theta must be positive");
  if (select_color < 1 || select_color > 54) throw Error(ErrorKind::InvalidArgument, "selection.count.color must lie in 1..54");
  if (select_border < 1 || select_border > 16)
    throw Error(ErrorKind::InvalidArgument, "selection.count.border must lie in 1..16");
  if (select_texture < 1 || select_texture > 9)
    throw Error(ErrorKind::InvalidArgument, "selection.count.texture must lie in 1..9");
  if (knn_k < 1) throw Error(ErrorKind::InvalidArgument, "classifier.knn_k must be at least 1");
  if (fusion_members.empty()) throw Error(ErrorKind::InvalidArgument, "fusion.members must not be empty");
  if (fusion != FusionMode::Sum && fusion_members.size() > 16)
    throw Error(ErrorKind::InvalidArgument, "fusion.members holds too many entries");
  if (fusion == FusionMode::Sum && fusion_members.size() != 4)
    throw Error(ErrorKind::InvalidArgument, "sum fusion needs exactly four members");
  std::set<FeatureBlock> uniq(fusion_members.begin(), fusion_members.end());
  if (uniq.size() != fusion_members.size()) throw Error(ErrorKind::InvalidArgument, "fusion.members repeats a block");
  if (stacking_folds < 2) throw Error(ErrorKind::InvalidArgument, "fusion.stacking_folds must be at least 2");
  if (cv_folds < 2) throw Error(ErrorKind::InvalidArgument, "evaluation.folds must be at least 2");
}

nlohmann::json config_to_json(const RunConfig& c) {
  const SegConfig& s = c.segmentation;
  nlohmann::json members = nlohmann::json::array();
  for (FeatureBlock b : c.fusion_members) members.push_back(std::string(block_name(b)));
  return {
      {"version", kConfigVersion},
      {"seed", c.seed},
      {"segmentation",
       {{"max_dim", s.coarse_max_dim},
        {"valid_fraction", s.valid_fraction},
        {"k_coarse", s.k_coarse},
        {"k_fine", s.fine_k()},
        {"coarse_min_size", s.coarse_min_size},
        {"fine_min_size", s.fine_min_size},
        {"min_roi_fraction", s.min_roi_fraction},
        {"crop_padding", s.crop_padding},
        {"majority_window", s.majority_window},
        {"mst_sigma", s.mst_sigma},
        {"methods", methods_name(s.methods)}}},
      {"skin", {{"components", c.skin_components}, {"theta", c.skin_theta}}},
      {"selection",
       {{"enabled", c.selection_enabled},
        {"criterion", criterion_name(c.selection.criterion)},
        {"alpha", c.selection.alpha},
        {"bins", c.selection.bins},
        {"neighbor_fraction", c.selection.neighbor_fraction},
        {"scope", c.selection_scope == SelectionScope::PerFold ? "per-fold" : "global"},
        {"count", {{"color", c.select_color}, {"border", c.select_border}, {"texture", c.select_texture}}}}},
      {"classifier",
       {{"c", c.svm.c},
        {"gamma", c.svm.gamma},
        {"mm_weight", c.svm.mm_weight},
        {"tolerance", c.svm.tolerance},
        {"calibration_folds", c.svm.calibration_folds},
        {"knn_k", c.knn_k}}},
      {"fusion", {{"mode", fusion_mode_name(c.fusion)}, {"members", members}, {"stacking_folds", c.stacking_folds}}},
      {"evaluation", {{"folds", c.cv_folds}}},
  };
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  Section root(j, "");
  int version = kConfigVersion;
  root.read("version", version);
  if (version != kConfigVersion) throw Error(ErrorKind::InvalidArgument, "unsupported config version");
  root.read("seed", c.seed);

  Section seg = root.sub("segmentation");
  SegConfig& s = c.segmentation;
  seg.read("max_dim", s.coarse_max_dim);
  seg.read("valid_fraction", s.valid_fraction);
  seg.read("k_coarse", s.k_coarse);
  seg.read("k_fine", s.k_fine);
  seg.read("coarse_min_size", s.coarse_min_size);
  seg.read("fine_min_size", s.fine_min_size);
  seg.read("min_roi_fraction", s.min_roi_fraction);
  seg.read("crop_padding", s.crop_padding);
  seg.read("majority_window", s.majority_window);
  seg.read("mst_sigma", s.mst_sigma);
  std::string methods = methods_name(s.methods);
  seg.read("methods", methods);
  s.methods = parse_methods(methods);
  seg.finish();

  Section skin = root.sub("skin");
  skin.read("components", c.skin_components);
  skin.read("theta", c.skin_theta);
  skin.finish();

  Section sel = root.sub("selection");
  sel.read("enabled", c.selection_enabled);
  std::string criterion = criterion_name(c.selection.criterion);
  sel.read("criterion", criterion);
  c.selection.criterion = parse_criterion(criterion);
  sel.read("alpha", c.selection.alpha);
  sel.read("bins", c.selection.bins);
  sel.read("neighbor_fraction", c.selection.neighbor_fraction);
  std::string scope = "per-fold";
  sel.read("scope", scope);
  if (scope == "per-fold") c.selection_scope = SelectionScope::PerFold;
  else if (scope == "global") c.selection_scope = SelectionScope::Global;
  else throw Error(ErrorKind::InvalidArgument, "selection.scope must be per-fold or global");
  Section count = sel.sub("count");
  count.read("color", c.select_color);
  count.read("border", c.select_border);
  count.read("texture", c.select_texture);
  count.finish();
  sel.finish();

  Section cls = root.sub("classifier");
  cls.read("c", c.svm.c);
  cls.read("gamma", c.svm.gamma);
  cls.read("mm_weight", c.svm.mm_weight);
  cls.read("tolerance", c.svm.tolerance);
  cls.read("calibration_folds", c.svm.calibration_folds);
  cls.read("knn_k", c.knn_k);
  cls.finish();

  Section fus = root.sub("fusion");
  std::string mode = fusion_mode_name(c.fusion);
  fus.read("mode", mode);
  c.fusion = parse_fusion_mode(mode);
  std::vector<std::string> members;
  fus.read("members", members);
  if (!members.empty()) {
    c.fusion_members.clear();
    for (const std::string& m : members) c.fusion_members.push_back(parse_block(m));
  }
  fus.read("stacking_folds", c.stacking_folds);
  fus.finish();

  Section ev = root.sub("evaluation");
  ev.read("folds", c.cv_folds);
  ev.finish();
  root.finish();

  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace dermscan
