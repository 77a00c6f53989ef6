#include "dermscan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <thread>

#include "dermscan/error.hpp"
#include "dermscan/random.hpp"

namespace dermscan {

namespace {

constexpr const char* kModelMagic = "dermscan-model";
constexpr int kModelVersion = 1;

constexpr std::array<FeatureBlock, 5> kBlocks = {FeatureBlock::Color, FeatureBlock::Border, FeatureBlock::Asymmetry,
                                                 FeatureBlock::GlcmEdge, FeatureBlock::Lbp};

FeatureMatrix project_rows(const FeatureMatrix& x, const CategoryClassifier& c) {
  FeatureMatrix out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(c.project(row));
  return out;
}

CategoryClassifier train_member(const FeatureMatrix& x, std::span<const int> labels, FeatureBlock block,
                                const std::vector<std::size_t>& features, const RunConfig& cfg) {
  CategoryClassifier c;
  c.block = block;
  c.features = features;
  const FeatureMatrix px = project_rows(x, c);
  if (block == FeatureBlock::Lbp) {
    c.knn = train_knn(px, labels, cfg.knn_k);
  } else {
    SvmParams p = cfg.svm;
    p.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(block));
    c.svm = train_svm(px, labels, p);
  }
  return c;
}

const BlockSelection& find_selection(const std::vector<BlockSelection>& sel, FeatureBlock b) {
  for (const BlockSelection& s : sel)
    if (s.block == b) return s;
  throw Error(ErrorKind::InvalidArgument, "selection lacks block '" + std::string(block_name(b)) + "'");
}

std::vector<std::size_t> subset(std::span<const std::size_t> idx, std::size_t n) {
  return {idx.begin(), idx.begin() + static_cast<long>(std::min(n, idx.size()))};
}

}  // namespace

ImageAnalysis analyze_image(const RasterImage& image, const SkinModel& skin, const SegConfig& seg) {
  ImageAnalysis a;
  a.skin = detect_skin(image, skin);
  a.segmentation = segment_lesion(image, a.skin, seg);
  a.features = extract_all(image, a.segmentation.fine, &a.flags);
  return a;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& work) {
  unsigned threads = jobs > 0 ? static_cast<unsigned>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::vector<std::exception_ptr> errors(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            work(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<BlockSelection> select_blocks(const FeatureMatrix& x, std::span<const int> labels, const RunConfig& cfg) {
  std::vector<BlockSelection> out;
  for (FeatureBlock b : kBlocks) {
    BlockSelection s;
    s.block = b;
    const std::vector<std::size_t> all = block_indices(b);
    std::size_t m = all.size();
    if (b == FeatureBlock::Color) m = static_cast<std::size_t>(cfg.select_color);
    if (b == FeatureBlock::Border) m = static_cast<std::size_t>(cfg.select_border);
    if (b == FeatureBlock::GlcmEdge) m = static_cast<std::size_t>(cfg.select_texture);
    if (b == FeatureBlock::Asymmetry || b == FeatureBlock::Lbp) {
      s.features = all;
    } else if (!cfg.selection_enabled) {
      s.features = subset(all, m);
    } else {
      const SelectionResult r = select_features(x, labels, all, m, cfg.selection);
      s.features = r.indices;
      s.scores = r.scores;
    }
    out.push_back(std::move(s));
  }
  return out;
}

const CategoryClassifier& TrainedModel::member(FeatureBlock b) const {
  for (const CategoryClassifier& c : members)
    if (c.block == b) return c;
  throw Error(ErrorKind::InvalidArgument, "model lacks the '" + std::string(block_name(b)) + "' classifier");
}

TrainedModel train_model(const FeatureMatrix& x, std::span<const int> labels, const RunConfig& cfg,
                         const std::vector<BlockSelection>* selection) {
  cfg.validate();
  if (x.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "feature rows and labels differ in count");
  const std::size_t width = feature_catalog().size();
  for (const auto& row : x)
    if (row.size() != width) throw Error(ErrorKind::InvalidArgument, "feature rows must follow the full catalog");

  const std::vector<BlockSelection> sel = selection ? *selection : select_blocks(x, labels, cfg);
  TrainedModel m;
  m.tool = tool_version();
  m.config = config_to_json(cfg);
  for (const FeatureInfo& f : feature_catalog()) m.catalog.push_back(f.name);
  for (FeatureBlock b : kBlocks) m.members.push_back(train_member(x, labels, b, find_selection(sel, b).features, cfg));
  m.fusion_members = cfg.fusion_members;

  if (cfg.fusion == FusionMode::Sum) {
    m.fusion = make_sum_fusion(m.fusion_members.size());
    return m;
  }

  // Fusion is fitted on out-of-fold member scores from the training set.
  const std::vector<int> fold = stratified_kfold(labels, cfg.stacking_folds, derive_seed(cfg.seed, 100));
  FeatureMatrix oof(x.size(), std::vector<double>(m.fusion_members.size(), 0.0));
  for (int f = 0; f < cfg.stacking_folds; ++f) {
    FeatureMatrix xt;
    std::vector<int> yt;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (fold[i] != f) {
        xt.push_back(x[i]);
        yt.push_back(labels[i]);
      }
    for (std::size_t c = 0; c < m.fusion_members.size(); ++c) {
      const FeatureBlock b = m.fusion_members[c];
      const CategoryClassifier inner = train_member(xt, yt, b, find_selection(sel, b).features, cfg);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (fold[i] == f) oof[i][c] = inner.soft(x[i]);
    }
  }
  if (cfg.fusion == FusionMode::Hierarchical) {
    SvmParams p = cfg.svm;
    p.gamma = 0.0;
    p.seed = derive_seed(cfg.seed, 200);
    m.fusion = train_hierarchical(oof, labels, p);
  } else {
    m.fusion = fit_weighted_fusion(oof, labels, cfg.fusion);
  }
  return m;
}

Verdict classify_lesion(const TrainedModel& model, std::span<const double> features) {
  if (features.size() != model.catalog.size())
    throw Error(ErrorKind::InvalidArgument, "feature vector does not match the model catalog");
  Verdict v;
  for (const CategoryClassifier& c : model.members) v.member_soft.emplace_back(c.block, c.soft(features));
  std::vector<double> fused_in;
  for (FeatureBlock b : model.fusion_members) {
    const auto it = std::find_if(v.member_soft.begin(), v.member_soft.end(), [&](const auto& p) { return p.first == b; });
    if (it == v.member_soft.end())
      throw Error(ErrorKind::InvalidArgument, "model lacks fusion member '" + std::string(block_name(b)) + "'");
    fused_in.push_back(it->second);
  }
  v.fused_soft = model.fusion.soft(fused_in);
  v.fused_hard = model.fusion.hard(fused_in);
  return v;
}

nlohmann::json model_to_json(const TrainedModel& m) {
  nlohmann::json members = nlohmann::json::array();
  for (const CategoryClassifier& c : m.members) {
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t i : c.features) names.push_back(m.catalog.at(i));
    nlohmann::json mj = {{"block", std::string(block_name(c.block))}, {"features", names}};
    if (c.svm) mj["svm"] = svm_to_json(*c.svm);
    if (c.knn) mj["knn"] = knn_to_json(*c.knn);
    members.push_back(mj);
  }
  nlohmann::json fm = nlohmann::json::array();
  for (FeatureBlock b : m.fusion_members) fm.push_back(std::string(block_name(b)));
  nlohmann::json j = {{"magic", kModelMagic},      {"version", kModelVersion}, {"tool", m.tool},
                      {"config", m.config},        {"catalog", m.catalog},     {"members", members},
                      {"fusion_members", fm},      {"fusion", fusion_to_json(m.fusion)}};
  j["skin"] = m.skin ? skin_model_to_json(*m.skin) : nlohmann::json(nullptr);
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("magic", "") != kModelMagic) throw Error(ErrorKind::Format, "not a model bundle (bad magic)");
    if (j.at("version").get<int>() != kModelVersion) throw Error(ErrorKind::Format, "unsupported model bundle version");
    TrainedModel m;
    m.tool = j.at("tool").get<std::string>();
    m.config = j.at("config");
    m.catalog = j.at("catalog").get<std::vector<std::string>>();
    const auto& catalog = feature_catalog();
    if (m.catalog.size() != catalog.size()) throw Error(ErrorKind::Format, "bundle catalog size differs from this build");
    for (std::size_t i = 0; i < catalog.size(); ++i)
      if (m.catalog[i] != catalog[i].name) throw Error(ErrorKind::Format, "bundle catalog differs at '" + m.catalog[i] + "'");
    for (const auto& mj : j.at("members")) {
      CategoryClassifier c;
      c.block = parse_block(mj.at("block").get<std::string>());
      for (const auto& name : mj.at("features")) c.features.push_back(catalog_index(name.get<std::string>()));
      if (mj.contains("svm")) c.svm = svm_from_json(mj.at("svm"));
      if (mj.contains("knn")) c.knn = knn_from_json(mj.at("knn"));
      if (!c.svm && !c.knn) throw Error(ErrorKind::Format, "member '" + std::string(block_name(c.block)) + "' has no model");
      const std::size_t dim = c.svm ? c.svm->dimension() : c.knn->store.empty() ? 0 : c.knn->store.front().size();
      if (dim != c.features.size()) throw Error(ErrorKind::Format, "member feature count does not match its model");
      m.members.push_back(std::move(c));
    }
    for (const auto& b : j.at("fusion_members")) m.fusion_members.push_back(parse_block(b.get<std::string>()));
    m.fusion = fusion_from_json(j.at("fusion"));
    if (!j.at("skin").is_null()) m.skin = skin_model_from_json(j.at("skin"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed model bundle: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    throw Error(ErrorKind::Format, std::string("invalid model bundle: ") + e.what());
  }
}

void save_model(const std::string& path, const TrainedModel& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << model_to_json(m).dump() << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed model bundle: ") + e.what());
  }
  return model_from_json(j);
}

CvResult cross_validate_features(const FeatureMatrix& x, std::span<const int> labels, const RunConfig& cfg) {
  cfg.validate();
  std::optional<std::vector<BlockSelection>> global;
  if (cfg.selection_scope == SelectionScope::Global) global = select_blocks(x, labels, cfg);
  const std::vector<int> lab(labels.begin(), labels.end());
  return cross_validate(labels, cfg.cv_folds, cfg.seed, [&](int, const auto& train, const auto& test) {
    FeatureMatrix xt;
    std::vector<int> yt;
    for (std::size_t i : train) {
      xt.push_back(x[i]);
      yt.push_back(lab[i]);
    }
    const TrainedModel model = train_model(xt, yt, cfg, global ? &*global : nullptr);
    FoldOutput out;
    for (std::size_t i : test) {
      const Verdict v = classify_lesion(model, x[i]);
      out.soft.push_back(v.fused_soft);
      out.hard.push_back(v.fused_hard);
    }
    return out;
  });
}

}  // namespace dermscan
