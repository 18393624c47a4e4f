#include "mmdebias/embedspace/train.hpp"

#include <numeric>
#include <set>

#include "mmdebias/common/error.hpp"
#include "mmdebias/embedspace/neighbors.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::embedspace {

void SpaceConfig::validate() const {
  loss.validate();
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  if (neighbors == 0) throw ValidationError("semantic neighborhood size must be positive");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");
  if (batch_size == 0) throw ValidationError("batch size must be positive");
}

namespace {

struct Triplets {
  Modality anchor, positive, negative;
  std::vector<std::size_t> a, p, n;
  std::size_t size() const { return a.size(); }
};

class Trainer {
 public:
  Trainer(const std::vector<SpaceSample>& samples, DualEncoder& enc, const SpaceConfig& cfg)
      : samples_(samples), enc_(enc), cfg_(cfg), n_(samples.size()) {
    text_feat_.reserve(n_ * enc.text_features());
    image_feat_.reserve(n_ * enc.image_features());
    for (const auto& s : samples) {
      auto t = enc.text_featurize(s.text);
      text_feat_.insert(text_feat_.end(), t.begin(), t.end());
      image_feat_.insert(image_feat_.end(), s.image_features.begin(), s.image_features.end());
      scores_.push_back(*s.bias);
    }
  }

  void build_neighborhoods(const DocumentEmbedder& reference) {
    std::vector<std::string> ids;
    std::vector<double> ref;
    for (const auto& s : samples_) {
      ids.push_back(s.id);
      auto v = reference.embed(s.text);
      ref.insert(ref.end(), v.begin(), v.end());
    }
    semantic_.resize(n_);
    non_neighbors_.resize(n_);
    bias_members_.resize(n_);
    bias_negatives_local_.resize(n_);
    bias_negatives_global_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      semantic_[i] = semantic_neighbor_indices(i, ref, reference.dim(), ids, cfg_.neighbors);
      std::set<std::size_t> neigh(semantic_[i].begin(), semantic_[i].end());
      for (std::size_t j = 0; j < n_; ++j)
        if (j != i && !neigh.contains(j)) non_neighbors_[i].push_back(j);
      bias_members_[i] = bias_neighbor_indices(i, scores_, cfg_.epsilon);
      for (std::size_t j = 0; j < n_; ++j) {
        if (j == i || within_band(scores_[j], scores_[i], cfg_.epsilon)) continue;
        bias_negatives_global_[i].push_back(j);
        if (neigh.contains(j)) bias_negatives_local_[i].push_back(j);
      }
    }
  }

  StepRecord step(const std::vector<std::size_t>& anchors, Rng& rng, nn::Adam& adam) {
    Triplets img{Modality::image, Modality::image, Modality::image, {}, {}, {}};
    Triplets txt{Modality::text, Modality::text, Modality::text, {}, {}, {}};
    Triplets cross{Modality::text, Modality::image, Modality::image, {}, {}, {}};
    Triplets bias{Modality::image, Modality::image, Modality::image, {}, {}, {}};
    const bool use_bias = cfg_.loss.bias_weight > 0.0;
    for (auto a : anchors) {
      const auto& pos = semantic_[a];
      if (!pos.empty()) {
        push(img, a, pos[rng.index(pos.size())], semantic_negative(a, rng));
        if (cfg_.text_triplets) push(txt, a, pos[rng.index(pos.size())], semantic_negative(a, rng));
      }
      if (cfg_.cross_modal) push(cross, a, a, semantic_negative(a, rng));
      if (use_bias && !bias_members_[a].empty()) {
        const auto& local = bias_negatives_local_[a];
        const auto& global = bias_negatives_global_[a];
        const auto& negs = local.empty() ? global : local;
        if (!negs.empty()) push(bias, a, bias_members_[a][rng.index(bias_members_[a].size())], negs[rng.index(negs.size())]);
      }
    }

    enc_.text_projection().zero_grad();
    enc_.image_projection().zero_grad();
    StepRecord rec;
    const double semantic_count = static_cast<double>(img.size() + txt.size() + cross.size());
    if (semantic_count > 0) {
      double sum = 0.0;
      for (auto* t : {&img, &txt, &cross}) sum += run(*t, 1.0 / semantic_count);
      rec.semantic = sum / semantic_count;
    }
    if (use_bias && bias.size()) {
      double count = static_cast<double>(bias.size());
      rec.bias = cfg_.loss.bias_weight * run(bias, cfg_.loss.bias_weight / count) / count;
    }
    rec.objective = rec.semantic + rec.bias;
    nn::Param* params[] = {&enc_.text_projection(), &enc_.image_projection()};
    adam.step(params);
    return rec;
  }

 private:
  static void push(Triplets& t, std::size_t a, std::size_t p, std::optional<std::size_t> n) {
    if (!n) return;
    t.a.push_back(a);
    t.p.push_back(p);
    t.n.push_back(*n);
  }

  std::optional<std::size_t> semantic_negative(std::size_t a, Rng& rng) const {
    const auto& pool = non_neighbors_[a];
    if (!pool.empty()) return pool[rng.index(pool.size())];
    if (n_ < 2) return std::nullopt;
    std::size_t j = rng.index(n_ - 1);
    return j >= a ? j + 1 : j;
  }

  const std::vector<double>& features(Modality m) const { return m == Modality::text ? text_feat_ : image_feat_; }
  nn::Param& projection(Modality m) { return m == Modality::text ? enc_.text_projection() : enc_.image_projection(); }
  std::size_t feature_dim(Modality m) const {
    return m == Modality::text ? enc_.text_features() : enc_.image_features();
  }

  // Embeds one role of a triplet set; returns features (count x F) and outputs (count x D).
  std::pair<std::vector<double>, std::vector<double>> embed(Modality m, const std::vector<std::size_t>& idx) {
    const std::size_t f = feature_dim(m), d = enc_.config().dim;
    const auto& src = features(m);
    std::vector<double> x(idx.size() * f), y(idx.size() * d);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * f), f, x.begin() + static_cast<std::ptrdiff_t>(i * f));
    kernels::project(x, idx.size(), f, projection(m).value, d, y);
    return {std::move(x), std::move(y)};
  }

  // Returns the summed loss and accumulates scale x gradient into the towers.
  double run(const Triplets& t, double scale) {
    const std::size_t c = t.size(), d = enc_.config().dim;
    if (c == 0) return 0.0;
    auto [xa, ya] = embed(t.anchor, t.a);
    auto [xp, yp] = embed(t.positive, t.p);
    auto [xn, yn] = embed(t.negative, t.n);
    std::vector<double> loss(c), ga(c * d), gp(c * d), gn(c * d);
    kernels::angular_loss({ya, yp, yn, c, d, cfg_.loss.tan2_alpha(), cfg_.loss.hinge, loss, ga, gp, gn});
    for (auto* g : {&ga, &gp, &gn})
      for (auto& v : *g) v *= scale;
    kernels::project_grad(xa, c, feature_dim(t.anchor), ga, d, projection(t.anchor).grad);
    kernels::project_grad(xp, c, feature_dim(t.positive), gp, d, projection(t.positive).grad);
    kernels::project_grad(xn, c, feature_dim(t.negative), gn, d, projection(t.negative).grad);
    return std::accumulate(loss.begin(), loss.end(), 0.0);
  }

  const std::vector<SpaceSample>& samples_;
  DualEncoder& enc_;
  const SpaceConfig& cfg_;
  std::size_t n_;
  std::vector<double> text_feat_, image_feat_, scores_;
  std::vector<std::vector<std::size_t>> semantic_, non_neighbors_, bias_members_, bias_negatives_local_,
      bias_negatives_global_;
};

}  // namespace

EmbeddingTable build_table(const DualEncoder& encoder, const std::vector<SpaceSample>& samples, bool normalize) {
  EmbeddingTable table(encoder.config().dim);
  for (const auto& s : samples) {
    auto t = encoder.embed_text(s.text);
    auto i = encoder.project_image(s.image_features);
    if (normalize) {
      t = l2_normalized(std::move(t));
      i = l2_normalized(std::move(i));
    }
    table.add(s.id, {std::move(t), Modality::text});
    table.add(s.id, {std::move(i), Modality::image});
  }
  return table;
}

TrainedSpace train_space(const std::vector<SpaceSample>& samples, DualEncoder encoder, const DocumentEmbedder& reference,
                         const SpaceConfig& config, std::size_t epochs, std::uint64_t seed) {
  config.validate();
  if (samples.empty()) throw ValidationError("cannot train the space on an empty corpus");
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!s.bias) throw ValidationError("image '" + s.id + "' has no bias score");
    if (*s.bias < -1.0 || *s.bias > 1.0) throw ValidationError("image '" + s.id + "' bias outside [-1, 1]");
    if (s.image_features.size() != encoder.image_features())
      throw ValidationError("image '" + s.id + "' features do not match the image tower");
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sample id '" + s.id + "'");
  }

  TrainedSpace out;
  Trainer trainer(samples, encoder, config);
  trainer.build_neighborhoods(reference);
  Rng rng(seed);
  nn::Adam adam(config.learning_rate);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<std::size_t> anchors(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(std::min(start + config.batch_size, order.size())));
      auto rec = trainer.step(anchors, rng, adam);
      out.history.steps.push_back(rec);
      sum += rec.objective;
      ++steps;
    }
    out.history.epoch_objective.push_back(steps ? sum / static_cast<double>(steps) : 0.0);
  }
  out.table = build_table(encoder, samples, true);
  out.encoder = std::move(encoder);
  return out;
}

}  // namespace mmdebias::embedspace
