#include "efr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "efr/binary_io.hpp"
#include "efr/error.hpp"
#include "efr/rng.hpp"
#include "efr/scorer.hpp"

namespace efr {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw InvalidArgument("warmup_fraction must be in [0, 1)");
  }
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (lambda < 0.0) throw InvalidArgument("lambda must be >= 0");
}

std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::adaptive ? "adaptive" : "momentless";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "momentless" || name == "sgd") return OptimizerKind::momentless;
  if (name == "adaptive" || name == "adamw") return OptimizerKind::adaptive;
  throw InvalidArgument("unknown optimizer \"" + name + "\"");
}

namespace {

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

double contrastive_loss(double positive, std::span<const double> negatives) {
  if (negatives.empty()) throw InvalidArgument("contrastive_loss: need at least one negative");
  std::vector<double> all;
  all.reserve(negatives.size() + 1);
  all.push_back(positive);
  all.insert(all.end(), negatives.begin(), negatives.end());
  return log_sum_exp(all) - positive;
}

double entity_bce(std::span<const double> s_qe, const std::vector<bool>& labels) {
  if (s_qe.size() != labels.size()) throw InvalidArgument("entity_bce: length mismatch");
  if (s_qe.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < s_qe.size(); ++i) {
    total += softplus(s_qe[i]) - (labels[i] ? s_qe[i] : 0.0);
  }
  return total / static_cast<double>(s_qe.size());
}

TrainingData::TrainingData(const Corpus& corpus, std::span<const QueryExample> queries,
                           std::span<const TrainingInstance> instances, std::size_t hash_dim) {
  std::map<std::string, std::size_t, std::less<>> query_pos;
  for (std::size_t i = 0; i < queries.size(); ++i) query_pos.emplace(queries[i].id, i);
  query_features_.resize(queries.size());
  std::vector<bool> query_done(queries.size(), false);

  std::map<std::size_t, std::size_t> passage_pos;  // corpus index -> local
  auto local_passage = [&](const std::string& id) {
    const auto ci = corpus.find(id);
    if (!ci) throw InvalidArgument("training instance references unknown passage " + id);
    auto [it, fresh] = passage_pos.emplace(*ci, passage_features_.size());
    if (fresh) passage_features_.push_back(featurize_tokens(passage_tokens(corpus[*ci]), hash_dim));
    return it->second;
  };

  std::map<std::string, std::shared_ptr<const EntitySet>> entity_cache;
  for (const auto& inst : instances) {
    auto qit = query_pos.find(inst.query_id);
    if (qit == query_pos.end()) {
      throw InvalidArgument("training instance references unknown query " + inst.query_id);
    }
    const std::size_t q = qit->second;
    if (!query_done[q]) {
      query_features_[q] = featurize_tokens(query_tokens(queries[q]), hash_dim);
      query_done[q] = true;
    }
    Example ex;
    ex.query = q;
    ex.positive = local_passage(inst.positive_id);
    ex.negative = local_passage(inst.negative_id);

    std::string key = inst.query_id;
    for (const auto& e : inst.entities) {
      key += '\x1f' + e.text + '\x1e' + std::string(to_string(e.source)) +
             (e.oracle_label.value_or(false) ? "1" : "0");
    }
    auto& slot = entity_cache[key];
    if (!slot) {
      auto set = std::make_shared<EntitySet>();
      for (const auto& e : inst.entities) {
        set->features.push_back(featurize_tokens(entity_tokens(e, queries[q]), hash_dim));
        set->labels.push_back(e.oracle_label.value_or(false));
      }
      slot = std::move(set);
    }
    ex.entities = slot;
    examples_.push_back(std::move(ex));
  }
}

Gradient::Gradient(const EncoderModel& model)
    : hash_dim_(model.hash_dim()),
      dim_(model.dim()),
      dense_begin_(model.head_weight_offset(Tower::query)),
      values_(model.params().size(), 0.0),
      marked_(3 * model.hash_dim(), 0) {
  for (Tower t : {Tower::query, Tower::passage, Tower::entity}) {
    const auto i = static_cast<std::size_t>(t);
    weight_offset_[i] = model.tower_weight_offset(t);
    bias_offset_[i] = model.tower_bias_offset(t);
  }
}

void Gradient::add_tower_row(Tower t, std::uint32_t feature, double scale, std::span<const double> g) {
  const std::size_t key = static_cast<std::size_t>(t) * hash_dim_ + feature;
  if (!marked_[key]) {
    marked_[key] = 1;
    touched_.emplace_back(t, feature);
  }
  double* row = values_.data() + weight_offset_[static_cast<std::size_t>(t)] + std::size_t{feature} * dim_;
  for (std::size_t i = 0; i < dim_; ++i) row[i] += scale * g[i];
}

void Gradient::clear() {
  for (auto [t, f] : touched_) {
    double* row = values_.data() + weight_offset_[static_cast<std::size_t>(t)] + std::size_t{f} * dim_;
    std::fill_n(row, dim_, 0.0);
    marked_[static_cast<std::size_t>(t) * hash_dim_ + f] = 0;
  }
  touched_.clear();
  for (Tower t : {Tower::query, Tower::passage, Tower::entity}) {
    std::fill_n(values_.data() + bias_offset_[static_cast<std::size_t>(t)], dim_, 0.0);
  }
  std::fill(values_.begin() + static_cast<std::ptrdiff_t>(dense_begin_), values_.end(), 0.0);
}

namespace {

// Tower output plus optional projection head, with what backward needs.
struct Node {
  const FeatureBag* features = nullptr;
  std::vector<double> f;
  double f_inv_std = 0.0;
  std::vector<double> g;
  double g_inv_std = 0.0;
  std::vector<double> grad_f;
  std::vector<double> grad_g;
};

Node forward(const EncoderModel& model, Tower t, const FeatureBag& features, bool with_head) {
  Node n;
  n.features = &features;
  const auto z = model.tower_preactivation(t, features);
  n.f.resize(z.size());
  layer_norm(z, model.config().epsilon, n.f, &n.f_inv_std);
  n.grad_f.assign(z.size(), 0.0);
  if (with_head) {
    const auto y = model.head_preactivation(t, n.f);
    n.g.resize(y.size());
    layer_norm(y, model.config().epsilon, n.g, &n.g_inv_std);
    n.grad_g.assign(y.size(), 0.0);
  }
  return n;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void backward(const EncoderModel& model, Tower t, Node& n, Gradient& grad) {
  const std::size_t d = model.dim();
  auto gv = grad.values();
  std::vector<double> tmp(d);
  if (!n.g.empty()) {
    layer_norm_backward(n.g, n.g_inv_std, n.grad_g, tmp);  // tmp = dL/dy
    const double* a = model.params().data() + model.head_weight_offset(t);
    double* ga = gv.data() + model.head_weight_offset(t);
    double* gc = gv.data() + model.head_bias_offset(t);
    for (std::size_t i = 0; i < d; ++i) {
      if (tmp[i] == 0.0) continue;
      gc[i] += tmp[i];
      for (std::size_t j = 0; j < d; ++j) {
        ga[i * d + j] += tmp[i] * n.f[j];
        n.grad_f[j] += a[i * d + j] * tmp[i];
      }
    }
  }
  layer_norm_backward(n.f, n.f_inv_std, n.grad_f, tmp);  // tmp = dL/dz
  axpy(1.0, tmp, gv.subspan(model.tower_bias_offset(t), d));
  for (const auto& [idx, count] : *n.features) grad.add_tower_row(t, idx, count, tmp);
}

}  // namespace

LossComponents batch_loss(const EncoderModel& model, const TrainingData& data,
                          std::span<const std::size_t> batch, const TrainConfig& config,
                          Gradient* grad) {
  const std::size_t B = batch.size();
  if (B == 0) throw InvalidArgument("batch_loss: empty batch");
  const bool need_heads = config.w_qpe != 0.0 || config.w_ent != 0.0;

  // Slot 2b is the positive of batch[b], slot 2b+1 its paired negative.
  std::vector<Node> passages;
  passages.reserve(2 * B);
  std::vector<Node> queries;
  queries.reserve(B);
  std::vector<std::vector<Node>> entities(B);
  std::size_t with_entities = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const auto& ex = data[batch[b]];
    passages.push_back(forward(model, Tower::passage, data.passage_features(ex.positive), need_heads));
    passages.push_back(forward(model, Tower::passage, data.passage_features(ex.negative), need_heads));
    queries.push_back(forward(model, Tower::query, data.query_features(ex.query), need_heads));
    if (need_heads) {
      for (const auto& fb : ex.entities->features) {
        entities[b].push_back(forward(model, Tower::entity, fb, true));
      }
    }
    if (!ex.entities->features.empty()) ++with_entities;
  }

  const std::size_t C = 2 * B;
  LossComponents out;
  out.candidates_per_query = C;
  const double scale_qp = config.w_qp / static_cast<double>(B);
  const double scale_e = with_entities ? 1.0 / static_cast<double>(with_entities) : 0.0;

  std::vector<double> s(C), p(C);
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t target = 2 * b;
    auto& q = queries[b];
    for (std::size_t j = 0; j < C; ++j) s[j] = dot(q.f, passages[j].f);
    const double lse = log_sum_exp(s);
    out.l_qp += lse - s[target];
    if (grad) {
      for (std::size_t j = 0; j < C; ++j) {
        const double gs = scale_qp * (std::exp(s[j] - lse) - (j == target ? 1.0 : 0.0));
        axpy(gs, passages[j].f, q.grad_f);
        axpy(gs, q.f, passages[j].grad_f);
      }
    }

    const auto& ex = data[batch[b]];
    const std::size_t ne = ex.entities->features.size();
    if (ne == 0 || !need_heads) continue;
    auto& ents = entities[b];

    std::vector<double> s_qe(ne);
    for (std::size_t e = 0; e < ne; ++e) s_qe[e] = dot(q.g, ents[e].g);
    const auto w = entity_weights(s_qe);
    std::vector<std::vector<double>> s_pe(C, std::vector<double>(ne));
    std::vector<double> S(C);
    for (std::size_t j = 0; j < C; ++j) {
      double num = 0.0;
      for (std::size_t e = 0; e < ne; ++e) {
        s_pe[j][e] = dot(passages[j].g, ents[e].g);
        num += w[e] * s_pe[j][e];
      }
      S[j] = num;
    }
    const double lse_e = log_sum_exp(S);
    out.l_qpe += lse_e - S[target];
    out.l_ent += entity_bce(s_qe, ex.entities->labels);

    if (!grad) continue;
    std::vector<double> ds_qe(ne, 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
      const double y = ex.entities->labels[e] ? 1.0 : 0.0;
      ds_qe[e] = config.w_ent * scale_e * (sigmoid(s_qe[e]) - y) / static_cast<double>(ne);
    }
    for (std::size_t j = 0; j < C; ++j) {
      const double dS = config.w_qpe * scale_e * (std::exp(S[j] - lse_e) - (j == target ? 1.0 : 0.0));
      if (dS == 0.0) continue;
      for (std::size_t e = 0; e < ne; ++e) {
        // dS_j/ds_qe_e = w_e * (1 - sigmoid(s_qe_e)) * (s_pe_je - S_j)
        ds_qe[e] += dS * (s_pe[j][e] - S[j]) * w[e] * sigmoid(-s_qe[e]);
        const double dpe = dS * w[e];
        axpy(dpe, ents[e].g, passages[j].grad_g);
        axpy(dpe, passages[j].g, ents[e].grad_g);
      }
    }
    for (std::size_t e = 0; e < ne; ++e) {
      axpy(ds_qe[e], ents[e].g, q.grad_g);
      axpy(ds_qe[e], q.g, ents[e].grad_g);
    }
  }

  out.l_qp /= static_cast<double>(B);
  out.l_qpe *= scale_e;
  out.l_ent *= scale_e;
  if (!need_heads) out.l_qpe = out.l_ent = 0.0;
  out.total = config.w_qp * out.l_qp + config.w_qpe * out.l_qpe + config.w_ent * out.l_ent;

  if (grad) {
    for (auto& n : passages) backward(model, Tower::passage, n, *grad);
    for (auto& n : queries) backward(model, Tower::query, n, *grad);
    for (auto& es : entities) {
      for (auto& n : es) backward(model, Tower::entity, n, *grad);
    }
  }
  return out;
}

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(config.warmup_fraction * static_cast<double>(total_steps));
  if (warmup == 0 || step >= warmup) return config.learning_rate;
  return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
}

namespace {

void sgd_step(EncoderModel& model, Gradient& grad, double lr) {
  auto p = model.params();
  auto g = grad.values();
  const std::size_t d = model.dim();
  for (auto [t, f] : grad.touched_rows()) {
    const std::size_t off = model.tower_weight_offset(t) + std::size_t{f} * d;
    for (std::size_t i = 0; i < d; ++i) p[off + i] -= lr * g[off + i];
  }
  for (Tower t : {Tower::query, Tower::passage, Tower::entity}) {
    const std::size_t off = model.tower_bias_offset(t);
    for (std::size_t i = 0; i < d; ++i) p[off + i] -= lr * g[off + i];
  }
  for (std::size_t i = model.head_weight_offset(Tower::query); i < p.size(); ++i) p[i] -= lr * g[i];
}

struct AdamState {
  std::vector<double> m, v;
  std::size_t t = 0;
};

void adamw_step(EncoderModel& model, const Gradient& grad, double lr, const TrainConfig& c,
                AdamState& st) {
  auto p = model.params();
  auto g = grad.values();
  if (st.m.empty()) {
    st.m.assign(p.size(), 0.0);
    st.v.assign(p.size(), 0.0);
  }
  ++st.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    st.m[i] = c.beta1 * st.m[i] + (1.0 - c.beta1) * g[i];
    st.v[i] = c.beta2 * st.v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double mh = st.m[i] / bc1;
    const double vh = st.v[i] / bc2;
    p[i] -= lr * (mh / (std::sqrt(vh) + c.adam_eps) + c.weight_decay * p[i]);
  }
}

}  // namespace

std::vector<LossRecord> train(EncoderModel& model, const TrainingData& data, const TrainConfig& config,
                              const EvalHook& hook) {
  config.validate();
  if (data.size() == 0) throw InvalidArgument("train: no training instances");
  const std::size_t B = config.batch_size;
  const std::size_t per_epoch = (data.size() + B - 1) / B;
  const std::size_t total = per_epoch * config.epochs;

  std::vector<LossRecord> history;
  history.reserve(total);
  Gradient grad(model);
  AdamState adam;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += B) {
      const std::size_t end = std::min(order.size(), begin + B);
      std::span<const std::size_t> batch(order.data() + begin, end - begin);
      grad.clear();
      const auto loss = batch_loss(model, data, batch, config, &grad);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step << " (epoch " << epoch << "): L_qp=" << loss.l_qp
            << " L_qpe=" << loss.l_qpe << " L_ent=" << loss.l_ent;
        throw Error(msg.str());
      }
      const double lr = scheduled_lr(config, step, total);
      if (config.optimizer == OptimizerKind::adaptive) {
        adamw_step(model, grad, lr, config, adam);
      } else {
        sgd_step(model, grad, lr);
      }
      history.push_back({step, loss.l_qp, loss.l_qpe, loss.l_ent, loss.total, lr});
      ++step;
      if (hook && config.eval_every > 0 && step % config.eval_every == 0) hook(step, model);
    }
  }
  return history;
}

GradCheckReport gradient_check(const EncoderModel& model, const TrainingData& data,
                               std::span<const std::size_t> batch, const TrainConfig& config,
                               const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("gradient_check: step must be positive");
  Gradient grad(model);
  batch_loss(model, data, batch, config, &grad);
  std::vector<double> analytic(grad.values().begin(), grad.values().end());
  if (options.tamper) options.tamper(analytic);

  std::vector<std::size_t> coords = options.coordinates;
  const std::size_t P = analytic.size();
  if (coords.empty()) {
    if (options.samples >= P) {
      coords.resize(P);
      std::iota(coords.begin(), coords.end(), 0);
    } else {
      Rng rng(options.seed);
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < P; ++i) {
        if (analytic[i] != 0.0) active.push_back(i);
      }
      rng.shuffle(active);
      const std::size_t from_active = std::min(active.size(), options.samples / 2);
      coords.assign(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(from_active));
      while (coords.size() < options.samples) coords.push_back(rng.index(P));
    }
  }

  EncoderModel probe = model;
  auto p = probe.params();
  GradCheckReport report;
  for (std::size_t c : coords) {
    if (c >= P) throw InvalidArgument("gradient_check: coordinate out of range");
    const double saved = p[c];
    p[c] = saved + options.step;
    const double up = batch_loss(probe, data, batch, config).total;
    p[c] = saved - options.step;
    const double down = batch_loss(probe, data, batch, config).total;
    p[c] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[c];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.floor});
    ++report.checked;
    if (report.checked == 1 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = c;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

std::string serialize_checkpoint(const EncoderModel& model, const std::string& config_echo) {
  BinaryWriter w;
  w.magic("EFCK");
  w.u32(kCheckpointFormatVersion);
  w.str(config_echo);
  const auto& c = model.config();
  w.u64(c.hash_dim);
  w.u64(c.dim);
  w.f64(c.epsilon);
  w.f64(c.init_scale);
  const auto p = model.params();
  w.u64(p.size());
  for (double x : p) w.f64(x);
  return w.data();
}

void save_checkpoint(const std::filesystem::path& path, const EncoderModel& model,
                     const std::string& config_echo) {
  write_file(path, serialize_checkpoint(model, config_echo));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(read_file(path), "checkpoint " + path.string());
  r.expect_magic("EFCK");
  r.expect_version(kCheckpointFormatVersion);
  auto echo = r.str();
  EncoderConfig c;
  c.hash_dim = r.u64();
  c.dim = r.u64();
  c.epsilon = r.f64();
  c.init_scale = r.f64();
  EncoderModel model(c);
  const auto n = r.u64();
  auto p = model.params();
  if (n != p.size()) throw FormatError("checkpoint: parameter count does not match encoder shape");
  for (auto& x : p) {
    x = r.f64();
    if (!std::isfinite(x)) throw FormatError("checkpoint: non-finite parameter");
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return {std::move(model), std::move(echo)};
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> history) {
  std::string buf = "step,L_qp,L_qpe,L_ent,lr\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", r.step, r.l_qp, r.l_qpe, r.l_ent, r.lr);
    buf += line;
  }
  write_file(path, buf);
}

}  // namespace efr
