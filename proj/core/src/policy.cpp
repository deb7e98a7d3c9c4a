// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "capgrpo/random.hpp"
#include "capgrpo/shortcut_env.hpp"

namespace capgrpo {

namespace {

enum Segment { kOutside = 0, kInfo = 1, kThink = 2, kAnswerSeg = 3 };

struct DecoderState {
  int last = -1;  // -1 before the first token
  int segment = kOutside;
  int seg_len = 0;
  std::vector<int> info_bag;
  std::vector<int> think_bag;
  std::vector<int> evidence;  // symbols stated for question slots
  const std::vector<bool>* relevant = nullptr;

  void advance(const Vocabulary& vocab, int token) {
    last = token;
    if (auto tag = vocab.tag_of(token)) {
      seg_len = 0;
      switch (*tag) {
        case TagId::kInfoOpen: segment = kInfo; break;
        case TagId::kThinkOpen: segment = kThink; break;
        case TagId::kAnswerOpen: segment = kAnswerSeg; break;
        default: segment = kOutside; break;
      }
      return;
    }
    ++seg_len;
    if (vocab.kind(token) == TokenKind::kEnd) return;
    auto add = [token](std::vector<int>& bag) {
      if (std::find(bag.begin(), bag.end(), token) == bag.end()) bag.push_back(token);
    };
    if (segment == kInfo) add(info_bag);
    if (segment == kThink) add(think_bag);
    if ((segment == kInfo || segment == kThink) && relevant) {
      if (auto a = vocab.attribute_of(token);
          a && static_cast<std::size_t>(a->first) < relevant->size() &&
          (*relevant)[static_cast<std::size_t>(a->first)] &&
          std::find(evidence.begin(), evidence.end(), a->second) == evidence.end()) {
        evidence.push_back(a->second);
      }
    }
  }

  void active_rows(const PolicyLayout& l, std::vector<int>& rows) const {
    rows.clear();
    rows.push_back(l.last_token_offset + (last < 0 ? l.vocab_size : last));
    for (int t : info_bag) rows.push_back(l.info_bag_offset + t);
    for (int t : think_bag) rows.push_back(l.think_bag_offset + t);
    for (int y : evidence) rows.push_back(l.evidence_offset + y);
    rows.push_back(l.segment_offset + segment);
    rows.push_back(l.length_offset + std::min(seg_len, kNumLengthBuckets - 1));
    rows.push_back(l.bias_offset);
  }
};

void check_context(const PolicyParams& params, std::span<const double> context) {
  if (static_cast<int>(context.size()) != params.layout.context_dim) {
    throw std::invalid_argument("context has dimension " + std::to_string(context.size()) +
                                ", policy expects " +
                                std::to_string(params.layout.context_dim));
  }
}

void check_tokens(const PolicyParams& params, std::span<const int> tokens) {
  for (int t : tokens) {
    if (t < 0 || t >= params.vocab_size()) {
      throw std::out_of_range("token " + std::to_string(t) + " outside the vocabulary");
    }
  }
}

// Computes logits step by step; the context contribution is shared.
class Forward {
 public:
  Forward(const PolicyParams& p, std::span<const double> context) : p_(p) {
    check_context(p, context);
    const int v = p.vocab_size();
    const int hd = p.hidden_dim;
    for (int i = 0; i < p.layout.context_dim; ++i) {
      const double x = context[static_cast<std::size_t>(i)];
      if (x != 0.0) ctx_.emplace_back(i, x);
    }
    if (p.layout.slot_feature_offset >= 0) {
      relevant_.assign(static_cast<std::size_t>(p.layout.num_slots), false);
      for (int s = 0; s < p.layout.num_slots; ++s) {
        relevant_[static_cast<std::size_t>(s)] =
            context[static_cast<std::size_t>(p.layout.slot_feature_offset + s)] != 0.0;
      }
    }
    z_ctx_.assign(static_cast<std::size_t>(v), 0.0);
    for (auto [row, x] : ctx_) {
      const double* w = &p.w_out[static_cast<std::size_t>(row) * static_cast<std::size_t>(v)];
      for (int k = 0; k < v; ++k) z_ctx_[static_cast<std::size_t>(k)] += x * w[k];
    }
    if (hd > 0) {
      a_ctx_ = p.b_hidden;
      for (auto [row, x] : ctx_) {
        const double* w = &p.w_hidden[static_cast<std::size_t>(row) * static_cast<std::size_t>(hd)];
        for (int j = 0; j < hd; ++j) a_ctx_[static_cast<std::size_t>(j)] += x * w[j];
      }
    }
  }

  const std::vector<std::pair<int, double>>& context_rows() const { return ctx_; }

  DecoderState start() const {
    DecoderState st;
    if (!relevant_.empty()) st.relevant = &relevant_;
    return st;
  }

  // Fills logits z (and hidden activations h when the policy has a hidden layer).
  void logits(std::span<const int> rows, std::vector<double>& z, std::vector<double>& h) const {
    const int v = p_.vocab_size();
    const int hd = p_.hidden_dim;
    z = z_ctx_;
    for (int row : rows) {
      const double* w = &p_.w_out[static_cast<std::size_t>(row) * static_cast<std::size_t>(v)];
      for (int k = 0; k < v; ++k) z[static_cast<std::size_t>(k)] += w[k];
    }
    if (hd == 0) return;
    h = a_ctx_;
    for (int row : rows) {
      const double* w = &p_.w_hidden[static_cast<std::size_t>(row) * static_cast<std::size_t>(hd)];
      for (int j = 0; j < hd; ++j) h[static_cast<std::size_t>(j)] += w[j];
    }
    for (auto& a : h) a = std::tanh(a);
    for (int j = 0; j < hd; ++j) {
      const double hj = h[static_cast<std::size_t>(j)];
      const double* w = &p_.w_out[static_cast<std::size_t>(p_.layout.dim + j) *
                                  static_cast<std::size_t>(v)];
      for (int k = 0; k < v; ++k) z[static_cast<std::size_t>(k)] += hj * w[k];
    }
  }

 private:
  const PolicyParams& p_;
  std::vector<std::pair<int, double>> ctx_;
  std::vector<double> z_ctx_;
  std::vector<double> a_ctx_;
  std::vector<bool> relevant_;
};

// In-place log-softmax of z / temperature.
void log_softmax(std::vector<double>& z, double temperature) {
  double mx = -std::numeric_limits<double>::infinity();
  for (auto& x : z) {
    x /= temperature;
    mx = std::max(mx, x);
  }
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  for (auto& x : z) x -= lse;
}

int argmax(const std::vector<double>& z) {
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<double> sequence_logprobs(const PolicyParams& params, const Forward& fwd,
                                      std::span<const int> tokens) {
  DecoderState st = fwd.start();
  std::vector<int> rows;
  std::vector<double> z, h;
  std::vector<double> out;
  out.reserve(tokens.size());
  for (int tok : tokens) {
    st.active_rows(params.layout, rows);
    fwd.logits(rows, z, h);
    log_softmax(z, 1.0);
    out.push_back(z[static_cast<std::size_t>(tok)]);
    st.advance(*params.vocab, tok);
  }
  return out;
}

// Adds d objective / d params for one sequence given d objective / d logp_t.
void backprop_sequence(const PolicyParams& params, const Forward& fwd,
                       std::span<const int> tokens, std::span<const double> dlogp,
                       PolicyParams& grad) {
  const int v = params.vocab_size();
  const int hd = params.hidden_dim;
  const auto vs = static_cast<std::size_t>(v);
  const auto hs = static_cast<std::size_t>(hd);
  DecoderState st = fwd.start();
  std::vector<int> rows;
  std::vector<double> z, h;
  std::vector<double> dz(vs), dz_sum(vs, 0.0);
  std::vector<double> da(hs), da_sum(hs, 0.0);

  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const int tok = tokens[t];
    st.active_rows(params.layout, rows);
    const double g = dlogp[t];
    if (g != 0.0) {
      fwd.logits(rows, z, h);
      log_softmax(z, 1.0);
      for (std::size_t k = 0; k < vs; ++k) dz[k] = -g * std::exp(z[k]);
      dz[static_cast<std::size_t>(tok)] += g;

      for (std::size_t k = 0; k < vs; ++k) dz_sum[k] += dz[k];
      for (int row : rows) {
        double* w = &grad.w_out[static_cast<std::size_t>(row) * vs];
        for (std::size_t k = 0; k < vs; ++k) w[k] += dz[k];
      }
      if (hd > 0) {
        for (std::size_t j = 0; j < hs; ++j) {
          const std::size_t hrow = static_cast<std::size_t>(params.layout.dim) + j;
          const double* w = &params.w_out[hrow * vs];
          double* gw = &grad.w_out[hrow * vs];
          double dh = 0.0;
          for (std::size_t k = 0; k < vs; ++k) {
            dh += w[k] * dz[k];
            gw[k] += h[j] * dz[k];
          }
          da[j] = dh * (1.0 - h[j] * h[j]);
          da_sum[j] += da[j];
          grad.b_hidden[j] += da[j];
        }
        for (int row : rows) {
          double* w = &grad.w_hidden[static_cast<std::size_t>(row) * hs];
          for (std::size_t j = 0; j < hs; ++j) w[j] += da[j];
        }
      }
    }
    st.advance(*params.vocab, tok);
  }

  for (auto [row, x] : fwd.context_rows()) {
    double* w = &grad.w_out[static_cast<std::size_t>(row) * vs];
    for (std::size_t k = 0; k < vs; ++k) w[k] += x * dz_sum[k];
    if (hd > 0) {
      double* wh = &grad.w_hidden[static_cast<std::size_t>(row) * hs];
      for (std::size_t j = 0; j < hs; ++j) wh[j] += x * da_sum[j];
    }
  }
}

SurrogateResult group_surrogate(const PolicyParams& params, const RolloutGroup& group,
                                const ClipConfig& clip, double beta_hat, bool want_gradient,
                                std::vector<std::vector<double>>& theta) {
  validate(group);
  const Forward fwd(params, group.context);
  theta.clear();
  for (const auto& s : group.sequences) {
    check_tokens(params, s.tokens);
    theta.push_back(sequence_logprobs(params, fwd, s.tokens));
  }
  std::vector<SequenceLogProbs> seqs;
  seqs.reserve(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    seqs.push_back({theta[i], group.sequences[i].logp_old, group.sequences[i].logp_ref});
  }
  return clipped_surrogate(seqs, group.advantages, clip, beta_hat, want_gradient);
}

}  // namespace

std::vector<double> policy_context(FormatMode mode, std::span<const double> task_features) {
  std::vector<double> x;
  x.reserve(task_features.size() + kNumPromptFeatures);
  x.push_back(mode == FormatMode::kReasonAnswer ? 1.0 : 0.0);
  x.push_back(mode == FormatMode::kCaptionReasonAnswer ? 1.0 : 0.0);
  x.insert(x.end(), task_features.begin(), task_features.end());
  return x;
}

PolicyLayout PolicyLayout::make(int context_dim, const Vocabulary& vocab,
                                int slot_feature_offset) {
  if (context_dim < 0) throw std::invalid_argument("bad policy shape");
  if (slot_feature_offset >= 0 && slot_feature_offset + vocab.num_slots() > context_dim) {
    throw std::invalid_argument("slot features fall outside the context");
  }
  PolicyLayout l;
  l.context_dim = context_dim;
  l.vocab_size = vocab.size();
  l.num_slots = vocab.num_slots();
  l.num_symbols = vocab.num_symbols();
  l.slot_feature_offset = slot_feature_offset < 0 ? -1 : slot_feature_offset;
  l.last_token_offset = context_dim;
  l.info_bag_offset = l.last_token_offset + l.vocab_size + 1;
  l.think_bag_offset = l.info_bag_offset + l.vocab_size;
  l.evidence_offset = l.think_bag_offset + l.vocab_size;
  l.segment_offset = l.evidence_offset + l.num_symbols;
  l.length_offset = l.segment_offset + kNumSegments;
  l.bias_offset = l.length_offset + kNumLengthBuckets;
  l.dim = l.bias_offset + 1;
  return l;
}

PolicyParams PolicyParams::zeros(std::shared_ptr<const Vocabulary> vocab, int context_dim,
                                 int hidden_dim, int slot_feature_offset) {
  if (!vocab) throw std::invalid_argument("policy needs a vocabulary");
  if (hidden_dim < 0) throw std::invalid_argument("hidden_dim must be >= 0");
  PolicyParams p;
  p.layout = PolicyLayout::make(context_dim, *vocab, slot_feature_offset);
  p.vocab = std::move(vocab);
  p.hidden_dim = hidden_dim;
  const auto v = static_cast<std::size_t>(p.layout.vocab_size);
  const auto d = static_cast<std::size_t>(p.layout.dim);
  const auto h = static_cast<std::size_t>(hidden_dim);
  p.w_out.assign((d + h) * v, 0.0);
  p.w_hidden.assign(d * h, 0.0);
  p.b_hidden.assign(h, 0.0);
  return p;
}

PolicyParams PolicyParams::zeros_like() const {
  return zeros(vocab, layout.context_dim, hidden_dim, layout.slot_feature_offset);
}

double& PolicyParams::at(std::size_t i) {
  if (i < w_out.size()) return w_out[i];
  i -= w_out.size();
  if (i < w_hidden.size()) return w_hidden[i];
  i -= w_hidden.size();
  return b_hidden.at(i);
}

double PolicyParams::at(std::size_t i) const {
  return const_cast<PolicyParams*>(this)->at(i);
}

bool PolicyParams::all_finite() const {
  auto ok = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(w_out) && ok(w_hidden) && ok(b_hidden);
}

SampledSequence sample_sequence(const PolicyParams& params, std::span<const double> context,
                                const GenerationConfig& cfg, std::uint64_t rng_seed) {
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (cfg.max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  const Forward fwd(params, context);
  Rng rng(rng_seed);
  DecoderState st = fwd.start();
  std::vector<int> rows;
  std::vector<double> z, h;
  SampledSequence out;
  for (int step = 0; step < cfg.max_tokens; ++step) {
    st.active_rows(params.layout, rows);
    fwd.logits(rows, z, h);
    log_softmax(z, cfg.temperature);
    const double u = rng.uniform();
    double acc = 0.0;
    int tok = static_cast<int>(z.size()) - 1;
    for (std::size_t k = 0; k < z.size(); ++k) {
      acc += std::exp(z[k]);
      if (u < acc) {
        tok = static_cast<int>(k);
        break;
      }
    }
    out.tokens.push_back(tok);
    out.logprobs.push_back(z[static_cast<std::size_t>(tok)]);
    if (tok == params.vocab->end_id()) break;
    st.advance(*params.vocab, tok);
  }
  return out;
}

SampledSequence greedy_sequence(const PolicyParams& params, std::span<const double> context,
                                int max_tokens) {
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  const Forward fwd(params, context);
  DecoderState st = fwd.start();
  std::vector<int> rows;
  std::vector<double> z, h;
  SampledSequence out;
  for (int step = 0; step < max_tokens; ++step) {
    st.active_rows(params.layout, rows);
    fwd.logits(rows, z, h);
    const int tok = argmax(z);
    log_softmax(z, 1.0);
    out.tokens.push_back(tok);
    out.logprobs.push_back(z[static_cast<std::size_t>(tok)]);
    if (tok == params.vocab->end_id()) break;
    st.advance(*params.vocab, tok);
  }
  return out;
}

std::vector<double> logprob_sequence(const PolicyParams& params, std::span<const double> context,
                                     std::span<const int> tokens) {
  check_tokens(params, tokens);
  const Forward fwd(params, context);
  return sequence_logprobs(params, fwd, tokens);
}

std::vector<double> next_token_distribution(const PolicyParams& params,
                                            std::span<const double> context,
                                            std::span<const int> prefix, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  check_tokens(params, prefix);
  const Forward fwd(params, context);
  DecoderState st = fwd.start();
  for (int t : prefix) st.advance(*params.vocab, t);
  std::vector<int> rows;
  std::vector<double> z, h;
  st.active_rows(params.layout, rows);
  fwd.logits(rows, z, h);
  log_softmax(z, temperature);
  for (auto& x : z) x = std::exp(x);
  return z;
}

double batch_objective(const PolicyParams& params, std::span<const RolloutGroup> groups,
                       const ClipConfig& clip, double beta_hat) {
  if (groups.empty()) throw std::invalid_argument("batch has no groups");
  std::vector<std::vector<double>> theta;
  double sum = 0.0;
  for (const auto& g : groups) {
    sum += group_surrogate(params, g, clip, beta_hat, false, theta).objective;
  }
  return sum / static_cast<double>(groups.size());
}

ObjectiveGradient objective_gradient(const PolicyParams& params,
                                     std::span<const RolloutGroup> groups,
                                     const ClipConfig& clip, double beta_hat) {
  if (groups.empty()) throw std::invalid_argument("batch has no groups");
  if (!params.all_finite()) throw std::invalid_argument("policy parameters are not finite");
  ObjectiveGradient out{0.0, 0.0, 0.0, params.zeros_like()};
  const double inv_g = 1.0 / static_cast<double>(groups.size());
  std::vector<std::vector<double>> theta;
  std::vector<double> scaled;
  for (const auto& g : groups) {
    auto res = group_surrogate(params, g, clip, beta_hat, true, theta);
    out.objective += res.objective;
    out.kl += res.kl;
    out.clip_fraction += res.clip_fraction;
    const Forward fwd(params, g.context);
    for (std::size_t i = 0; i < g.sequences.size(); ++i) {
      scaled = res.dlogp[i];
      for (auto& x : scaled) x *= inv_g;
      backprop_sequence(params, fwd, g.sequences[i].tokens, scaled, out.gradient);
    }
  }
  out.objective *= inv_g;
  out.kl *= inv_g;
  out.clip_fraction *= inv_g;
  return out;
}

void apply_update(PolicyParams& params, const PolicyParams& gradient, double learning_rate) {
  if (params.w_out.size() != gradient.w_out.size() ||
      params.w_hidden.size() != gradient.w_hidden.size() ||
      params.b_hidden.size() != gradient.b_hidden.size()) {
    throw std::invalid_argument("gradient shape does not match parameters");
  }
  auto step = [learning_rate](std::vector<double>& w, const std::vector<double>& g) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += learning_rate * g[i];
  };
  step(params.w_out, gradient.w_out);
  step(params.w_hidden, gradient.w_hidden);
  step(params.b_hidden, gradient.b_hidden);
}

PolicyParams make_prior_policy(std::shared_ptr<const Vocabulary> vocab, int num_attributes,
                               int num_symbols, int hidden_dim, const PriorConfig& prior) {
  const auto tf = TaskFeatureLayout::make(num_attributes, num_symbols);
  PolicyParams p = PolicyParams::zeros(vocab, kNumPromptFeatures + tf.dim, hidden_dim,
                                       kNumPromptFeatures + tf.slot_offset);
  const auto& voc = *p.vocab;
  const auto& l = p.layout;
  const double g = prior.grammar_strength;
  const int v = voc.size();
  auto tag = [&](TagId t) { return voc.tag_id(t); };
  auto each_kind = [&](TokenKind kind, auto&& fn) {
    for (int t = 0; t < v; ++t) {
      if (voc.kind(t) == kind) fn(t);
    }
  };
  auto all_tags = {TagId::kInfoOpen, TagId::kInfoClose, TagId::kThinkOpen,
                   TagId::kThinkClose, TagId::kAnswerOpen, TagId::kAnswerClose};

  // Structure tokens are unlikely unless something below licenses them.
  const int bias = l.bias_offset;
  p.out(bias, voc.end_id()) = -g;
  for (auto t : all_tags) p.out(bias, tag(t)) = -g;
  each_kind(TokenKind::kLabel, [&](int t) { p.out(bias, t) = -g; });
  each_kind(TokenKind::kAttribute, [&](int t) { p.out(bias, t) = prior.attribute_bias; });
  each_kind(TokenKind::kFiller, [&](int t) { p.out(bias, t) = prior.filler_bias; });

  // Opening: the prompt picks between <info> and <think>.
  const int start = l.last_token_offset + l.vocab_size;
  p.out(start, tag(TagId::kInfoOpen)) = 2 * g;
  p.out(start, tag(TagId::kThinkOpen)) = 2 * g;
  p.out(0, tag(TagId::kInfoOpen)) = -2 * g;  // reason-answer prompt
  p.out(1, tag(TagId::kThinkOpen)) = -g;     // caption-reason-answer prompt

  const int after = l.last_token_offset;
  p.out(after + tag(TagId::kInfoClose), tag(TagId::kThinkOpen)) = 3 * g;
  p.out(after + tag(TagId::kThinkClose), tag(TagId::kAnswerOpen)) = 3 * g;
  each_kind(TokenKind::kLabel,
            [&](int t) { p.out(after + t, tag(TagId::kAnswerClose)) = 3 * g; });
  p.out(after + tag(TagId::kAnswerClose), voc.end_id()) = 3 * g;

  // Free-text segments close after a few tokens.
  for (auto [seg, close] : {std::pair{kInfo, TagId::kInfoClose},
                            std::pair{kThink, TagId::kThinkClose}}) {
    const int row = l.segment_offset + seg;
    for (auto t : all_tags) p.out(row, tag(t)) = -g;
    p.out(row, tag(close)) = g;
    p.out(row, voc.end_id()) = -g;
    each_kind(TokenKind::kLabel, [&](int t) { p.out(row, t) = -g; });
  }
  each_kind(TokenKind::kAttribute, [&](int t) {
    p.out(l.segment_offset + kThink, t) = prior.reasoning_attribute_bias;
  });
  for (int b = 0; b < kNumLengthBuckets; ++b) {
    const double ramp = prior.close_slope * b + prior.close_offset;
    p.out(l.length_offset + b, tag(TagId::kInfoClose)) = ramp;
    p.out(l.length_offset + b, tag(TagId::kThinkClose)) = ramp;
  }

  // The answer segment holds one label.
  const int ans = l.segment_offset + kAnswerSeg;
  each_kind(TokenKind::kLabel, [&](int t) { p.out(ans, t) = 2 * g; });
  p.out(ans, tag(TagId::kAnswerClose)) = g;
  each_kind(TokenKind::kAttribute, [&](int t) { p.out(ans, t) = -2 * g; });
  each_kind(TokenKind::kFiller, [&](int t) { p.out(ans, t) = -2 * g; });

  // Answers of the kind the question asks for.
  const int ctx = kNumPromptFeatures;
  for (int tmpl = 0; tmpl < kNumTemplates; ++tmpl) {
    const auto qt = static_cast<QuestionTemplate>(tmpl);
    auto [lo, hi] = label_range(qt, num_attributes, num_symbols);
    for (int lab = 0; lab < voc.num_labels(); ++lab) {
      if (lab < lo || lab >= hi) p.out(ctx + tf.template_offset + tmpl, voc.label_id(lab)) = -g;
    }
  }

  // Free text tends to describe the image and avoids repeating itself.
  for (int s = 0; s < num_attributes; ++s) {
    for (int y = 0; y < num_symbols; ++y) {
      p.out(ctx + tf.attribute_index(s, y), voc.attribute_id(s, y)) = prior.copy_bias;
    }
  }
  for (int t = 0; t < v; ++t) {
    const auto kind = voc.kind(t);
    if (kind != TokenKind::kAttribute && kind != TokenKind::kFiller) continue;
    p.out(l.info_bag_offset + t, t) = -prior.repeat_penalty;
    p.out(l.think_bag_offset + t, t) = -prior.repeat_penalty;
  }

  // Answers lean towards symbols stated for the slots asked about.
  for (int y = 0; y < num_symbols; ++y) {
    p.out(l.evidence_offset + y, voc.label_id(y)) = prior.evidence_bias;
  }

  if (hidden_dim > 0) {
    Rng rng(mix_seed(prior.seed, 0x4849));
    for (auto& w : p.w_hidden) w = prior.hidden_init_scale * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

void save_params(const PolicyParams& params, std::ostream& out) {
  out << "capgrpo-policy 1\n";
  out << "context_dim " << params.layout.context_dim << " vocab " << params.layout.vocab_size
      << " hidden " << params.hidden_dim << " slot_features " << params.layout.slot_feature_offset
      << "\n";
  char buf[40];
  auto dump = [&](const char* name, const std::vector<double>& xs) {
    out << name << " " << xs.size() << "\n";
    for (double x : xs) {
      auto res = std::to_chars(buf, buf + sizeof buf, x);
      out << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << "\n";
    }
  };
  dump("w_out", params.w_out);
  dump("w_hidden", params.w_hidden);
  dump("b_hidden", params.b_hidden);
  if (!out) throw std::runtime_error("failed to write policy checkpoint");
}

PolicyParams load_params(std::istream& in, std::shared_ptr<const Vocabulary> vocab) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("malformed policy checkpoint: " + what);
  };
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "capgrpo-policy" || version != 1) fail("header");
  int context_dim = 0, vocab_size = 0, hidden = 0, slot_features = -1;
  std::string k1, k2, k3, k4;
  if (!(in >> k1 >> context_dim >> k2 >> vocab_size >> k3 >> hidden >> k4 >> slot_features) ||
      k1 != "context_dim" || k2 != "vocab" || k3 != "hidden" || k4 != "slot_features" ||
      context_dim < 0 || hidden < 0) {
    fail("shape line");
  }
  if (!vocab || vocab->size() != vocab_size) fail("vocabulary size mismatch");
  PolicyParams p = PolicyParams::zeros(std::move(vocab), context_dim, hidden, slot_features);
  auto read = [&](const char* name, std::vector<double>& xs) {
    std::size_t n = 0;
    if (!(in >> word >> n) || word != name || n != xs.size()) fail(std::string(name) + " size");
    for (auto& x : xs) {
      if (!(in >> word)) fail(std::string(name) + " values");
      auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), x);
      if (ec != std::errc{} || ptr != word.data() + word.size()) fail(word);
    }
  };
  read("w_out", p.w_out);
  read("w_hidden", p.w_hidden);
  read("b_hidden", p.b_hidden);
  if (!p.all_finite()) fail("non-finite weight");
  return p;
}

}  // namespace capgrpo
