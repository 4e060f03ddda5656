#include "racer/rl/qrsac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "racer/nn/checkpoint.hpp"
#include "racer/nn/tape.hpp"

namespace racer::rl {

using nn::Binds;
using nn::Tensor;

nn::CriticArch TrainerConfig::critic_arch() const {
  nn::CriticArch c;
  c.width = critic_width;
  c.depth = critic_depth;
  c.quantiles = quantiles;
  if (symmetric) {
    c.use_image = true;
    c.image_hw = actor_arch.image_hw;
    c.image_c = actor_arch.image_c;
    c.conv_channels = actor_arch.conv_channels;
    c.embed = actor_arch.embed;
    c.input_dim = actor_arch.embed + actor_arch.proprio + 2;
  } else {
    c.use_image = false;
    c.input_dim = global_dim + actor_arch.proprio + 2;
  }
  return c;
}

void TrainerConfig::validate() const {
  if (batch < 1 || quantiles < 1 || nstep < 1)
    throw std::invalid_argument("TrainerConfig: bad batch/quantiles/nstep");
  if (gamma <= 0.0 || gamma > 1.0 || tau <= 0.0 || tau > 1.0)
    throw std::invalid_argument("TrainerConfig: bad gamma/tau");
  if (kappa < 0.0) throw std::invalid_argument("TrainerConfig: bad kappa");
  if (symmetric && !actor_arch.use_image)
    throw std::invalid_argument(
        "TrainerConfig: symmetric mode needs image observations");
  policy.validate();
}

QrSacTrainer::QrSacTrainer(TrainerConfig cfg)
    : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  actor_.init(cfg_.actor_arch, cfg_.seed * 4 + 1);
  nn::CriticArch ca = cfg_.critic_arch();
  critic1_.init(ca, cfg_.seed * 4 + 2);
  critic2_.init(ca, cfg_.seed * 4 + 3);
  target1_.init(ca, cfg_.seed * 4 + 2);
  target2_.init(ca, cfg_.seed * 4 + 3);
  // targets start as exact copies
  auto sync = [](nn::CriticNet<float>& from, nn::CriticNet<float>& to) {
    auto a = from.params(), b = to.params();
    for (size_t i = 0; i < a.size(); ++i) b[i]->value = a[i]->value;
  };
  sync(critic1_, target1_);
  sync(critic2_, target2_);

  actor_opt_ = std::make_unique<nn::Adam<float>>(
      actor_.params(), static_cast<float>(cfg_.lr));
  std::vector<nn::Param<float>*> critic_params = critic1_.params();
  for (auto* p : critic2_.params()) critic_params.push_back(p);
  critic_opt_ = std::make_unique<nn::Adam<float>>(
      critic_params, static_cast<float>(cfg_.lr),
      static_cast<float>(cfg_.critic_clip_norm));
}

struct QrSacTrainer::Batch {
  int n = 0;
  bool use_image = false;
  Tensor<float> image, next_image;        // [N, C, H, W]
  Tensor<float> proprio, next_proprio;    // [N, P]
  Tensor<float> critic_state, next_critic_state;  // asym: [N, G+P]; sym: [N, P]
  Tensor<float> action;                   // [N, 2]
  std::vector<float> n_return, n_discount;
};

QrSacTrainer::Batch QrSacTrainer::assemble(const ReplayBuffer& buffer,
                                           const std::vector<size_t>& idx) {
  Batch b;
  b.n = static_cast<int>(idx.size());
  b.use_image = cfg_.actor_arch.use_image;
  const Transition& first = buffer.at(idx[0]);
  int P = static_cast<int>(first.obs.proprio.size());
  int G = static_cast<int>(first.obs.global_obs.size());
  int C = cfg_.actor_arch.image_c, HW = cfg_.actor_arch.image_hw;
  int img_n = C * HW * HW;

  if (b.use_image) {
    b.image = Tensor<float>({b.n, C, HW, HW});
    b.next_image = Tensor<float>({b.n, C, HW, HW});
  }
  b.proprio = Tensor<float>({b.n, P});
  b.next_proprio = Tensor<float>({b.n, P});
  int cs_dim = cfg_.symmetric ? P : G + P;
  b.critic_state = Tensor<float>({b.n, cs_dim});
  b.next_critic_state = Tensor<float>({b.n, cs_dim});
  b.action = Tensor<float>({b.n, 2});
  b.n_return.resize(b.n);
  b.n_discount.resize(b.n);

  for (int i = 0; i < b.n; ++i) {
    const Transition& t = buffer.at(idx[i]);
    if (static_cast<int>(t.obs.proprio.size()) != P)
      throw std::runtime_error("QrSacTrainer: inconsistent proprio dims");
    auto fill_obs = [&](const StoredObs& o, Tensor<float>* img,
                        Tensor<float>& prop, Tensor<float>& cs) {
      for (int k = 0; k < P; ++k) prop[i * P + k] = o.proprio[k];
      if (b.use_image) {
        if (static_cast<int>(o.image.size()) != img_n)
          throw std::runtime_error("QrSacTrainer: inconsistent image dims");
        for (int k = 0; k < img_n; ++k)
          (*img)[static_cast<size_t>(i) * img_n + k] = o.image[k] / 255.0f;
      }
      if (cfg_.symmetric) {
        for (int k = 0; k < P; ++k) cs[i * cs_dim + k] = o.proprio[k];
      } else {
        for (int k = 0; k < G; ++k) cs[i * cs_dim + k] = o.global_obs[k];
        for (int k = 0; k < P; ++k) cs[i * cs_dim + G + k] = o.proprio[k];
      }
    };
    fill_obs(t.obs, &b.image, b.proprio, b.critic_state);
    fill_obs(t.bootstrap_obs, &b.next_image, b.next_proprio,
             b.next_critic_state);
    b.action[i * 2] = t.action[0];
    b.action[i * 2 + 1] = t.action[1];
    b.n_return[i] = t.n_return;
    b.n_discount[i] = t.n_discount;
  }
  return b;
}

nn::Tensor<float> QrSacTrainer::build_targets(const ReplayBuffer& buffer,
                                              const std::vector<size_t>& idx) {
  Batch b = assemble(buffer, idx);
  int N = b.n, K = cfg_.quantiles;

  nn::Tape<float> tape;
  int nimg = b.use_image ? tape.input(b.next_image, false) : -1;
  int nprop = tape.input(b.next_proprio, false);
  int head = actor_.forward(tape, nimg, nprop, nullptr);

  // a' ~ pi(.|s') with its log density
  Tensor<float> next_action({N, 2});
  std::vector<double> log_pi(N);
  for (int i = 0; i < N; ++i) {
    double h[4];
    for (int k = 0; k < 4; ++k) h[k] = tape.value(head)[i * 4 + k];
    nn::PolicySample s = nn::sample_action(h, rng_, false, cfg_.policy);
    next_action[i * 2] = static_cast<float>(s.action[0]);
    next_action[i * 2 + 1] = static_cast<float>(s.action[1]);
    log_pi[i] = s.log_prob;
  }

  int na = tape.input(next_action, false);
  int ncs = tape.input(b.next_critic_state, false);
  int q1 = target1_.forward(tape, ncs, nimg, na, nullptr);
  int q2 = target2_.forward(tape, ncs, nimg, na, nullptr);

  Tensor<float> z({N, K});
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < K; ++j) {
      float qmin = std::min(tape.value(q1)[i * K + j], tape.value(q2)[i * K + j]);
      z[i * K + j] = b.n_return[i] +
                     b.n_discount[i] *
                         (qmin - static_cast<float>(cfg_.alpha * log_pi[i]));
    }
  return z;
}

void QrSacTrainer::train_step(const ReplayBuffer& buffer, double* critic_loss,
                              double* actor_loss, double* critic_grad_norm) {
  std::vector<size_t> idx = buffer.sample_indices(cfg_.batch, rng_);
  Tensor<float> z = build_targets(buffer, idx);
  Batch b = assemble(buffer, idx);
  float kappa = static_cast<float>(cfg_.kappa);

  // ---- critic update ----
  {
    nn::Tape<float> tape;
    Binds<float> binds;
    int img = cfg_.symmetric ? tape.input(b.image, false) : -1;
    int cs = tape.input(b.critic_state, false);
    int act = tape.input(b.action, false);
    int q1 = critic1_.forward(tape, cs, img, act, &binds);
    int q2 = critic2_.forward(tape, cs, img, act, &binds);
    int loss = tape.add(tape.quantile_huber_loss(q1, z, kappa),
                        tape.quantile_huber_loss(q2, z, kappa));
    tape.backward(loss);
    nn::accumulate_grads(tape, binds);
    double norm = critic_opt_->step();
    if (critic_loss) *critic_loss = tape.value(loss)[0];
    if (critic_grad_norm) *critic_grad_norm = norm;
  }

  // ---- actor update (gradients reach the critics only through the action) --
  {
    nn::Tape<float> tape;
    Binds<float> binds;
    int img = b.use_image ? tape.input(b.image, false) : -1;
    int prop = tape.input(b.proprio, false);
    int head = actor_.forward(tape, img, prop, &binds);

    Tensor<float> eps({b.n, 2});
    for (auto& e : eps.data) e = static_cast<float>(rng_.gaussian());
    nn::TapePolicy<float> pol = tape_sample(tape, head, eps, cfg_.policy);

    int cs = tape.input(b.critic_state, false);
    int q1 = critic1_.forward(tape, cs, img, pol.action, nullptr);
    int q2 = critic2_.forward(tape, cs, img, pol.action, nullptr);
    int qbar = tape.mean_rows(tape.minimum(q1, q2));  // [N, 1]
    int obj = tape.mean(tape.sub(
        tape.scale(pol.log_prob, static_cast<float>(cfg_.alpha)), qbar));
    tape.backward(obj);
    nn::accumulate_grads(tape, binds);
    actor_opt_->step();
    if (actor_loss) *actor_loss = tape.value(obj)[0];
  }

  // ---- Polyak target update ----
  auto polyak = [&](nn::CriticNet<float>& online, nn::CriticNet<float>& tgt) {
    auto o = online.params(), t = tgt.params();
    float tau = static_cast<float>(cfg_.tau);
    for (size_t p = 0; p < o.size(); ++p)
      for (size_t i = 0; i < o[p]->value.numel(); ++i)
        t[p]->value[i] = tau * o[p]->value[i] + (1.f - tau) * t[p]->value[i];
  };
  polyak(critic1_, target1_);
  polyak(critic2_, target2_);
}

EpochMetrics QrSacTrainer::train_epoch(const ReplayBuffer& buffer) {
  EpochMetrics m;
  if (buffer.size() < static_cast<size_t>(cfg_.batch)) {
    m.empty_buffer_warning = true;
    m.snapshot_version = version_;
    return m;
  }
  double closs_sum = 0.0, aloss_sum = 0.0;
  for (int s = 0; s < cfg_.steps_per_epoch; ++s) {
    double cl = 0.0, al = 0.0, gn = 0.0;
    train_step(buffer, &cl, &al, &gn);
    closs_sum += cl;
    aloss_sum += al;
    m.max_critic_grad_norm = std::max(m.max_critic_grad_norm, gn);
  }
  m.steps = cfg_.steps_per_epoch;
  m.critic_loss = closs_sum / cfg_.steps_per_epoch;
  m.actor_loss = aloss_sum / cfg_.steps_per_epoch;
  m.snapshot_version = ++version_;
  return m;
}

void QrSacTrainer::actor_head(const StoredObs& obs, double out[4]) {
  nn::Tape<float> tape;
  int img = -1;
  if (cfg_.actor_arch.use_image) {
    int C = cfg_.actor_arch.image_c, HW = cfg_.actor_arch.image_hw;
    Tensor<float> t({1, C, HW, HW});
    if (static_cast<int>(obs.image.size()) != C * HW * HW)
      throw std::runtime_error("actor_head: image dims mismatch");
    for (size_t i = 0; i < obs.image.size(); ++i)
      t[i] = obs.image[i] / 255.0f;
    img = tape.input(std::move(t), false);
  }
  Tensor<float> prop({1, static_cast<int>(obs.proprio.size())});
  for (size_t i = 0; i < obs.proprio.size(); ++i) prop[i] = obs.proprio[i];
  int head = actor_.forward(tape, img, tape.input(std::move(prop), false),
                            nullptr);
  for (int k = 0; k < 4; ++k) out[k] = tape.value(head)[k];
}

std::vector<nn::Param<float>*> QrSacTrainer::all_params() {
  std::vector<nn::Param<float>*> out = actor_.params();
  for (auto* net : {&critic1_, &critic2_, &target1_, &target2_})
    for (auto* p : net->params()) out.push_back(p);
  return out;
}

uint64_t QrSacTrainer::actor_hash() const {
  return nn::arch_hash(nn::describe(cfg_.actor_arch));
}

uint64_t QrSacTrainer::full_hash() const {
  return nn::arch_hash(nn::describe(cfg_.actor_arch) + "|" +
                       nn::describe(cfg_.critic_arch()) + "|x4");
}

}  // namespace racer::rl
