//! Soft actor-critic agent with a regularised autoencoder on the pixel encoder.

use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use uavnav_tensor::{checkpoint, Adam, Gradients, Tape, Tensor, Var};

use crate::error::{contract, Error, Result};
use crate::nets::{
    bind, command_to_squashed, soft_update, squashed_to_command, Actor, Critic, Decoder, Encoder, Module, NetConfig,
    ACTION_DIM, STATE_DIM,
};
use crate::observation::{Observation, STACK_LEN};
use crate::replay::Transition;
use crate::world::Command;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub gamma: f32,
    pub critic_lr: f32,
    pub critic_tau: f32,
    pub encoder_tau: f32,
    pub critic_target_update_freq: u64,
    pub actor_lr: f32,
    pub actor_update_freq: u64,
    pub ae_lr: f32,
    pub latent_penalty: f32,
    pub decoder_weight_penalty: f32,
    pub init_temperature: f32,
    pub alpha_lr: f32,
    pub target_entropy: f32,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            critic_lr: 1e-3,
            critic_tau: 0.01,
            encoder_tau: 0.05,
            critic_target_update_freq: 2,
            actor_lr: 1e-3,
            actor_update_freq: 2,
            ae_lr: 1e-3,
            latent_penalty: 1e-6,
            decoder_weight_penalty: 1e-7,
            init_temperature: 0.1,
            alpha_lr: 1e-4,
            target_entropy: -(ACTION_DIM as f32),
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return contract(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        let rates = [
            self.critic_lr,
            self.actor_lr,
            self.ae_lr,
            self.alpha_lr,
            self.init_temperature,
        ];
        if rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return contract("learning rates and initial temperature must be positive");
        }
        for tau in [self.critic_tau, self.encoder_tau] {
            if !(tau > 0.0 && tau <= 1.0) {
                return contract(format!("soft-update rate must be in (0, 1], got {}", tau));
            }
        }
        if self.critic_target_update_freq == 0 || self.actor_update_freq == 0 {
            return contract("update frequencies must be positive");
        }
        if self.latent_penalty < 0.0 || self.decoder_weight_penalty < 0.0 {
            return contract("autoencoder penalties must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    Sample,
    Mean,
}

/// Pixel stacks, state features and squashed actions as tensors.
#[derive(Clone, Debug)]
pub struct Batch {
    pub pixels: Tensor,
    pub state: Tensor,
    /// Actions mapped back into `[-1, 1]`.
    pub action: Tensor,
    pub reward: Tensor,
    pub next_pixels: Tensor,
    pub next_state: Tensor,
    pub not_done: Tensor,
}

/// `N×3×H×W` pixels and `N×6` state features.
pub fn observation_tensors(obs: &[&Observation]) -> Result<(Tensor, Tensor)> {
    let Some(first) = obs.first() else {
        return contract("empty observation batch");
    };
    let (h, w) = (first.height, first.width);
    let mut pixels = Vec::with_capacity(obs.len() * STACK_LEN * h * w);
    let mut state = Vec::with_capacity(obs.len() * STATE_DIM);
    for o in obs {
        if (o.height, o.width) != (h, w) {
            return contract("observations of different resolutions in one batch");
        }
        o.write_stack(&mut pixels);
        state.extend_from_slice(&o.state_features());
    }
    Ok((
        Tensor::new(&[obs.len(), STACK_LEN, h, w], pixels)?,
        Tensor::new(&[obs.len(), STATE_DIM], state)?,
    ))
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        let n = ts.len();
        let obs: Vec<&Observation> = ts.iter().map(|t| &t.obs).collect();
        let next: Vec<&Observation> = ts.iter().map(|t| &t.next_obs).collect();
        let (pixels, state) = observation_tensors(&obs)?;
        let (next_pixels, next_state) = observation_tensors(&next)?;
        let action = ts
            .iter()
            .flat_map(|t| command_to_squashed(t.action.to_array()))
            .collect();
        Ok(Self {
            pixels,
            state,
            action: Tensor::new(&[n, ACTION_DIM], action)?,
            reward: Tensor::new(&[n, 1], ts.iter().map(|t| t.reward as f32).collect())?,
            next_pixels,
            next_state,
            not_done: Tensor::new(&[n, 1], ts.iter().map(|t| if t.done { 0.0 } else { 1.0 }).collect())?,
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f32,
    pub actor_loss: Option<f32>,
    pub alpha_loss: Option<f32>,
    pub ae_loss: f32,
    pub alpha: f32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentMeta {
    height: usize,
    width: usize,
    network: NetConfig,
    sac: SacConfig,
    update_step: u64,
    critic_opt_steps: u64,
    actor_opt_steps: u64,
    alpha_opt_steps: u64,
    ae_opt_steps: u64,
}

const META_FILE: &str = "agent.toml";
const OPTIM_FILE: &str = "optim.ckpt";

fn normal(shape: &[usize], rng: &mut dyn RngCore) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    Tensor::new(shape, data).expect("noise shape")
}

fn grads_of(g: &Gradients, vars: &[Var]) -> Vec<Tensor> {
    vars.iter().map(|&v| g.wrt(v)).collect()
}

#[derive(Clone, Debug)]
pub struct SacAgent {
    pub sac: SacConfig,
    pub network: NetConfig,
    pub height: usize,
    pub width: usize,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub actor: Actor,
    pub critic: Critic,
    pub target_encoder: Encoder,
    pub target_critic: Critic,
    /// `log α`, shape `[1]`.
    pub log_alpha: Tensor,
    critic_opt: Adam,
    actor_opt: Adam,
    alpha_opt: Adam,
    ae_opt: Adam,
    update_step: u64,
}

impl SacAgent {
    pub fn new(height: usize, width: usize, network: NetConfig, sac: SacConfig, seed: u64) -> Result<Self> {
        sac.validate()?;
        network.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(height, width, &network, &mut rng)?;
        let decoder = Decoder::new(height, width, &network, &mut rng)?;
        let actor = Actor::new(network.latent_dim, &network, &mut rng);
        let critic = Critic::new(network.latent_dim, &network, &mut rng);
        let log_alpha = Tensor::new(&[1], vec![sac.init_temperature.ln()])?;
        let critic_opt = Adam::new(
            sac.critic_lr,
            encoder.params().into_iter().chain(critic.params()).map(|(_, t)| t),
        );
        let actor_opt = Adam::new(sac.actor_lr, actor.params().into_iter().map(|(_, t)| t));
        let alpha_opt = Adam::new(sac.alpha_lr, [&log_alpha]);
        let ae_opt = Adam::new(
            sac.ae_lr,
            encoder.params().into_iter().chain(decoder.params()).map(|(_, t)| t),
        );
        Ok(Self {
            sac,
            network,
            height,
            width,
            target_encoder: encoder.clone(),
            target_critic: critic.clone(),
            encoder,
            decoder,
            actor,
            critic,
            log_alpha,
            critic_opt,
            actor_opt,
            alpha_opt,
            ae_opt,
            update_step: 0,
        })
    }

    pub fn alpha(&self) -> f32 {
        self.log_alpha.data()[0].exp()
    }

    /// Completed calls to [`SacAgent::update`].
    pub fn update_step(&self) -> u64 {
        self.update_step
    }

    /// Encoder latent concatenated with the state features.
    fn features(
        &self,
        tape: &mut Tape,
        encoder: &Encoder,
        enc_vars: &[Var],
        pixels: Tensor,
        state: Tensor,
    ) -> Result<Var> {
        let x = tape.constant(pixels);
        let z = encoder.forward(tape, enc_vars, x)?;
        let s = tape.constant(state);
        Ok(tape.concat_cols(&[z, s])?)
    }

    pub fn encode(&self, obs: &[&Observation]) -> Result<Tensor> {
        let (pixels, _) = observation_tensors(obs)?;
        let mut tape = Tape::new();
        let p = bind(&self.encoder, &mut tape, false);
        let x = tape.constant(pixels);
        let z = self.encoder.forward(&mut tape, &p, x)?;
        Ok(tape.value(z).clone())
    }

    /// One command per observation; `Mean` is the deterministic policy.
    pub fn act(&self, obs: &[&Observation], mode: ActMode, rng: &mut dyn RngCore) -> Result<Vec<Command>> {
        if obs.is_empty() {
            return Ok(Vec::new());
        }
        let (pixels, state) = observation_tensors(obs)?;
        let mut tape = Tape::new();
        let ep = bind(&self.encoder, &mut tape, false);
        let feats = self.features(&mut tape, &self.encoder, &ep, pixels, state)?;
        let ap = bind(&self.actor, &mut tape, false);
        let noise = match mode {
            ActMode::Sample => Some(normal(&[obs.len(), ACTION_DIM], rng)),
            ActMode::Mean => None,
        };
        let out = self.actor.forward(&mut tape, &ap, feats, noise)?;
        Ok(tape
            .value(out.squashed)
            .data()
            .chunks(ACTION_DIM)
            .map(|a| {
                let [f, c, y] = squashed_to_command(a);
                Command::new(f, c, y).clamped()
            })
            .collect())
    }

    /// `(q1, q2)` for observations and commands, each `N`.
    pub fn q_values(&self, obs: &[&Observation], actions: &[Command]) -> Result<(Vec<f32>, Vec<f32>)> {
        if obs.len() != actions.len() {
            return contract("one action per observation required");
        }
        let (pixels, state) = observation_tensors(obs)?;
        let act: Vec<f32> = actions.iter().flat_map(|a| command_to_squashed(a.to_array())).collect();
        let mut tape = Tape::new();
        let ep = bind(&self.encoder, &mut tape, false);
        let feats = self.features(&mut tape, &self.encoder, &ep, pixels, state)?;
        let a = tape.constant(Tensor::new(&[obs.len(), ACTION_DIM], act)?);
        let input = tape.concat_cols(&[feats, a])?;
        let cp = bind(&self.critic, &mut tape, false);
        let (q1, q2) = self.critic.forward(&mut tape, &cp, input)?;
        Ok((tape.value(q1).data().to_vec(), tape.value(q2).data().to_vec()))
    }

    /// Bootstrapped target `r + γ·(1 − d)·(min Q̄(o′, a′) − α·log π(a′|o′))`, `N×1`.
    pub fn critic_target(&self, batch: &Batch, rng: &mut dyn RngCore) -> Result<Tensor> {
        let n = batch.len();
        let mut tape = Tape::new();
        let ep = bind(&self.encoder, &mut tape, false);
        let next = self.features(
            &mut tape,
            &self.encoder,
            &ep,
            batch.next_pixels.clone(),
            batch.next_state.clone(),
        )?;
        let ap = bind(&self.actor, &mut tape, false);
        let pol = self
            .actor
            .forward(&mut tape, &ap, next, Some(normal(&[n, ACTION_DIM], rng)))?;
        let tep = bind(&self.target_encoder, &mut tape, false);
        let tnext = self.features(
            &mut tape,
            &self.target_encoder,
            &tep,
            batch.next_pixels.clone(),
            batch.next_state.clone(),
        )?;
        let input = tape.concat_cols(&[tnext, pol.squashed])?;
        let tp = bind(&self.target_critic, &mut tape, false);
        let (q1, q2) = self.target_critic.forward(&mut tape, &tp, input)?;
        let qmin = tape.minimum(q1, q2)?;
        let lp = tape
            .value(pol.log_prob.expect("sampled policy has a log-prob"))
            .data()
            .to_vec();
        let alpha = self.alpha();
        let gamma = self.sac.gamma;
        let y = tape
            .value(qmin)
            .data()
            .iter()
            .zip(&lp)
            .zip(batch.reward.data().iter().zip(batch.not_done.data()))
            .map(|((&q, &l), (&r, &nd))| r + gamma * nd * (q - alpha * l))
            .collect();
        Ok(Tensor::new(&[n, 1], y)?)
    }

    /// Twin-head MSE against the bootstrapped target; steps encoder and critic.
    pub fn update_critic(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<f32> {
        let target = self.critic_target(batch, rng)?;
        let mut tape = Tape::new();
        let ep = bind(&self.encoder, &mut tape, true);
        let feats = self.features(&mut tape, &self.encoder, &ep, batch.pixels.clone(), batch.state.clone())?;
        let a = tape.constant(batch.action.clone());
        let input = tape.concat_cols(&[feats, a])?;
        let cp = bind(&self.critic, &mut tape, true);
        let (q1, q2) = self.critic.forward(&mut tape, &cp, input)?;
        let y = tape.constant(target);
        let l1 = tape.mse(q1, y)?;
        let l2 = tape.mse(q2, y)?;
        let loss = tape.add(l1, l2)?;
        let g = tape.backward(loss)?;
        let vars: Vec<Var> = ep.iter().chain(&cp).copied().collect();
        let grads = grads_of(&g, &vars);
        let mut params: Vec<&mut Tensor> = self.encoder.params_mut();
        params.extend(self.critic.params_mut());
        self.critic_opt.step(&mut params, &grads)?;
        Ok(tape.value(loss).item())
    }

    /// Policy step on a detached latent, then the temperature step.
    /// Returns `(J(π), J(α))`.
    pub fn update_actor_and_alpha(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<(f32, f32)> {
        let n = batch.len();
        let alpha = self.alpha();
        let mut tape = Tape::new();
        let ep = bind(&self.encoder, &mut tape, true);
        let x = tape.constant(batch.pixels.clone());
        let z = self.encoder.forward(&mut tape, &ep, x)?;
        let z = tape.detach(z);
        let s = tape.constant(batch.state.clone());
        let feats = tape.concat_cols(&[z, s])?;
        let ap = bind(&self.actor, &mut tape, true);
        let pol = self
            .actor
            .forward(&mut tape, &ap, feats, Some(normal(&[n, ACTION_DIM], rng)))?;
        let log_prob = pol.log_prob.expect("sampled policy has a log-prob");
        let input = tape.concat_cols(&[feats, pol.squashed])?;
        let cp = bind(&self.critic, &mut tape, false);
        let (q1, q2) = self.critic.forward(&mut tape, &cp, input)?;
        let qmin = tape.minimum(q1, q2)?;
        let qmin = tape.reshape(qmin, &[n])?;
        let weighted = tape.scale(log_prob, alpha)?;
        let diff = tape.sub(weighted, qmin)?;
        let loss = tape.mean(diff)?;
        let g = tape.backward(loss)?;
        let grads = grads_of(&g, &ap);
        self.actor_opt.step(&mut self.actor.params_mut(), &grads)?;

        // J(α) = mean(α·(−log π − H̄)); d/d log α has the same form.
        let gap = tape
            .value(log_prob)
            .data()
            .iter()
            .map(|&l| (-l - self.sac.target_entropy) as f64)
            .sum::<f64>()
            / n as f64;
        let alpha_loss = alpha * gap as f32;
        let alpha_grad = Tensor::new(&[1], vec![alpha_loss])?;
        self.alpha_opt.step(&mut [&mut self.log_alpha], &[alpha_grad])?;
        Ok((tape.value(loss).item(), alpha_loss))
    }

    /// Reconstruction MSE plus latent and decoder-weight penalties; steps encoder and decoder.
    pub fn update_autoencoder(&mut self, batch: &Batch) -> Result<f32> {
        let (loss, grads) = self.autoencoder_loss(batch)?;
        let mut params: Vec<&mut Tensor> = self.encoder.params_mut();
        params.extend(self.decoder.params_mut());
        self.ae_opt.step(&mut params, &grads)?;
        Ok(loss)
    }

    /// `J(RAE)` and its gradients for encoder then decoder parameters, without stepping.
    pub fn autoencoder_loss(&self, batch: &Batch) -> Result<(f32, Vec<Tensor>)> {
        let n = batch.len();
        let mut tape = Tape::new();
        let ep = bind(&self.encoder, &mut tape, true);
        let x = tape.constant(batch.pixels.clone());
        let z = self.encoder.forward(&mut tape, &ep, x)?;
        let dp = bind(&self.decoder, &mut tape, true);
        let recon = self.decoder.forward(&mut tape, &dp, z)?;
        let rec = tape.mse(recon, x)?;
        let z2 = tape.square(z)?;
        let zsum = tape.sum(z2)?;
        let latent = tape.scale(zsum, self.sac.latent_penalty / n as f32)?;
        let mut loss = tape.add(rec, latent)?;
        if self.sac.decoder_weight_penalty > 0.0 {
            let mut norms = Vec::with_capacity(dp.len());
            for &p in &dp {
                let sq = tape.square(p)?;
                norms.push(tape.sum(sq)?);
            }
            let mut total = norms[0];
            for &v in &norms[1..] {
                total = tape.add(total, v)?;
            }
            let pen = tape.scale(total, self.sac.decoder_weight_penalty)?;
            loss = tape.add(loss, pen)?;
        }
        let g = tape.backward(loss)?;
        let vars: Vec<Var> = ep.iter().chain(&dp).copied().collect();
        Ok((tape.value(loss).item(), grads_of(&g, &vars)))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.target_critic, &self.critic, self.sac.critic_tau)?;
        soft_update(&mut self.target_encoder, &self.encoder, self.sac.encoder_tau)
    }

    /// One training iteration: critic and autoencoder every call, actor and
    /// target networks at their configured frequencies.
    pub fn update(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<UpdateStats> {
        let step = self.update_step;
        let critic_loss = self.update_critic(batch, rng)?;
        let (actor_loss, alpha_loss) = if step.is_multiple_of(self.sac.actor_update_freq) {
            let (a, b) = self.update_actor_and_alpha(batch, rng)?;
            (Some(a), Some(b))
        } else {
            (None, None)
        };
        if step.is_multiple_of(self.sac.critic_target_update_freq) {
            self.soft_update_targets()?;
        }
        let ae_loss = self.update_autoencoder(batch)?;
        self.update_step += 1;
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
            alpha_loss,
            ae_loss,
            alpha: self.alpha(),
        })
    }

    /// Write every network, optimizer state and `agent.toml` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let nets: [(&str, &dyn Module); 6] = [
            ("encoder", &self.encoder),
            ("decoder", &self.decoder),
            ("actor", &self.actor),
            ("critic", &self.critic),
            ("target_encoder", &self.target_encoder),
            ("target_critic", &self.target_critic),
        ];
        for (name, m) in nets {
            checkpoint::save(dir.join(format!("{name}.ckpt")), &m.params())?;
        }
        let mut optim: Vec<(String, &Tensor)> = vec![("log_alpha".into(), &self.log_alpha)];
        for (name, opt) in self.optimizers() {
            let (m, v) = opt.moments();
            optim.extend(m.iter().enumerate().map(|(i, t)| (format!("{name}.m.{i}"), t)));
            optim.extend(v.iter().enumerate().map(|(i, t)| (format!("{name}.v.{i}"), t)));
        }
        checkpoint::save(dir.join(OPTIM_FILE), &optim)?;
        let meta = AgentMeta {
            height: self.height,
            width: self.width,
            network: self.network,
            sac: self.sac,
            update_step: self.update_step,
            critic_opt_steps: self.critic_opt.step_count(),
            actor_opt_steps: self.actor_opt.step_count(),
            alpha_opt_steps: self.alpha_opt.step_count(),
            ae_opt_steps: self.ae_opt.step_count(),
        };
        let text = toml::to_string(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(dir.join(META_FILE), text)?;
        Ok(())
    }

    fn optimizers(&self) -> [(&'static str, &Adam); 4] {
        [
            ("critic", &self.critic_opt),
            ("actor", &self.actor_opt),
            ("alpha", &self.alpha_opt),
            ("ae", &self.ae_opt),
        ]
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(META_FILE))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", dir.join(META_FILE).display())))?;
        let meta: AgentMeta = toml::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut agent = Self::new(meta.height, meta.width, meta.network, meta.sac, 0)?;
        let load = |name: &str| -> Result<Vec<(String, Tensor)>> {
            checkpoint::load(dir.join(format!("{name}.ckpt"))).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))
        };
        agent.encoder.load_params(load("encoder")?)?;
        agent.decoder.load_params(load("decoder")?)?;
        agent.actor.load_params(load("actor")?)?;
        agent.critic.load_params(load("critic")?)?;
        agent.target_encoder.load_params(load("target_encoder")?)?;
        agent.target_critic.load_params(load("target_critic")?)?;

        let mut optim = load("optim")?.into_iter();
        match optim.next() {
            Some((name, t)) if name == "log_alpha" && t.shape() == [1] => agent.log_alpha = t,
            _ => return Err(Error::Checkpoint("optim.ckpt lacks log_alpha".into())),
        }
        let steps = [
            meta.critic_opt_steps,
            meta.actor_opt_steps,
            meta.alpha_opt_steps,
            meta.ae_opt_steps,
        ];
        let opts = [
            &mut agent.critic_opt,
            &mut agent.actor_opt,
            &mut agent.alpha_opt,
            &mut agent.ae_opt,
        ];
        for (opt, step) in opts.into_iter().zip(steps) {
            let k = opt.moments().0.len();
            let first: Vec<Tensor> = optim.by_ref().take(k).map(|(_, t)| t).collect();
            let second: Vec<Tensor> = optim.by_ref().take(k).map(|(_, t)| t).collect();
            opt.restore(step, first, second)
                .map_err(|e| Error::Checkpoint(format!("optimizer state: {e}")))?;
        }
        agent.update_step = meta.update_step;
        Ok(agent)
    }
}
