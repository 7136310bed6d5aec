//! Bootstrap targets from the target network and one Adam step on the
//! behavior network over a batch of whole episodes.

use super::buffer::{SequenceBuffer, TransitionTuple};
use crate::adam::{clip_grad_norm, AdamState};
use crate::error::{Error, Result};
use crate::grnn::{backward_into, forward_sequence, GrqnParams, LatentState};
use rand::Rng;

/// Hyper-parameters of a training step.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub batch: usize,
    pub gamma: f64,
    pub max_grad_norm: Option<f64>,
}

fn masked_max(q: &[f64], obs_mask: impl Fn(usize) -> bool) -> Option<f64> {
    q.iter().enumerate().filter(|(a, _)| obs_mask(*a)).map(|(_, &v)| v).reduce(f64::max)
}

/// `t_j = r_j + γ(1 − end_j)·max_a Q(Y_{j+1}, a | θ⁻)`. `Y_{j+1}` is the
/// stage-(j+1) output of the target network unrolled from a zero latent over
/// the episode's observations, so every bootstrap is read at the same
/// recurrence depth the behavior network is trained at. The max runs over
/// branches still in service at `O_{j+1}`.
pub fn compute_targets(episode: &[TransitionTuple], target: &GrqnParams<f64>, gamma: f64) -> Result<Vec<f64>> {
    if episode.is_empty() {
        return Ok(Vec::new());
    }
    for (j, t) in episode.iter().enumerate() {
        if !t.end && j + 1 == episode.len() {
            return Err(Error::Shape("episode stops before its end flag".into()));
        }
    }
    let needs_bootstrap = gamma != 0.0 && episode.iter().any(|t| !t.end);
    let q = if needs_bootstrap {
        let inputs: Vec<_> = episode.iter().map(|t| t.obs.input()).collect();
        let z0 = LatentState::zeros(target.dims.nodes, target.dims.hidden);
        Some(forward_sequence(&inputs, &z0, target)?.q)
    } else {
        None
    };
    Ok(episode
        .iter()
        .enumerate()
        .map(|(j, t)| {
            if t.end {
                return t.reward;
            }
            let boot = q
                .as_ref()
                .and_then(|q| masked_max(&q[j + 1], |a| t.next_obs.topology.is_in_service(a)))
                .unwrap_or(0.0);
            t.reward + gamma * boot
        })
        .collect())
}

/// Per-episode target memo, valid until the target network changes.
#[derive(Clone, Debug, Default)]
pub struct TargetCache {
    targets: Vec<Option<Vec<f64>>>,
}

impl TargetCache {
    pub fn invalidate(&mut self) {
        self.targets.clear();
    }

    pub fn get(&mut self, buffer: &SequenceBuffer, index: usize, target: &GrqnParams<f64>, gamma: f64) -> Result<&[f64]> {
        if self.targets.len() < buffer.len() {
            self.targets.resize(buffer.len(), None);
        }
        if self.targets[index].is_none() {
            let ep = buffer.get(index).ok_or_else(|| Error::Shape(format!("no episode {index}")))?;
            self.targets[index] = Some(compute_targets(ep, target, gamma)?);
        }
        Ok(self.targets[index].as_deref().expect("filled above"))
    }
}

/// Mean squared TD error over every stage of the given episodes and its
/// gradient with respect to `params`.
pub fn loss_and_gradient(
    episodes: &[(&[TransitionTuple], &[f64])],
    params: &GrqnParams<f64>,
) -> Result<(f64, GrqnParams<f64>)> {
    let stages: usize = episodes.iter().map(|(e, _)| e.len()).sum();
    let mut grads = GrqnParams::zeros(params.dims);
    if stages == 0 {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / stages as f64;
    let z0 = LatentState::zeros(params.dims.nodes, params.dims.hidden);
    let mut loss = 0.0;
    for (episode, targets) in episodes {
        let inputs: Vec<_> = episode.iter().map(|t| t.obs.input()).collect();
        let out = forward_sequence(&inputs, &z0, params)?;
        let mut dq = vec![vec![0.0; params.dims.actions]; episode.len()];
        for (j, t) in episode.iter().enumerate() {
            let resid = out.q[j][t.action] - targets[j];
            loss += resid * resid * scale;
            dq[j][t.action] = 2.0 * resid * scale;
        }
        backward_into(&out.tape, &dq, params, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Samples `batch` whole episodes uniformly with replacement, takes one Adam
/// step on the mean squared TD error and returns the pre-update loss.
pub fn train_step<R: Rng + ?Sized>(
    buffer: &SequenceBuffer,
    params: &mut GrqnParams<f64>,
    target: &GrqnParams<f64>,
    adam: &mut AdamState<f64>,
    config: &TrainConfig,
    cache: &mut TargetCache,
    rng: &mut R,
) -> Result<f64> {
    if buffer.len() < config.batch || config.batch == 0 {
        return Err(Error::InsufficientBuffer { have: buffer.len(), need: config.batch.max(1) });
    }
    let idx = buffer.sample_indices(config.batch, rng);
    for &i in &idx {
        cache.get(buffer, i, target, config.gamma)?;
    }
    let batch: Vec<(&[TransitionTuple], &[f64])> = idx
        .iter()
        .map(|&i| (buffer.episodes()[i].as_slice(), cache.targets[i].as_deref().expect("cached")))
        .collect();
    let (loss, mut grads) = loss_and_gradient(&batch, params)?;
    if let Some(max) = config.max_grad_norm {
        clip_grad_norm(&mut grads, max);
    }
    adam.update(params, &grads);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adam::AdamState;
    use crate::env::FaultChainEnv;
    use crate::grnn::GrqnDims;
    use crate::synthetic::toy_ring;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> GrqnDims {
        GrqnDims { nodes: 6, features: 1, hidden: 3, outputs: 2, hops: 2, head_width: 4, actions: 8 }
    }

    fn episode(actions: &[usize]) -> Vec<TransitionTuple> {
        let mut env = FaultChainEnv::new(&toy_ring(), 1.0, actions.len()).unwrap();
        env.reset();
        actions
            .iter()
            .map(|&a| {
                let obs = env.observation();
                let r = env.step(a).unwrap();
                TransitionTuple { obs, action: a, reward: r.reward / 160.0, next_obs: r.next_observation, end: r.end }
            })
            .collect()
    }

    #[test]
    fn target_examples() {
        let full = crate::oracle::enumerate_chains(&toy_ring(), 1.0, 3).unwrap();
        let actions = full.chains().iter().find(|c| c.actions.len() == 3).unwrap().actions.clone();
        let ep = episode(&actions);
        let mut p = GrqnParams::<f64>::zeros(dims());
        p.b_out = vec![1.0; 8];
        let t = compute_targets(&ep, &p, 0.99).unwrap();
        assert_eq!(t[2], ep[2].reward);
        assert!((t[0] - (ep[0].reward + 0.99)).abs() < 1e-15);
        assert!((t[1] - (ep[1].reward + 0.99)).abs() < 1e-15);
        let g0 = compute_targets(&ep, &p, 0.0).unwrap();
        assert_eq!(g0, ep.iter().map(|t| t.reward).collect::<Vec<_>>());
    }

    #[test]
    fn bootstrap_ignores_out_of_service_branches() {
        let ep = episode(&[0, 3]);
        let mut p = GrqnParams::<f64>::zeros(dims());
        p.b_out = vec![0.1; 8];
        p.b_out[0] = 5.0; // branch 0 is already out at the next state
        let t = compute_targets(&ep, &p, 1.0).unwrap();
        assert!((t[0] - (ep[0].reward + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn zero_residuals_leave_parameters_unchanged() {
        let mut buffer = SequenceBuffer::new();
        let mut ep = episode(&[1, 2, 4]);
        for t in &mut ep {
            t.reward = 0.0;
        }
        buffer.push(ep);
        let mut p = GrqnParams::<f64>::zeros(dims());
        let before = p.clone();
        let target = p.clone();
        let mut adam = AdamState::new(&p, 0.005);
        let cfg = TrainConfig { batch: 1, gamma: 0.0, max_grad_norm: None };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let loss = train_step(&buffer, &mut p, &target, &mut adam, &cfg, &mut TargetCache::default(), &mut rng).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn insufficient_buffer_is_an_error() {
        let mut buffer = SequenceBuffer::new();
        buffer.push(episode(&[0]));
        let mut p = GrqnParams::<f64>::zeros(dims());
        let target = p.clone();
        let mut adam = AdamState::new(&p, 0.005);
        let cfg = TrainConfig { batch: 2, gamma: 0.9, max_grad_norm: None };
        let err = train_step(&buffer, &mut p, &target, &mut adam, &cfg, &mut TargetCache::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::InsufficientBuffer { have: 1, need: 2 })));
    }

    #[test]
    fn single_stage_loss_gradient_matches_finite_difference() {
        let ep = episode(&[0]);
        let p = GrqnParams::<f64>::init_uniform(dims(), &mut ChaCha8Rng::seed_from_u64(5));
        let targets = vec![0.3];
        let (loss, grads) = loss_and_gradient(&[(&ep, &targets)], &p).unwrap();
        let q = crate::grnn::forward_sequence(&[ep[0].obs.input()], &LatentState::zeros(6, 3), &p).unwrap().q[0][0];
        assert!((loss - (0.3 - q) * (0.3 - q)).abs() < 1e-15);
        let h = 1e-6;
        for (ti, g) in grads.tensors().iter().enumerate() {
            for k in 0..g.len() {
                let mut plus = p.clone();
                plus.tensors_mut()[ti][k] += h;
                let mut minus = p.clone();
                minus.tensors_mut()[ti][k] -= h;
                let lp = loss_and_gradient(&[(&ep, &targets)], &plus).unwrap().0;
                let lm = loss_and_gradient(&[(&ep, &targets)], &minus).unwrap().0;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7 * (1.0 + fd.abs()), "tensor {ti}[{k}]: {fd} vs {}", g[k]);
            }
        }
    }
}
