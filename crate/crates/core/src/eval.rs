//! Success rate, average turns and hierarchical DCG, plus the episode runner.

use crate::env::{initial_state, select_action_space, step, Action, EnvConfig, RewardScheme, UserSimulator, World};
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::policy::{ActContext, ConversationPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Turns used; `T_max` on failure.
    pub turns: usize,
    pub success_turn: Option<usize>,
    /// 1-based position of the target in the accepted list.
    pub success_position: Option<usize>,
}

impl EpisodeResult {
    pub fn failure(t_max: usize) -> Self {
        EpisodeResult { success: false, turns: t_max, success_turn: None, success_position: None }
    }

    pub fn hit(turn: usize, position: usize) -> Self {
        EpisodeResult { success: true, turns: turn, success_turn: Some(turn), success_position: Some(position) }
    }
}

fn nonempty(results: &[EpisodeResult]) -> Result<()> {
    if results.is_empty() {
        return Err(Error::invalid("no episode results"));
    }
    Ok(())
}

/// Fraction of episodes that succeed within `t` turns.
pub fn success_rate(results: &[EpisodeResult], t: usize) -> Result<f64> {
    nonempty(results)?;
    let hits = results.iter().filter(|r| r.success_turn.is_some_and(|s| s <= t)).count();
    Ok(hits as f64 / results.len() as f64)
}

pub fn average_turns(results: &[EpisodeResult]) -> Result<f64> {
    nonempty(results)?;
    Ok(results.iter().map(|r| r.turns as f64).sum::<f64>() / results.len() as f64)
}

/// Contribution of a hit at turn `t` and list position `k` (both 1-based).
pub fn hdcg_term(t: usize, k: usize) -> f64 {
    let a = 1.0 / ((t + 2) as f64).log2();
    let b = 1.0 / ((t + 1) as f64).log2();
    a + (b - a) / ((k + 1) as f64).log2()
}

pub fn hdcg(results: &[EpisodeResult], t_max: usize, k: usize) -> Result<f64> {
    nonempty(results)?;
    let mut total = 0.0;
    for r in results {
        if let (Some(t), Some(pos)) = (r.success_turn, r.success_position) {
            if t == 0 || t > t_max || pos == 0 || pos > k {
                return Err(Error::invalid(format!("hit at ({t}, {pos}) outside ({t_max}, {k})")));
            }
            total += hdcg_term(t, pos);
        }
    }
    Ok(total / results.len() as f64)
}

/// Plays one conversation for the pair `(user, target)`.
pub fn run_episode(
    policy: &dyn ConversationPolicy,
    user: UserId,
    target: ItemId,
    cfg: &EnvConfig,
    world: World<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult> {
    let sim = UserSimulator::new(target, world.catalog)?;
    let mut state = initial_state(user, &sim, world.catalog, rng)?;
    let scheme = RewardScheme::sparse();
    while state.turn < cfg.t_max {
        let space = select_action_space(&state, cfg, world)?;
        if space.is_empty() {
            break;
        }
        let ctx = ActContext { state: &state, space: &space, sim: &sim, cfg, world };
        let action = match policy.act(&ctx, rng) {
            Err(Error::NoActions) => break,
            other => other?,
        };
        let out = step(&state, &action, &sim, &scheme, cfg, world)?;
        if out.success {
            let pos = match &action {
                Action::RecommendItems(list) => list.iter().position(|v| *v == target).map_or(0, |i| i + 1),
                Action::AskAttribute(_) => 0,
            };
            return Ok(EpisodeResult::hit(out.next_state.turn, pos));
        }
        if out.done {
            break;
        }
        state = out.next_state;
    }
    Ok(EpisodeResult::failure(cfg.t_max))
}

/// Episode rng for pair `index` under `seed`.
pub fn episode_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One episode per pair, in pair order.
pub fn evaluate_episodes(
    policy: &dyn ConversationPolicy,
    pairs: &[(UserId, ItemId)],
    cfg: &EnvConfig,
    seed: u64,
    world: World<'_>,
) -> Result<Vec<EpisodeResult>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(u, v))| run_episode(policy, u, v, cfg, world, &mut episode_rng(seed, i)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub sr_at_t: f64,
    pub at: f64,
    pub hdcg: f64,
    pub n_episodes: usize,
}

impl SeedMetrics {
    pub fn from_results(seed: u64, results: &[EpisodeResult], cfg: &EnvConfig) -> Result<Self> {
        Ok(SeedMetrics {
            seed,
            sr_at_t: success_rate(results, cfg.t_max)?,
            at: average_turns(results)?,
            hdcg: hdcg(results, cfg.t_max, cfg.k)?,
            n_episodes: results.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sr_at_t: f64,
    pub at: f64,
    pub hdcg: f64,
    pub n_episodes: usize,
    pub per_seed: Vec<SeedMetrics>,
    /// Episodes per seed, in pair order.
    pub episodes: Vec<Vec<EpisodeResult>>,
}

impl MetricsReport {
    pub fn from_episodes(seeds: &[u64], episodes: Vec<Vec<EpisodeResult>>, cfg: &EnvConfig) -> Result<Self> {
        if seeds.len() != episodes.len() {
            return Err(Error::invalid("one episode list per seed expected"));
        }
        let per_seed = seeds
            .iter()
            .zip(&episodes)
            .map(|(&s, r)| SeedMetrics::from_results(s, r, cfg))
            .collect::<Result<Vec<_>>>()?;
        let all: Vec<EpisodeResult> = episodes.iter().flatten().copied().collect();
        let overall = SeedMetrics::from_results(0, &all, cfg)?;
        Ok(MetricsReport {
            sr_at_t: overall.sr_at_t,
            at: overall.at,
            hdcg: overall.hdcg,
            n_episodes: all.len(),
            per_seed,
            episodes,
        })
    }

    /// `seed,sr_at_T,at,hdcg,n_episodes` rows per seed and an `all` row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "seed,sr_at_T,at,hdcg,n_episodes")?;
        for s in &self.per_seed {
            writeln!(out, "{},{:.6},{:.6},{:.6},{}", s.seed, s.sr_at_t, s.at, s.hdcg, s.n_episodes)?;
        }
        writeln!(out, "all,{:.6},{:.6},{:.6},{}", self.sr_at_t, self.at, self.hdcg, self.n_episodes)?;
        Ok(())
    }
}

/// One greedy episode per (pair, seed), aggregated.
pub fn evaluate_policy(
    policy: &dyn ConversationPolicy,
    pairs: &[(UserId, ItemId)],
    cfg: &EnvConfig,
    seeds: &[u64],
    world: World<'_>,
) -> Result<MetricsReport> {
    if pairs.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("evaluation needs pairs and seeds"));
    }
    cfg.validate()?;
    let episodes =
        seeds.iter().map(|&s| evaluate_episodes(policy, pairs, cfg, s, world)).collect::<Result<Vec<_>>>()?;
    MetricsReport::from_episodes(seeds, episodes, cfg)
}

/// Percentile interval for the mean of `a − b` under paired resampling.
pub fn paired_bootstrap_ci(a: &[f64], b: &[f64], resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("paired samples must be nonempty and of equal length"));
    }
    if !(0.0..1.0).contains(&level) || resamples == 0 {
        return Err(Error::invalid("bad bootstrap level or resample count"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> =
        (0..resamples).map(|_| (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum::<f64>() / n as f64).collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Ok((at(tail), at(1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingTable;
    use crate::env::fixtures::catalog;
    use crate::policy::{AbsGreedy, UniformRandom};

    fn cfg(t_max: usize, k: usize) -> EnvConfig {
        EnvConfig { t_max, k, k_v: k.max(10), k_p: 10 }
    }

    #[test]
    fn success_rate_examples() {
        let mut r: Vec<_> = (0..7).map(|_| EpisodeResult::hit(2, 1)).collect();
        r.extend((0..3).map(|_| EpisodeResult::failure(15)));
        assert!((success_rate(&r, 15).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(success_rate(&[EpisodeResult::hit(12, 1)], 10).unwrap(), 0.0);
        assert_eq!(success_rate(&[EpisodeResult::failure(15)], 15).unwrap(), 0.0);
        assert!(success_rate(&[], 15).is_err());
    }

    #[test]
    fn average_turns_examples() {
        assert_eq!(average_turns(&[EpisodeResult::hit(3, 1), EpisodeResult::failure(15)]).unwrap(), 9.0);
        assert_eq!(average_turns(&[EpisodeResult::hit(1, 1); 4]).unwrap(), 1.0);
        assert_eq!(average_turns(&[EpisodeResult::failure(15)]).unwrap(), 15.0);
    }

    #[test]
    fn hdcg_examples() {
        assert_eq!(hdcg(&[EpisodeResult::hit(1, 1)], 15, 10).unwrap(), 1.0);
        assert!((hdcg(&[EpisodeResult::hit(15, 10)], 15, 10).unwrap() - 0.2462).abs() < 5e-4);
        assert_eq!(hdcg(&[EpisodeResult::failure(15)], 15, 10).unwrap(), 0.0);
        assert!(hdcg(&[EpisodeResult::hit(16, 1)], 15, 10).is_err());
        assert!(hdcg(&[EpisodeResult::hit(2, 11)], 15, 10).is_err());
    }

    #[test]
    fn hdcg_is_monotone_and_bounded() {
        for t in 1..=15 {
            for k in 1..=10 {
                let h = hdcg_term(t, k);
                assert!((0.0..=1.0).contains(&h));
                assert_eq!(h == 1.0, (t, k) == (1, 1));
                if t > 1 {
                    assert!(h <= hdcg_term(t - 1, k));
                }
                if k > 1 {
                    assert!(h <= hdcg_term(t, k - 1));
                }
            }
        }
    }

    #[test]
    fn success_rate_grows_with_threshold() {
        let r: Vec<_> = (1..=10).map(|t| EpisodeResult::hit(t, 1)).collect();
        let srs: Vec<f64> = (1..=10).map(|t| success_rate(&r, t).unwrap()).collect();
        assert!(srs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn greedy_on_top_ranked_targets_is_perfect() {
        // one item per attribute and zero embeddings: after the volunteered
        // attribute the only candidate is the target
        let c = {
            let items: Vec<Vec<u32>> = (0..6).map(|i| vec![i]).collect();
            let refs: Vec<&[u32]> = items.iter().map(|v| v.as_slice()).collect();
            catalog(3, 6, &refs)
        };
        let e = EmbeddingTable::zeros(&c, 2);
        let w = World { catalog: &c, emb: &e };
        let pairs: Vec<_> = (0..6).map(|i| (UserId(i % 3), ItemId(i))).collect();
        let report = evaluate_policy(&AbsGreedy, &pairs, &cfg(15, 10), &[1, 2], w).unwrap();
        assert_eq!((report.sr_at_t, report.at, report.hdcg), (1.0, 1.0, 1.0));
        assert_eq!(report.n_episodes, 12);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let c = catalog(2, 4, &[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[1, 3], &[2, 3]]);
        let e = EmbeddingTable::random(&c, 3, 5);
        let w = World { catalog: &c, emb: &e };
        let pairs: Vec<_> = (0..6).map(|i| (UserId(i % 2), ItemId(i))).collect();
        let a = evaluate_policy(&UniformRandom, &pairs, &cfg(5, 1), &[3, 4], w).unwrap();
        let b = evaluate_policy(&UniformRandom, &pairs, &cfg(5, 1), &[3, 4], w).unwrap();
        assert_eq!(a, b);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("seed,sr_at_T,at,hdcg,n_episodes\n3,"));
        assert!(text.lines().last().unwrap().starts_with("all,"));
    }

    #[test]
    fn bootstrap_interval_brackets_the_mean() {
        let a: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        let b = vec![0.0; 50];
        let (lo, hi) = paired_bootstrap_ci(&a, &b, 2000, 0.95, 1).unwrap();
        assert!(lo < 0.5 && 0.5 < hi && lo > 0.2 && hi < 0.8);
        let (lo, hi) = paired_bootstrap_ci(&b, &b, 100, 0.95, 1).unwrap();
        assert_eq!((lo, hi), (0.0, 0.0));
    }
}
