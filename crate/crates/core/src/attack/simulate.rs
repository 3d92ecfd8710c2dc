//! Extraction experiments over grids of `(n, beta, q, m)`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::balls::BallIndex;
use super::distribution::PasswordDistribution;
use super::greedy::success_at_budgets;
use super::model::VariantModel;
use super::oracle::OracleState;
use super::AttackError;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n_grid: Vec<usize>,
    pub beta_grid: Vec<usize>,
    pub q_grid: Vec<usize>,
    pub m_grid: Vec<usize>,
    pub targets: usize,
    pub folds: usize,
    pub seed: u64,
    /// Restricts the attacker to the `k` most probable passwords.
    pub candidate_k: Option<usize>,
    pub final_guess_counts: bool,
    /// Draw targets only among passwords that are not blocklisted.
    pub exclude_blocked_targets: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_grid: vec![0, 10],
            beta_grid: vec![0],
            q_grid: vec![10, 100, 1000],
            m_grid: vec![1],
            targets: 500,
            folds: 5,
            seed: 0,
            candidate_k: None,
            final_guess_counts: true,
            exclude_blocked_targets: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub n: usize,
    pub beta: usize,
    pub q: usize,
    pub m: usize,
    /// Percent of all targets.
    pub success_pct: f64,
    /// Sample standard deviation of the per-fold percentages.
    pub std_pct: f64,
    pub fold_pct: Vec<f64>,
    pub targets: usize,
    pub seed: u64,
}

/// The top `beta` passwords of `dist` plus their variants.
pub fn blocked_set(dist: &PasswordDistribution, beta: usize, model: &dyn VariantModel) -> HashSet<String> {
    let mut out = HashSet::new();
    for w in dist.support().iter().take(beta) {
        out.insert(w.clone());
        out.extend(model.variants(w));
    }
    out
}

/// Success probability of the exact-checking attacker (no variants, no
/// blocklist) with budget `q` and batches of `m`: the mass of the
/// `m (q - 1) + 1` most probable passwords.
pub fn exact_baseline(dist: &PasswordDistribution, q: usize, m: usize) -> f64 {
    dist.top_mass(m * q.saturating_sub(1) + 1)
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Runs the greedy attacker for every grid cell. Targets are drawn once
/// per `(n, beta)` with replacement from `dist` and split round-robin into
/// folds; `model_for(n)` supplies the oracle's variant function.
pub fn simulate_extraction<M, F>(
    dist: &PasswordDistribution,
    model_for: F,
    cfg: &SimConfig,
) -> Result<Vec<CellResult>, AttackError>
where
    M: VariantModel,
    F: Fn(usize) -> M,
{
    if cfg.n_grid.is_empty() || cfg.beta_grid.is_empty() || cfg.q_grid.is_empty() || cfg.m_grid.is_empty() {
        return Err(AttackError::Invalid("grids must be nonempty".into()));
    }
    if cfg.q_grid.contains(&0) || cfg.m_grid.contains(&0) {
        return Err(AttackError::Invalid("q and m must be at least 1".into()));
    }
    if cfg.targets == 0 || cfg.folds == 0 {
        return Err(AttackError::Invalid("targets and folds must be at least 1".into()));
    }
    let attacker_dist = match cfg.candidate_k {
        Some(k) => dist.top_k(k)?,
        None => dist.clone(),
    };
    let max_q = *cfg.q_grid.iter().max().expect("nonempty");
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let model = model_for(n);
        for &beta in &cfg.beta_grid {
            let blocked = blocked_set(dist, beta, &model);
            let idx = BallIndex::build(&attacker_dist, &model, &blocked);
            let targets = draw_targets(dist, cfg, &blocked)?;
            for &m in &cfg.m_grid {
                let per_target: Vec<Vec<bool>> = targets
                    .par_iter()
                    .map(|t| {
                        if idx.num_passwords() == 0 {
                            return Ok(vec![false; cfg.q_grid.len()]);
                        }
                        let mut oracle = OracleState::new(t, &model, max_q, m, &blocked)?;
                        success_at_budgets(&idx, &mut oracle, m, &cfg.q_grid, cfg.final_guess_counts)
                    })
                    .collect::<Result<_, AttackError>>()?;
                for (qi, &q) in cfg.q_grid.iter().enumerate() {
                    let mut hits = vec![0usize; cfg.folds];
                    let mut sizes = vec![0usize; cfg.folds];
                    for (i, r) in per_target.iter().enumerate() {
                        sizes[i % cfg.folds] += 1;
                        hits[i % cfg.folds] += r[qi] as usize;
                    }
                    let fold_pct: Vec<f64> = hits
                        .iter()
                        .zip(&sizes)
                        .filter(|(_, s)| **s > 0)
                        .map(|(h, s)| 100.0 * *h as f64 / *s as f64)
                        .collect();
                    let total: usize = hits.iter().sum();
                    rows.push(CellResult {
                        n,
                        beta,
                        q,
                        m,
                        success_pct: 100.0 * total as f64 / targets.len() as f64,
                        std_pct: sample_std(&fold_pct),
                        fold_pct,
                        targets: targets.len(),
                        seed: cfg.seed,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn draw_targets(
    dist: &PasswordDistribution,
    cfg: &SimConfig,
    blocked: &HashSet<String>,
) -> Result<Vec<String>, AttackError> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    if cfg.exclude_blocked_targets && !blocked.is_empty() {
        let allowed: Vec<(String, f64)> = dist
            .iter()
            .filter(|(w, _)| !blocked.contains(*w))
            .map(|(w, p)| (w.to_owned(), p))
            .collect();
        let sub = PasswordDistribution::new(allowed)?;
        return Ok(sub
            .sample_indices(cfg.targets, &mut rng)
            .into_iter()
            .map(|i| sub.support()[i].clone())
            .collect());
    }
    Ok(dist
        .sample_indices(cfg.targets, &mut rng)
        .into_iter()
        .map(|i| dist.support()[i].clone())
        .collect())
}

/// Tab-separated rows with a header line.
pub fn write_tsv<W: Write>(rows: &[CellResult], mut w: W) -> io::Result<()> {
    writeln!(w, "n\tbeta\tq\tm\tsuccess_pct\tstd_pct\ttargets\tseed")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{}\t{}",
            r.n, r.beta, r.q, r.m, r.success_pct, r.std_pct, r.targets, r.seed
        )?;
    }
    w.flush()
}

/// One block per `(m, beta)`, one line per `n`, one column per `q`, each
/// cell `success (± std)` in percent.
pub fn format_table(rows: &[CellResult]) -> String {
    let mut qs: Vec<usize> = rows.iter().map(|r| r.q).collect();
    qs.sort_unstable();
    qs.dedup();
    let mut keys: Vec<(usize, usize, usize)> = rows.iter().map(|r| (r.m, r.beta, r.n)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut out = String::new();
    let _ = write!(out, "{:>5} {:>6} {:>6}", "m", "beta", "n");
    for q in &qs {
        let _ = write!(out, " {:>18}", format!("q={q}"));
    }
    out.push('\n');
    let mut last: Option<(usize, usize)> = None;
    for (m, beta, n) in keys {
        let head = if last == Some((m, beta)) {
            format!("{:>5} {:>6}", "", "")
        } else {
            format!("{m:>5} {beta:>6}")
        };
        last = Some((m, beta));
        let _ = write!(out, "{head} {n:>6}");
        for q in &qs {
            let cell = rows
                .iter()
                .find(|r| r.m == m && r.beta == beta && r.n == n && r.q == *q)
                .map(|r| format!("{:.2} (± {:.2})", r.success_pct, r.std_pct))
                .unwrap_or_default();
            let _ = write!(out, " {cell:>18}");
        }
        out.push('\n');
    }
    out
}
